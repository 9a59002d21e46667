#include <benchmark/benchmark.h>

#include <riskdpg/agent.hpp>
#include <riskdpg/envsim.hpp>
#include <riskdpg/gradnet.hpp>
#include <riskdpg/retdist.hpp>

namespace {

using namespace riskdpg;

NetworkParams critic_like(int hidden) {
  const int sizes[] = {5, hidden, hidden, 1};
  const Activation acts[] = {Activation::relu, Activation::relu, Activation::linear};
  return mlp_init(sizes, acts, 1);
}

Matrix random_input(Eigen::Index rows, Eigen::Index cols) {
  Rng rng(3);
  return Matrix::NullaryExpr(rows, cols, [&] { return rng.normal(); });
}

void BM_Forward(benchmark::State& state) {
  const auto params = critic_like(static_cast<int>(state.range(0)));
  const Matrix x = random_input(state.range(1), 5);
  for (auto _ : state) benchmark::DoNotOptimize(forward(params, x));
}
BENCHMARK(BM_Forward)->Args({32, 1024})->Args({64, 1024})->Args({400, 256});

void BM_Backward(benchmark::State& state) {
  const auto params = critic_like(static_cast<int>(state.range(0)));
  const Matrix x = random_input(state.range(1), 5);
  const auto fwd = forward(params, x);
  const Matrix g = Matrix::Ones(x.rows(), 1);
  for (auto _ : state) benchmark::DoNotOptimize(backward(params, fwd.cache, g));
}
BENCHMARK(BM_Backward)->Args({32, 1024})->Args({64, 1024});

void BM_QuantileHuberLoss(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(5);
  ReturnSamples pred, target;
  for (std::size_t i = 0; i < n; ++i) {
    pred.atoms.push_back(rng.normal());
    target.atoms.push_back(rng.normal());
  }
  pred = sort_with_permutation(pred).sorted;
  const auto grid = quantile_grid(n);
  for (auto _ : state) benchmark::DoNotOptimize(quantile_huber_loss(pred, target, grid, 1.0));
}
BENCHMARK(BM_QuantileHuberLoss)->Arg(16)->Arg(51);

void BM_CvarSubgradient(benchmark::State& state) {
  Rng rng(6);
  ReturnSamples s;
  for (int i = 0; i < state.range(0); ++i) s.atoms.push_back(rng.normal());
  for (auto _ : state) benchmark::DoNotOptimize(cvar_subgradient(s, 0.5));
}
BENCHMARK(BM_CvarSubgradient)->Arg(51);

struct PendulumLearner {
  Agent agent;
  std::vector<Transition> batch;

  explicit PendulumLearner(int hidden, int atoms, int m) : agent(make_config(hidden, atoms, m), Pendulum().spec()) {
    Rng rng(9);
    for (int i = 0; i < m; ++i) {
      Transition t;
      t.x = Pendulum::make_state(rng.normal(), rng.normal());
      t.x_next = Pendulum::make_state(rng.normal(), rng.normal());
      t.a = Eigen::VectorXd::Constant(1, rng.uniform());
      t.r = -rng.uniform();
      batch.push_back(t);
    }
  }

  static AgentConfig make_config(int hidden, int atoms, int m) {
    AgentConfig c;
    c.actor_hidden = c.critic_hidden = {hidden, hidden};
    c.n_atoms = atoms;
    c.batch_size = m;
    return c;
  }
};

void BM_CriticUpdate(benchmark::State& state) {
  PendulumLearner l(static_cast<int>(state.range(0)), static_cast<int>(state.range(1)), 64);
  Rng rng(1);
  for (auto _ : state) benchmark::DoNotOptimize(l.agent.critic_update(l.batch, rng));
}
BENCHMARK(BM_CriticUpdate)->Args({64, 16})->Args({32, 16});

void BM_ActorUpdate(benchmark::State& state) {
  PendulumLearner l(static_cast<int>(state.range(0)), static_cast<int>(state.range(1)), 64);
  Rng rng(1);
  for (auto _ : state) benchmark::DoNotOptimize(l.agent.actor_update(l.batch, rng));
}
BENCHMARK(BM_ActorUpdate)->Args({64, 16})->Args({32, 16});

}  // namespace

BENCHMARK_MAIN();
