#include <doctest.h>

#include <cmath>
#include <vector>

#include <riskdpg/agent.hpp>
#include <riskdpg/errors.hpp>

#include "oracles/oracles.hpp"

using namespace riskdpg;

namespace {

EnvSpec toy_spec() {
  EnvSpec s;
  s.state_dim = 2;
  s.action_dim = 1;
  s.a_max = Eigen::VectorXd::Constant(1, 1.5);
  s.max_steps = 10;
  return s;
}

AgentConfig toy_config(double alpha = 0.0) {
  AgentConfig c;
  c.alpha = alpha;
  c.gamma = 0.9;
  c.n_atoms = 4;
  c.batch_size = 3;
  c.actor_hidden = {5};
  c.critic_hidden = {6, 5};
  c.optimizer = OptimizerKind::sgd;
  c.grad_clip = 0.0;
  c.critic_lr = 1e-2;
  c.actor_lr = 1e-2;
  c.seed = 4;
  return c;
}

std::vector<Transition> toy_batch(std::size_t m, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Transition> out;
  for (std::size_t i = 0; i < m; ++i) {
    Transition t;
    t.x = Eigen::VectorXd(2);
    t.x << rng.normal(), rng.normal();
    t.a = Eigen::VectorXd::Constant(1, 1.5 * (2.0 * rng.uniform() - 1.0));
    t.r = rng.normal();
    t.x_next = Eigen::VectorXd(2);
    t.x_next << rng.normal(), rng.normal();
    t.terminal = i == 0;
    out.push_back(t);
  }
  return out;
}

Matrix noise(Eigen::Index m, Eigen::Index n, std::uint64_t seed) {
  Rng rng(seed);
  Matrix q(m, n);
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < n; ++j) q(i, j) = rng.normal();
  return q;
}

}  // namespace

TEST_CASE("config validation") {
  AgentConfig c;
  CHECK_NOTHROW(c.validate());
  c.alpha = 1.0;
  CHECK_THROWS_AS(c.validate(), DomainError);
  c.alpha = 0.5;
  c.n_atoms = 1;
  CHECK_THROWS_AS(c.validate(), LevelError);
  AgentConfig d;
  d.gamma = 1.1;
  CHECK_THROWS_AS(d.validate(), DomainError);
  AgentConfig e;
  e.critic_hidden = {0};
  CHECK_THROWS_AS(e.validate(), DomainError);
}

TEST_CASE("actor output respects the action bound") {
  Agent agent(toy_config(), toy_spec());
  Rng rng(1);
  for (int i = 0; i < 200; ++i) {
    Eigen::VectorXd x(2);
    x << 10.0 * rng.normal(), 10.0 * rng.normal();
    CHECK(std::abs(agent.actor().act(x)[0]) <= 1.5);
    CHECK(std::abs(agent.select_action(x, 5.0, rng)[0]) <= 1.5);
  }
  Eigen::VectorXd x = Eigen::VectorXd::Ones(2);
  CHECK(agent.select_action(x, 0.0, rng) == agent.actor().act(x));
}

TEST_CASE("critic generates one atom per noise value") {
  Agent agent(toy_config(), toy_spec());
  const std::vector<double> q{-1.0, 0.0, 2.0};
  const auto z = critic_generate(agent.critic(), Eigen::VectorXd::Zero(2),
                                 Eigen::VectorXd::Zero(1), q);
  CHECK(z.size() == 3);
  const auto again = critic_generate(agent.critic(), Eigen::VectorXd::Zero(2),
                                     Eigen::VectorXd::Zero(1), q);
  CHECK(z.atoms == again.atoms);
}

TEST_CASE("critic loss gradient matches central differences") {
  for (double alpha : {0.0, 0.5}) {
    Agent agent(toy_config(alpha), toy_spec());
    const auto batch = toy_batch(3, 7);
    const Matrix qt = noise(3, 4, 8), qo = noise(3, 4, 9);
    const auto res = agent.critic_loss(batch, qt, qo);
    const Vector theta = flatten(agent.critic().params);
    auto f = [&](const Vector& v) {
      Agent probe = agent;
      unflatten(v, probe.critic().params);
      return probe.critic_loss(batch, qt, qo).loss;
    };
    const Vector fd = oracles::central_difference(f, theta, 1e-6);
    CHECK(oracles::relative_error(flatten(res.grads), fd) <= 1e-5);
  }
}

TEST_CASE("actor objective gradient matches central differences") {
  for (double alpha : {0.0, 0.5}) {
    Agent agent(toy_config(alpha), toy_spec());
    const auto batch = toy_batch(3, 11);
    const Matrix q = noise(3, 4, 12);
    const auto res = agent.actor_objective(batch, q);
    CHECK(res.action_grads.rows() == 3);
    const Vector theta = flatten(agent.actor().params);
    auto f = [&](const Vector& v) {
      Agent probe = agent;
      unflatten(v, probe.actor().params);
      return probe.actor_objective(batch, q).cvar;
    };
    const Vector fd = oracles::central_difference(f, theta, 1e-6);
    CHECK(oracles::relative_error(flatten(res.grads), fd) <= 1e-5);
  }
}

TEST_CASE("noise matrices must match the batch") {
  Agent agent(toy_config(), toy_spec());
  const auto batch = toy_batch(3, 1);
  CHECK_THROWS_AS(agent.critic_loss(batch, noise(2, 4, 1), noise(3, 4, 2)), DimensionError);
  CHECK_THROWS_AS(agent.actor_objective(batch, noise(3, 5, 1)), DimensionError);
  CHECK_THROWS_AS(agent.actor_objective({}, noise(0, 4, 1)), DomainError);
}

TEST_CASE("repeated critic updates reduce the loss on a fixed batch") {
  AgentConfig c = toy_config(0.3);
  c.optimizer = OptimizerKind::adam;
  c.critic_lr = 1e-2;
  Agent agent(c, toy_spec());
  const auto batch = toy_batch(3, 21);
  const Matrix qt = noise(3, 4, 22), qo = noise(3, 4, 23);
  const double before = agent.critic_loss(batch, qt, qo).loss;
  Rng rng(24);
  for (int i = 0; i < 100; ++i) agent.critic_update(batch, rng);
  CHECK(agent.critic_loss(batch, qt, qo).loss < 0.5 * before);
}

TEST_CASE("actor update leaves the critic untouched and the critic update leaves the actor") {
  Agent agent(toy_config(0.5), toy_spec());
  const auto batch = toy_batch(3, 31);
  Rng rng(32);
  const auto critic_before = agent.critic().params;
  const auto actor_before = agent.actor().params;
  agent.actor_update(batch, rng);
  CHECK(agent.critic().params == critic_before);
  CHECK_FALSE(agent.actor().params == actor_before);
  const auto actor_after = agent.actor().params;
  agent.critic_update(batch, rng);
  CHECK(agent.actor().params == actor_after);
  CHECK_FALSE(agent.critic().params == critic_before);
  CHECK(agent.targets().critic_target.params == critic_before);
}

TEST_CASE("actor ascent raises the objective for a small step") {
  AgentConfig c = toy_config(0.25);
  c.actor_lr = 1e-3;
  Agent agent(c, toy_spec());
  const auto batch = toy_batch(3, 41);
  const Matrix q = noise(3, 4, 42);
  const auto before = agent.actor_objective(batch, q);
  auto params = agent.actor().params;
  auto state = OptimizerState::make(OptimizerKind::sgd, params);
  optimizer_step(params, before.grads, state, 1e-3, Direction::ascend);
  agent.actor().params = params;
  CHECK(agent.actor_objective(batch, q).cvar >= before.cvar);
}

TEST_CASE("target sync blends geometrically") {
  AgentConfig c = toy_config();
  c.tau_target = 0.1;
  Agent agent(c, toy_spec());
  const Vector target0 = flatten(agent.targets().critic_target.params);
  Vector online = target0;
  for (Eigen::Index i = 0; i < online.size(); ++i) online[i] += 1.0;
  unflatten(online, agent.critic().params);
  for (int k = 0; k < 5; ++k) CHECK(agent.target_sync());
  const Vector expected = online + std::pow(0.9, 5) * (target0 - online);
  CHECK((flatten(agent.targets().critic_target.params) - expected).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK(agent.learner_steps() == 5);
}

TEST_CASE("target period skips intermediate syncs") {
  AgentConfig c = toy_config();
  c.target_period = 3;
  Agent agent(c, toy_spec());
  std::vector<bool> fired;
  for (int k = 0; k < 6; ++k) fired.push_back(agent.target_sync());
  CHECK(fired == std::vector<bool>{false, false, true, false, false, true});
}

TEST_CASE("updates are reproducible from the seed") {
  const auto batch = toy_batch(3, 51);
  Agent a(toy_config(0.5), toy_spec()), b(toy_config(0.5), toy_spec());
  CHECK(a.actor().params == b.actor().params);
  Rng ra(52), rb(52);
  for (int i = 0; i < 10; ++i) {
    CHECK(a.critic_update(batch, ra) == b.critic_update(batch, rb));
    CHECK(a.actor_update(batch, ra) == b.actor_update(batch, rb));
    a.target_sync();
    b.target_sync();
  }
  CHECK(a.critic().params == b.critic().params);
  CHECK(a.targets().actor_target.params == b.targets().actor_target.params);
}

TEST_CASE("different seeds initialise different networks") {
  AgentConfig c1 = toy_config(), c2 = toy_config();
  c2.seed = 5;
  Agent a(c1, toy_spec()), b(c2, toy_spec());
  CHECK_FALSE(a.actor().params == b.actor().params);
  CHECK_FALSE(a.critic().params == b.critic().params);
}
