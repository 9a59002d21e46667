#include "riskdpg/agent.hpp"

#include <cmath>
#include <string>

#include "riskdpg/errors.hpp"

namespace riskdpg {

void AgentConfig::validate() const {
  if (!(alpha >= 0.0 && alpha < 1.0)) throw DomainError("alpha must lie in [0, 1)");
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw DomainError("gamma must lie in [0, 1]");
  if (n_atoms < 1) throw DomainError("n_atoms must be >= 1");
  if (batch_size < 1) throw DomainError("batch_size must be >= 1");
  if (!(critic_lr > 0.0) || !(actor_lr > 0.0)) throw DomainError("learning rates must be positive");
  if (!(delta >= 0.0)) throw DomainError("delta must be >= 0");
  if (!(zeta >= 0.0)) throw DomainError("zeta must be >= 0");
  if (!(tau_target > 0.0 && tau_target <= 1.0)) throw DomainError("tau_target must lie in (0, 1]");
  if (target_period < 1) throw DomainError("target_period must be >= 1");
  if (replay_capacity < 1) throw DomainError("replay_capacity must be >= 1");
  if (!(reward_scale > 0.0) || !std::isfinite(reward_scale))
    throw DomainError("reward_scale must be positive");
  for (int h : actor_hidden)
    if (h < 1) throw DomainError("hidden sizes must be positive");
  for (int h : critic_hidden)
    if (h < 1) throw DomainError("hidden sizes must be positive");
  tail_count(static_cast<std::size_t>(n_atoms), alpha);
}

// --- networks ---------------------------------------------------------------

Matrix ActorNet::input_rows(const Matrix& states) const {
  if (!state_norm) return states;
  Matrix rows = states;
  state_norm->apply_rows(rows);
  return rows;
}

Matrix ActorNet::act_batch(const Matrix& states) const {
  Matrix out = predict(params, input_rows(states));
  out.array().rowwise() *= a_max.transpose().array();
  return out;
}

Eigen::VectorXd ActorNet::act(const Eigen::VectorXd& state) const {
  if (state.size() != state_dim()) throw DimensionError("state dimension mismatch");
  return act_batch(state.transpose()).row(0).transpose();
}

Matrix CriticNet::input_rows(const Matrix& states, const Matrix& actions,
                             const Matrix& noise) const {
  const Eigen::Index m = states.rows();
  const Eigen::Index n = noise.cols();
  if (states.cols() != state_dim || actions.cols() != action_dim)
    throw DimensionError("critic state/action width mismatch");
  if (actions.rows() != m || noise.rows() != m)
    throw DimensionError("critic batch sizes disagree");
  Matrix rows(m * n, state_dim + action_dim + 1);
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      const Eigen::Index r = i * n + j;
      rows.block(r, 0, 1, state_dim) = states.row(i);
      rows.block(r, state_dim, 1, action_dim) = actions.row(i);
      rows(r, state_dim + action_dim) = noise(i, j);
    }
  }
  if (state_norm) state_norm->apply_rows(rows, 0);
  return rows;
}

namespace {

std::uint64_t derive_seed(std::uint64_t seed, std::string_view role) {
  return splitmix64(seed ^ fnv1a64(role));
}

std::vector<int> layer_sizes(Eigen::Index in, std::span<const int> hidden, Eigen::Index out) {
  std::vector<int> sizes;
  sizes.push_back(static_cast<int>(in));
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(static_cast<int>(out));
  return sizes;
}

}  // namespace

ActorNet make_actor(const EnvSpec& env, std::span<const int> hidden, std::uint64_t seed) {
  const auto sizes = layer_sizes(env.state_dim, hidden, env.action_dim);
  std::vector<Activation> acts(sizes.size() - 1, Activation::relu);
  acts.back() = Activation::tanh;
  ActorNet actor;
  actor.params = mlp_init(sizes, acts, seed);
  actor.a_max = env.a_max;
  return actor;
}

CriticNet make_critic(const EnvSpec& env, std::span<const int> hidden, std::uint64_t seed) {
  const auto sizes = layer_sizes(env.state_dim + env.action_dim + 1, hidden, 1);
  std::vector<Activation> acts(sizes.size() - 1, Activation::relu);
  acts.back() = Activation::linear;
  CriticNet critic;
  critic.params = mlp_init(sizes, acts, seed);
  critic.state_dim = env.state_dim;
  critic.action_dim = env.action_dim;
  return critic;
}

ReturnSamples critic_generate(const CriticNet& critic, const Eigen::VectorXd& x,
                              const Eigen::VectorXd& a, std::span<const double> noise) {
  if (noise.empty()) throw DimensionError("need at least one noise value");
  Matrix q(1, static_cast<Eigen::Index>(noise.size()));
  for (std::size_t j = 0; j < noise.size(); ++j) q(0, static_cast<Eigen::Index>(j)) = noise[j];
  const Matrix z = predict(critic.params, critic.input_rows(x.transpose(), a.transpose(), q));
  ReturnSamples out;
  out.atoms.assign(z.data(), z.data() + z.size());
  return out;
}

Eigen::VectorXd select_action(const ActorNet& actor, const Eigen::VectorXd& x, double delta,
                              Rng& rng) {
  if (!(delta >= 0.0)) throw DomainError("delta must be >= 0");
  Eigen::VectorXd a = actor.act(x);
  if (delta == 0.0) return a;
  for (Eigen::Index i = 0; i < a.size(); ++i) a[i] += delta * rng.normal();
  return clip_action(a, actor.a_max);
}

// --- agent ----------------------------------------------------------------------

Agent::Agent(AgentConfig config, EnvSpec env) : config_(std::move(config)), env_(std::move(env)) {
  config_.validate();
  if (env_.a_max.size() != env_.action_dim) throw DimensionError("a_max length != action_dim");
  grid_ = quantile_grid(static_cast<std::size_t>(config_.n_atoms));
  actor_ = make_actor(env_, config_.actor_hidden, derive_seed(config_.seed, "actor"));
  critic_ = make_critic(env_, config_.critic_hidden, derive_seed(config_.seed, "critic"));
  targets_.actor_target = actor_;
  targets_.critic_target = critic_;
  actor_opt_ = OptimizerState::make(config_.optimizer, actor_.params);
  critic_opt_ = OptimizerState::make(config_.optimizer, critic_.params);
  if (config_.normalize_inputs) state_norm_.emplace(env_.state_dim);
}

void Agent::observe_state(const Eigen::VectorXd& x) {
  if (!state_norm_) return;
  state_norm_->update(x);
  actor_.state_norm = *state_norm_;
  critic_.state_norm = *state_norm_;
  targets_.actor_target.state_norm = *state_norm_;
  targets_.critic_target.state_norm = *state_norm_;
}

Matrix Agent::draw_noise(std::size_t rows, Rng& rng) const {
  Matrix q(static_cast<Eigen::Index>(rows), config_.n_atoms);
  for (Eigen::Index i = 0; i < q.rows(); ++i)
    for (Eigen::Index j = 0; j < q.cols(); ++j) q(i, j) = rng.normal();
  return q;
}

namespace {

struct BatchMatrices {
  Matrix x, a, x_next;
};

BatchMatrices stack(std::span<const Transition> batch, Eigen::Index sd, Eigen::Index ad) {
  const auto m = static_cast<Eigen::Index>(batch.size());
  BatchMatrices b{Matrix(m, sd), Matrix(m, ad), Matrix(m, sd)};
  for (Eigen::Index i = 0; i < m; ++i) {
    const auto& t = batch[static_cast<std::size_t>(i)];
    if (t.x.size() != sd || t.x_next.size() != sd || t.a.size() != ad)
      throw DimensionError("transition dimensions do not match the agent");
    b.x.row(i) = t.x.transpose();
    b.a.row(i) = t.a.transpose();
    b.x_next.row(i) = t.x_next.transpose();
  }
  return b;
}

}  // namespace

CriticLoss Agent::critic_loss(std::span<const Transition> batch, const Matrix& target_noise,
                              const Matrix& online_noise) const {
  if (batch.empty()) throw DomainError("empty batch");
  const auto m = static_cast<Eigen::Index>(batch.size());
  const Eigen::Index n = config_.n_atoms;
  if (target_noise.rows() != m || online_noise.rows() != m || online_noise.cols() != n ||
      target_noise.cols() < 1)
    throw DimensionError("noise matrices must be [M x n]");

  const auto b = stack(batch, env_.state_dim, env_.action_dim);

  // Bellman targets from the target pair.
  const Eigen::Index nt = target_noise.cols();
  Matrix next_actions = forward_into(targets_.actor_target.params,
                                     targets_.actor_target.input_rows(b.x_next), ws_.target_actor);
  next_actions.array().rowwise() *= targets_.actor_target.a_max.transpose().array();
  const Matrix& next_atoms =
      forward_into(targets_.critic_target.params,
                   targets_.critic_target.input_rows(b.x_next, next_actions, target_noise),
                   ws_.target_critic);
  // Online atoms.
  const Matrix& online_atoms =
      forward_into(critic_.params, critic_.input_rows(b.x, b.a, online_noise), ws_.critic);

  const double inv_m = 1.0 / static_cast<double>(m);
  Matrix& dz = ws_.dz;
  dz.setZero(m * n, 1);
  double loss = 0.0;
  ReturnSamples next, pred;
  next.atoms.resize(static_cast<std::size_t>(nt));
  pred.atoms.resize(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < m; ++i) {
    const auto& t = batch[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < nt; ++j) next.atoms[j] = next_atoms(i * nt + j, 0);
    const auto target = bellman_target(t.r * config_.reward_scale, config_.gamma, next, t.terminal);
    for (Eigen::Index j = 0; j < n; ++j) pred.atoms[j] = online_atoms(i * n + j, 0);
    const auto s = sort_with_permutation(pred);
    const auto qh = quantile_huber_loss(s.sorted, target, grid_, config_.zeta);
    loss += qh.loss * inv_m;
    for (Eigen::Index j = 0; j < n; ++j)
      dz(i * n + static_cast<Eigen::Index>(s.perm[j]), 0) = qh.grad_pred[j] * inv_m;
  }
  if (!std::isfinite(loss)) throw DivergenceError("critic loss is not finite");
  CriticLoss out;
  out.loss = loss;
  backward_into(critic_.params, ws_.critic, dz, ws_.critic_grads);
  out.grads = ws_.critic_grads.params;
  return out;
}

ActorObjective Agent::actor_objective(std::span<const Transition> batch, const Matrix& noise) const {
  if (batch.empty()) throw DomainError("empty batch");
  const auto m = static_cast<Eigen::Index>(batch.size());
  const Eigen::Index n = config_.n_atoms;
  if (noise.rows() != m || noise.cols() != n) throw DimensionError("noise matrix must be [M x n]");
  const Eigen::Index sd = env_.state_dim;
  const Eigen::Index ad = env_.action_dim;

  const auto b = stack(batch, sd, ad);
  Matrix actions = forward_into(actor_.params, actor_.input_rows(b.x), ws_.actor);
  actions.array().rowwise() *= actor_.a_max.transpose().array();

  const Matrix& atom_out =
      forward_into(critic_.params, critic_.input_rows(b.x, actions, noise), ws_.critic);

  const double inv_m = 1.0 / static_cast<double>(m);
  Matrix& dz = ws_.dz;
  dz.resize(m * n, 1);
  double objective = 0.0;
  ReturnSamples atoms;
  atoms.atoms.resize(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) atoms.atoms[j] = atom_out(i * n + j, 0);
    const auto w = cvar_subgradient(atoms, config_.alpha);
    objective += cvar_estimate(atoms, config_.alpha).cvar * inv_m;
    for (Eigen::Index j = 0; j < n; ++j) dz(i * n + j, 0) = w[j] * inv_m;
  }
  if (!std::isfinite(objective)) throw DivergenceError("actor objective is not finite");

  backward_into(critic_.params, ws_.critic, dz, ws_.critic_grads, false);
  const Matrix& d_rows = ws_.critic_grads.input;
  ActorObjective out;
  out.cvar = objective;
  out.action_grads = Matrix::Zero(m, ad);
  for (Eigen::Index i = 0; i < m; ++i)
    out.action_grads.row(i) = d_rows.block(i * n, sd, n, ad).colwise().sum();
  Matrix d_tanh = out.action_grads;
  d_tanh.array().rowwise() *= actor_.a_max.transpose().array();
  backward_into(actor_.params, ws_.actor, d_tanh, ws_.actor_grads);
  out.grads = ws_.actor_grads.params;
  return out;
}

double Agent::critic_update(std::span<const Transition> batch, Rng& rng) {
  const Matrix target_noise = draw_noise(batch.size(), rng);
  const Matrix online_noise = draw_noise(batch.size(), rng);
  auto res = critic_loss(batch, target_noise, online_noise);
  if (config_.grad_clip > 0.0) clip_global_norm(res.grads, config_.grad_clip);
  optimizer_step(critic_.params, res.grads, critic_opt_, config_.critic_lr, Direction::descend);
  return res.loss;
}

double Agent::actor_update(std::span<const Transition> batch, Rng& rng) {
  const Matrix noise = draw_noise(batch.size(), rng);
  auto res = actor_objective(batch, noise);
  if (config_.grad_clip > 0.0) clip_global_norm(res.grads, config_.grad_clip);
  optimizer_step(actor_.params, res.grads, actor_opt_, config_.actor_lr, Direction::ascend);
  return res.cvar;
}

bool Agent::target_sync() {
  ++learner_steps_;
  if (learner_steps_ % config_.target_period != 0) return false;
  polyak_update_inplace(targets_.actor_target.params, actor_.params, config_.tau_target);
  polyak_update_inplace(targets_.critic_target.params, critic_.params, config_.tau_target);
  return true;
}

Eigen::VectorXd Agent::select_action(const Eigen::VectorXd& x, double delta, Rng& rng) const {
  return riskdpg::select_action(actor_, x, delta, rng);
}

}  // namespace riskdpg
