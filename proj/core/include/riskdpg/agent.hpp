#pragma once

// Risk-averse sample-based distributional actor-critic.
//
// The critic G(q | x, a) maps a state-action pair plus one standard-normal
// scalar q to a return atom; n atoms come from n noise draws evaluated as one
// batched forward pass. The critic is regressed onto distributional Bellman
// targets built from the target networks with the quantile Huber loss. The
// actor ascends the CVaR of the online critic's atoms, backpropagating the
// tail-selection weights through the critic into the action and from there
// through the actor.

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "riskdpg/envsim.hpp"
#include "riskdpg/gradnet.hpp"
#include "riskdpg/replay.hpp"
#include "riskdpg/retdist.hpp"
#include "riskdpg/rng.hpp"

namespace riskdpg {

struct AgentConfig {
  double alpha = 0.0;        // CVaR level; 0 is risk neutral
  double gamma = 0.99;
  int n_atoms = 51;
  int batch_size = 256;
  double critic_lr = 1e-4;   // beta1
  double actor_lr = 1e-4;    // beta2
  double delta = 0.3;        // exploration noise std, in units of the action
  double zeta = 1.0;         // Huber threshold
  double tau_target = 0.005;
  int target_period = 1;
  OptimizerKind optimizer = OptimizerKind::adam;
  std::vector<int> actor_hidden{400, 300};
  std::vector<int> critic_hidden{400, 300};
  double grad_clip = 10.0;   // global-norm cap; <= 0 disables
  bool normalize_inputs = false;
  double reward_scale = 1.0; // multiplies rewards inside the Bellman target
  std::size_t replay_capacity = 1'000'000;
  std::uint64_t seed = 0;

  /// Throws DomainError / LevelError on invalid combinations.
  void validate() const;
};

/// Deterministic policy: a = a_max * tanh(net(x)).
struct ActorNet {
  NetworkParams params;
  Eigen::VectorXd a_max;
  std::optional<RunningNormalizer> state_norm;

  Eigen::Index state_dim() const { return params.in_dim(); }
  Eigen::Index action_dim() const { return params.out_dim(); }

  Matrix input_rows(const Matrix& states) const;
  Matrix act_batch(const Matrix& states) const;
  Eigen::VectorXd act(const Eigen::VectorXd& state) const;
};

/// Atom generator: input [x || a || q] -> scalar.
struct CriticNet {
  NetworkParams params;
  Eigen::Index state_dim = 0;
  Eigen::Index action_dim = 0;
  std::optional<RunningNormalizer> state_norm;

  /// Row i*n + j holds [x_i, a_i, noise(i, j)].
  Matrix input_rows(const Matrix& states, const Matrix& actions, const Matrix& noise) const;
};

struct TargetPair {
  ActorNet actor_target;
  CriticNet critic_target;
};

ActorNet make_actor(const EnvSpec& env, std::span<const int> hidden, std::uint64_t seed);
CriticNet make_critic(const EnvSpec& env, std::span<const int> hidden, std::uint64_t seed);

/// n atoms G(noise_j | x, a), unsorted, in noise order.
ReturnSamples critic_generate(const CriticNet& critic, const Eigen::VectorXd& x,
                              const Eigen::VectorXd& a, std::span<const double> noise);

/// pi(x) + delta * N(0, 1) per dimension, clipped to the action bounds.
Eigen::VectorXd select_action(const ActorNet& actor, const Eigen::VectorXd& x, double delta,
                              Rng& rng);

struct CriticLoss {
  double loss = 0.0;
  ParamGrads grads;  // d loss / d critic params
};

struct ActorObjective {
  double cvar = 0.0;        // batch mean of the per-transition CVaR estimate
  ParamGrads grads;         // d objective / d actor params
  Matrix action_grads;      // [M x action_dim], d objective / d a at a = pi(x)
};

class Agent {
 public:
  Agent(AgentConfig config, EnvSpec env);

  const AgentConfig& config() const { return config_; }
  const EnvSpec& env_spec() const { return env_; }
  const QuantileGrid& grid() const { return grid_; }

  const ActorNet& actor() const { return actor_; }
  const CriticNet& critic() const { return critic_; }
  const TargetPair& targets() const { return targets_; }
  ActorNet& actor() { return actor_; }
  CriticNet& critic() { return critic_; }
  TargetPair& targets() { return targets_; }

  std::int64_t learner_steps() const { return learner_steps_; }

  /// Batch critic loss and its gradient for explicit noise matrices
  /// ([M x n] each). Pure: parameters are not touched.
  CriticLoss critic_loss(std::span<const Transition> batch, const Matrix& target_noise,
                         const Matrix& online_noise) const;

  /// Batch CVaR objective and its actor gradient for an explicit [M x n]
  /// noise matrix, using the online critic.
  ActorObjective actor_objective(std::span<const Transition> batch, const Matrix& noise) const;

  /// Draws target noise then online noise (each M x n, row-major) and takes
  /// one descent step on the critic. Returns the batch-mean loss.
  double critic_update(std::span<const Transition> batch, Rng& rng);

  /// Draws an M x n noise matrix and takes one ascent step on the actor.
  /// Critic parameters are left untouched. Returns the batch-mean CVaR.
  double actor_update(std::span<const Transition> batch, Rng& rng);

  /// Counts one learner step and blends the targets toward the online
  /// networks every target_period steps. Returns true if a blend happened.
  bool target_sync();

  Eigen::VectorXd select_action(const Eigen::VectorXd& x, double delta, Rng& rng) const;

  /// Feeds the running state normalizer when enabled.
  void observe_state(const Eigen::VectorXd& x);

 private:
  Matrix draw_noise(std::size_t rows, Rng& rng) const;

  // Reused buffers; an Agent must not be used from two threads at once.
  struct Workspace {
    ForwardCache critic;
    ForwardCache actor;
    ForwardCache target_actor;
    ForwardCache target_critic;
    GradBundle critic_grads;
    GradBundle actor_grads;
    Matrix dz;
  };
  mutable Workspace ws_;

  AgentConfig config_;
  EnvSpec env_;
  QuantileGrid grid_;
  ActorNet actor_;
  CriticNet critic_;
  TargetPair targets_;
  OptimizerState actor_opt_;
  OptimizerState critic_opt_;
  std::optional<RunningNormalizer> state_norm_;
  std::int64_t learner_steps_ = 0;
};

}  // namespace riskdpg
