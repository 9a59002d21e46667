#pragma once

#include <memory>
#include <string_view>

#include <Eigen/Dense>

#include "riskdpg/rng.hpp"

namespace riskdpg {

struct EnvSpec {
  Eigen::Index state_dim = 1;
  Eigen::Index action_dim = 1;
  Eigen::VectorXd a_max;  // per-dimension action bound
  int max_steps = 1;
};

struct StepResult {
  Eigen::VectorXd x_next;
  double r = 0.0;
  /// Episode over: absorbing event or the max_steps cap.
  bool terminal = false;
  /// True when the episode ended only because of the step cap; the state is
  /// not absorbing and bootstrapping from x_next remains valid.
  bool truncated = false;
};

/// Episodic environment. An instance tracks the elapsed step count of the
/// current episode; dynamics are a pure function of (state, action, rng).
class Environment {
 public:
  virtual ~Environment() = default;

  virtual const EnvSpec& spec() const = 0;
  virtual std::string_view name() const = 0;

  Eigen::VectorXd reset(Rng& rng);
  /// Actions outside [-a_max, a_max] are clipped and counted.
  StepResult step(const Eigen::VectorXd& state, const Eigen::VectorXd& action, Rng& rng);

  int elapsed() const { return elapsed_; }
  long clipped_actions() const { return clipped_; }

  virtual std::unique_ptr<Environment> clone() const = 0;

 protected:
  virtual Eigen::VectorXd do_reset(Rng& rng) = 0;
  /// Must set x_next, r and terminal for absorbing events.
  virtual StepResult do_step(const Eigen::VectorXd& state, const Eigen::VectorXd& action,
                             Rng& rng) = 0;

 private:
  int elapsed_ = 0;
  long clipped_ = 0;
};

/// Single-state, one-step task whose high-mean action carries a tail risk.
///
/// Action a in [-1, 1]; reward a, except with probability
/// p(a) = p_max * (a + 1) / 2 the reward is a - C. One uniform variate is
/// drawn per step from the env stream. With C = 4 and p_max = 0.2 the mean
/// 0.6a - 0.4 peaks at a = +1 while CVaR at level 0.9 peaks at a = -1.
class OneStepRisky final : public Environment {
 public:
  static constexpr double kCatastrophe = 4.0;
  static constexpr double kMaxProbability = 0.2;

  OneStepRisky();
  const EnvSpec& spec() const override { return spec_; }
  std::string_view name() const override { return "one_step_risky"; }
  std::unique_ptr<Environment> clone() const override;

  static double catastrophe_probability(double a);
  static double mean_reward(double a);
  /// Closed-form lower-tail CVaR of the reward at level alpha (tail mass 1 - alpha).
  static double cvar_reward(double a, double alpha);

 protected:
  Eigen::VectorXd do_reset(Rng& rng) override;
  StepResult do_step(const Eigen::VectorXd& state, const Eigen::VectorXd& action,
                     Rng& rng) override;

 private:
  EnvSpec spec_;
};

/// Torque-limited pendulum swing-up.
///
/// State (cos th, sin th, thdot) with th = 0 upright. Semi-implicit Euler:
///   thdot' = clamp(thdot + (3g/(2l) sin th + 3/(m l^2) u) dt, -8, 8)
///   th'    = th + thdot' dt
/// Reward -(wrap(th)^2 + 0.1 thdot^2 + 0.001 u^2) on the pre-step state.
/// Resets draw th ~ U[-pi, pi], thdot ~ U[-1, 1]. 200-step episodes.
class Pendulum final : public Environment {
 public:
  static constexpr double kMaxSpeed = 8.0;
  static constexpr double kMaxTorque = 2.0;
  static constexpr double kDt = 0.05;
  static constexpr double kGravity = 10.0;
  static constexpr double kMass = 1.0;
  static constexpr double kLength = 1.0;

  Pendulum();
  const EnvSpec& spec() const override { return spec_; }
  std::string_view name() const override { return "pendulum"; }
  std::unique_ptr<Environment> clone() const override;

  static Eigen::VectorXd make_state(double theta, double theta_dot);
  static double wrap_angle(double theta);

 protected:
  Eigen::VectorXd do_reset(Rng& rng) override;
  StepResult do_step(const Eigen::VectorXd& state, const Eigen::VectorXd& action,
                     Rng& rng) override;

 private:
  EnvSpec spec_;
};

/// "one_step_risky" | "pendulum"; throws DomainError otherwise.
std::unique_ptr<Environment> make_environment(std::string_view name);

/// a + eps, eps ~ N(0, (scale * a_max)^2) per dimension, clipped to bounds.
/// `scale` is a standard-deviation multiplier.
Eigen::VectorXd disturb_action(const Eigen::VectorXd& a, double scale,
                               const Eigen::VectorXd& a_max, Rng& rng);

Eigen::VectorXd clip_action(const Eigen::VectorXd& a, const Eigen::VectorXd& a_max);

}  // namespace riskdpg
