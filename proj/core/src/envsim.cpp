#include "riskdpg/envsim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "riskdpg/errors.hpp"

namespace riskdpg {

Eigen::VectorXd clip_action(const Eigen::VectorXd& a, const Eigen::VectorXd& a_max) {
  if (a.size() != a_max.size()) throw DimensionError("action dimension mismatch");
  return a.cwiseMax(-a_max).cwiseMin(a_max);
}

Eigen::VectorXd Environment::reset(Rng& rng) {
  elapsed_ = 0;
  return do_reset(rng);
}

StepResult Environment::step(const Eigen::VectorXd& state, const Eigen::VectorXd& action, Rng& rng) {
  const auto& s = spec();
  if (state.size() != s.state_dim) throw DimensionError("state dimension mismatch");
  if (action.size() != s.action_dim) throw DimensionError("action dimension mismatch");
  Eigen::VectorXd a = clip_action(action, s.a_max);
  if (a != action) ++clipped_;
  StepResult res = do_step(state, a, rng);
  ++elapsed_;
  if (!res.terminal && elapsed_ >= s.max_steps) {
    res.terminal = true;
    res.truncated = true;
  }
  return res;
}

// --- OneStepRisky -------------------------------------------------------------

OneStepRisky::OneStepRisky() {
  spec_.state_dim = 1;
  spec_.action_dim = 1;
  spec_.a_max = Eigen::VectorXd::Ones(1);
  spec_.max_steps = 1;
}

std::unique_ptr<Environment> OneStepRisky::clone() const {
  return std::make_unique<OneStepRisky>(*this);
}

double OneStepRisky::catastrophe_probability(double a) {
  return kMaxProbability * (a + 1.0) / 2.0;
}

double OneStepRisky::mean_reward(double a) { return a - kCatastrophe * catastrophe_probability(a); }

double OneStepRisky::cvar_reward(double a, double alpha) {
  const double tail = 1.0 - alpha;
  const double p = catastrophe_probability(a);
  if (p >= tail) return a - kCatastrophe;
  return (p * (a - kCatastrophe) + (tail - p) * a) / tail;
}

Eigen::VectorXd OneStepRisky::do_reset(Rng&) { return Eigen::VectorXd::Zero(1); }

StepResult OneStepRisky::do_step(const Eigen::VectorXd&, const Eigen::VectorXd& action, Rng& rng) {
  const double a = action[0];
  const double u = rng.uniform();
  StepResult res;
  res.x_next = Eigen::VectorXd::Zero(1);
  res.r = u < catastrophe_probability(a) ? a - kCatastrophe : a;
  res.terminal = true;
  return res;
}

// --- Pendulum -------------------------------------------------------------------

Pendulum::Pendulum() {
  spec_.state_dim = 3;
  spec_.action_dim = 1;
  spec_.a_max = Eigen::VectorXd::Constant(1, kMaxTorque);
  spec_.max_steps = 200;
}

std::unique_ptr<Environment> Pendulum::clone() const { return std::make_unique<Pendulum>(*this); }

Eigen::VectorXd Pendulum::make_state(double theta, double theta_dot) {
  Eigen::VectorXd s(3);
  s << std::cos(theta), std::sin(theta), theta_dot;
  return s;
}

double Pendulum::wrap_angle(double theta) {
  constexpr double pi = std::numbers::pi;
  double w = std::fmod(theta + pi, 2.0 * pi);
  if (w < 0.0) w += 2.0 * pi;
  return w - pi;
}

Eigen::VectorXd Pendulum::do_reset(Rng& rng) {
  const double theta = std::numbers::pi * (2.0 * rng.uniform() - 1.0);
  const double theta_dot = 2.0 * rng.uniform() - 1.0;
  return make_state(theta, theta_dot);
}

StepResult Pendulum::do_step(const Eigen::VectorXd& state, const Eigen::VectorXd& action, Rng&) {
  const double theta = std::atan2(state[1], state[0]);
  const double theta_dot = state[2];
  const double u = action[0];
  const double th = wrap_angle(theta);

  StepResult res;
  res.r = -(th * th + 0.1 * theta_dot * theta_dot + 0.001 * u * u);
  const double accel =
      3.0 * kGravity / (2.0 * kLength) * std::sin(theta) + 3.0 / (kMass * kLength * kLength) * u;
  const double new_dot = std::clamp(theta_dot + accel * kDt, -kMaxSpeed, kMaxSpeed);
  res.x_next = make_state(theta + new_dot * kDt, new_dot);
  return res;
}

std::unique_ptr<Environment> make_environment(std::string_view name) {
  if (name == "one_step_risky") return std::make_unique<OneStepRisky>();
  if (name == "pendulum") return std::make_unique<Pendulum>();
  throw DomainError("unknown environment '" + std::string(name) + "'");
}

Eigen::VectorXd disturb_action(const Eigen::VectorXd& a, double scale,
                               const Eigen::VectorXd& a_max, Rng& rng) {
  if (!(scale >= 0.0)) throw DomainError("disturbance scale must be >= 0");
  if (scale == 0.0) return a;
  Eigen::VectorXd out = a;
  for (Eigen::Index i = 0; i < out.size(); ++i) out[i] += scale * a_max[i] * rng.normal();
  return clip_action(out, a_max);
}

}  // namespace riskdpg
