#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "riskdpg/agent.hpp"
#include "riskdpg/envsim.hpp"
#include "riskdpg/replay.hpp"

namespace riskdpg {

struct RunConfig {
  AgentConfig agent;
  std::string env = "pendulum";
  std::int64_t total_env_steps = 100'000;
  std::int64_t eval_period = 5'000;
  int eval_episodes = 100;
  std::vector<double> noise_scales{0.0, 0.5, 1.0, 1.5};
  std::vector<std::uint64_t> seeds{0};
  std::filesystem::path output_dir = "out";
  bool discounted_returns = false;

  void validate() const;
};

/// Flat `key=value` text; '#' starts a comment. Absent keys keep defaults.
RunConfig parse_config(const std::string& text);
RunConfig read_config(const std::filesystem::path& path);
/// Inverse of parse_config: every key, one per line, fixed order.
std::string format_config(const RunConfig& config);

struct CdfPoint {
  double value = 0.0;
  double prob = 0.0;
};

/// Sorted distinct values with prob = #(returns <= value) / N.
std::vector<CdfPoint> empirical_cdf(const std::vector<double>& returns);

struct ScaleReport {
  double scale = 0.0;
  double mean = 0.0;
  double std = 0.0;  // population standard deviation
  double min = 0.0;
  double max = 0.0;
  std::vector<double> returns;  // one per episode, episode-index order
  std::vector<CdfPoint> cdf;
};

struct EvalReport {
  std::vector<ScaleReport> scales;
};

/// Fills mean/std/min/max/cdf from `returns`.
ScaleReport summarize(double scale, std::vector<double> returns);

/// Runs `episodes` noiseless-policy episodes per scale with every action
/// disturbed at that scale. Episode e uses the same reset stream at every
/// scale, so scales are compared on identical initial states.
EvalReport evaluate(const ActorNet& actor, const Environment& env,
                    const std::vector<double>& noise_scales, int episodes, std::uint64_t seed,
                    double discount = 1.0);

/// Same as evaluate() for an arbitrary deterministic policy.
EvalReport evaluate_policy(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& policy,
                           const Environment& env, const std::vector<double>& noise_scales,
                           int episodes, std::uint64_t seed, double discount = 1.0);

struct MetricsRow {
  std::int64_t step = 0;
  double critic_loss = 0.0;  // mean over learner steps since the previous row; NaN if none
  double actor_cvar = 0.0;
  std::vector<double> eval_means;  // one per noise scale
};

struct TrainResult {
  Agent agent;
  std::uint64_t seed = 0;
  std::int64_t learner_updates = 0;
  std::vector<double> critic_losses;  // one per learner step
  std::vector<double> actor_cvars;
  std::vector<MetricsRow> metrics;
  EvalReport final_report;
};

/// Interleaved loop: one exploratory env step, push, then (once the pool holds
/// a batch) one critic update, one actor update and one target sync.
/// Evaluates every eval_period steps and at the end. On divergence the agent
/// is checkpointed under `<output_dir>/seed_<seed>/diverged` (if output_dir is
/// non-empty) and DivergenceError is rethrown with the step number.
TrainResult train(const RunConfig& config, std::uint64_t seed);

struct SeedReport {
  std::uint64_t seed = 0;
  EvalReport report;
  std::vector<MetricsRow> metrics;
};

/// Writes metrics.csv, summary.csv and one cdf_<scale>.csv per scale (pooled
/// over seeds). Existing files are overwritten.
void write_reports(const std::vector<SeedReport>& runs, const std::vector<double>& noise_scales,
                   const std::filesystem::path& dir);

/// File label for a noise scale, e.g. 0.5 -> "0.5", 1.0 -> "1".
std::string scale_label(double scale);

/// actor.ckpt, critic.ckpt, actor_target.ckpt, critic_target.ckpt,
/// config.txt and state_norm.txt when normalization is enabled.
void save_checkpoint(const Agent& agent, const RunConfig& config, const std::filesystem::path& dir);

/// Loads an actor from a checkpoint directory or a single actor file.
ActorNet load_actor(const std::filesystem::path& path, const EnvSpec& env);

}  // namespace riskdpg
