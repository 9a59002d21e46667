// riskdpg: train, evaluate and self-check risk-averse distributional agents.
//
//   riskdpg train --config <path> [--seed N] [--out DIR]
//   riskdpg eval --checkpoint <path> --env <name> --noise-scales 0,0.5,1.0,1.5 --episodes K
//   riskdpg selftest

#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include <riskdpg/errors.hpp>
#include <riskdpg/harness.hpp>

#include "criteria.hpp"

namespace {

using namespace riskdpg;

int run_train(const std::string& config_path, const std::vector<std::uint64_t>& seed_override,
              const std::string& out_override) {
  RunConfig cfg = read_config(config_path);
  if (!seed_override.empty()) cfg.seeds = seed_override;
  if (!out_override.empty()) cfg.output_dir = out_override;
  if (cfg.output_dir.empty()) cfg.output_dir = "out";

  std::vector<SeedReport> runs;
  for (std::uint64_t seed : cfg.seeds) {
    std::cerr << "training " << cfg.env << " alpha=" << cfg.agent.alpha << " seed=" << seed
              << " for " << cfg.total_env_steps << " steps\n";
    TrainResult res = train(cfg, seed);
    save_checkpoint(res.agent, cfg, cfg.output_dir / ("seed_" + std::to_string(seed)));
    for (const auto& s : res.final_report.scales)
      std::cerr << "  scale " << scale_label(s.scale) << ": mean " << s.mean << " std " << s.std
                << '\n';
    runs.push_back(SeedReport{seed, std::move(res.final_report), std::move(res.metrics)});
  }
  write_reports(runs, cfg.noise_scales, cfg.output_dir);
  std::cerr << "reports written to " << cfg.output_dir.string() << '\n';
  return 0;
}

int run_eval(const std::string& checkpoint, const std::string& env_name,
             const std::vector<double>& scales, int episodes, std::uint64_t seed,
             const std::string& out, bool discounted, double gamma) {
  const auto env = make_environment(env_name);
  const ActorNet actor = load_actor(checkpoint, env->spec());
  const EvalReport report =
      evaluate(actor, *env, scales, episodes, seed, discounted ? gamma : 1.0);
  std::cout << "scale,mean,std,min,max\n";
  for (const auto& s : report.scales)
    std::cout << scale_label(s.scale) << ',' << s.mean << ',' << s.std << ',' << s.min << ','
              << s.max << '\n';
  if (!out.empty()) write_reports({SeedReport{seed, report, {}}}, scales, out);
  return 0;
}

int run_selftest() {
  using namespace riskdpg::acceptance;
  const CriterionResult results[] = {gradient_fidelity(25), cvar_oracle_equivalence(1000),
                                     alpha_zero_reduction(50), quantile_recovery(), hygiene()};
  bool ok = true;
  for (const auto& r : results) {
    std::cout << format_line(r) << '\n';
    ok = ok && r.passed;
  }
  std::cout << (ok ? "selftest passed\n" : "selftest FAILED\n");
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Risk-averse sample-based distributional actor-critic"};
  app.require_subcommand(1);

  std::string config_path, out_dir;
  std::vector<std::uint64_t> seeds;
  auto* train_cmd = app.add_subcommand("train", "Train agents and write reports");
  train_cmd->add_option("--config", config_path, "key=value configuration file")
      ->required()
      ->check(CLI::ExistingFile);
  train_cmd->add_option("--seed", seeds, "Seed(s), overriding the config")->delimiter(',');
  train_cmd->add_option("--out", out_dir, "Output directory, overriding the config");

  std::string checkpoint, env_name, eval_out;
  std::vector<double> scales{0.0, 0.5, 1.0, 1.5};
  int episodes = 100;
  std::uint64_t eval_seed = 0;
  bool discounted = false;
  double gamma = 0.99;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpointed actor under disturbances");
  eval_cmd->add_option("--checkpoint", checkpoint, "Checkpoint directory or actor.ckpt")
      ->required()
      ->check(CLI::ExistingPath);
  eval_cmd->add_option("--env", env_name, "one_step_risky | pendulum")
      ->required()
      ->check(CLI::IsMember({"one_step_risky", "pendulum"}));
  eval_cmd->add_option("--noise-scales", scales, "Disturbance std as a fraction of a_max")
      ->delimiter(',');
  eval_cmd->add_option("--episodes", episodes, "Episodes per scale")->check(CLI::PositiveNumber);
  eval_cmd->add_option("--seed", eval_seed, "Evaluation seed");
  eval_cmd->add_option("--out", eval_out, "Write summary/cdf CSVs here");
  eval_cmd->add_flag("--discounted", discounted, "Report discounted returns");
  eval_cmd->add_option("--gamma", gamma, "Discount for --discounted");

  app.add_subcommand("selftest", "Run the oracle checks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (*train_cmd) return run_train(config_path, seeds, out_dir);
    if (*eval_cmd)
      return run_eval(checkpoint, env_name, scales, episodes, eval_seed, eval_out, discounted,
                      gamma);
    return run_selftest();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}
