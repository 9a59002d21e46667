#include "riskdpg/harness.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include "riskdpg/errors.hpp"

namespace riskdpg {

// --- configuration -----------------------------------------------------------

void RunConfig::validate() const {
  agent.validate();
  make_environment(env);
  if (total_env_steps < 0) throw DomainError("total_env_steps must be >= 0");
  if (eval_period < 1) throw DomainError("eval_period must be >= 1");
  if (eval_episodes < 1) throw DomainError("eval_episodes must be >= 1");
  if (noise_scales.empty()) throw DomainError("noise_scales must not be empty");
  for (double s : noise_scales)
    if (!(s >= 0.0) || !std::isfinite(s)) throw DomainError("noise scales must be finite and >= 0");
  if (seeds.empty()) throw DomainError("seeds must not be empty");
}

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string join(const auto& values, auto&& fmt) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ',';
    out += fmt(values[i]);
  }
  return out;
}

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> parts;
  std::string cur;
  std::istringstream ss(value);
  while (std::getline(ss, cur, ',')) {
    cur = trim(cur);
    if (!cur.empty()) parts.push_back(cur);
  }
  return parts;
}

class LineParser {
 public:
  LineParser(int line, std::string key) : line_(line), key_(std::move(key)) {}

  [[noreturn]] void fail(const std::string& what) const {
    throw ParseError("line " + std::to_string(line_) + ": " + key_ + ": " + what);
  }

  double real(const std::string& v) const {
    double out = 0.0;
    const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
    if (res.ec != std::errc{} || res.ptr != v.data() + v.size() || !std::isfinite(out))
      fail("malformed number '" + v + "'");
    return out;
  }

  template <typename Int>
  Int integer(const std::string& v) const {
    Int out{};
    const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
    if (res.ec != std::errc{} || res.ptr != v.data() + v.size()) fail("malformed integer '" + v + "'");
    return out;
  }

  bool boolean(const std::string& v) const {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    fail("expected true/false, got '" + v + "'");
  }

  std::vector<int> int_list(const std::string& v) const {
    std::vector<int> out;
    for (const auto& p : split_list(v)) out.push_back(integer<int>(p));
    return out;
  }

 private:
  int line_;
  std::string key_;
};

}  // namespace

RunConfig parse_config(const std::string& text) {
  RunConfig c;
  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    if (const auto hash = raw.find('#'); hash != std::string::npos) raw.resize(hash);
    const std::string line = trim(raw);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ParseError("line " + std::to_string(line_no) + ": expected key=value");
    const std::string key = trim(std::string_view(line).substr(0, eq));
    const std::string value = trim(std::string_view(line).substr(eq + 1));
    const LineParser p(line_no, key);
    auto& a = c.agent;
    if (key == "alpha") a.alpha = p.real(value);
    else if (key == "gamma") a.gamma = p.real(value);
    else if (key == "n_atoms") a.n_atoms = p.integer<int>(value);
    else if (key == "batch_size") a.batch_size = p.integer<int>(value);
    else if (key == "critic_lr" || key == "beta1") a.critic_lr = p.real(value);
    else if (key == "actor_lr" || key == "beta2") a.actor_lr = p.real(value);
    else if (key == "delta") a.delta = p.real(value);
    else if (key == "zeta") a.zeta = p.real(value);
    else if (key == "tau_target") a.tau_target = p.real(value);
    else if (key == "target_period") a.target_period = p.integer<int>(value);
    else if (key == "optimizer") {
      try {
        a.optimizer = parse_optimizer(value);
      } catch (const ParseError& e) {
        p.fail(e.what());
      }
    }
    else if (key == "actor_hidden") a.actor_hidden = p.int_list(value);
    else if (key == "critic_hidden") a.critic_hidden = p.int_list(value);
    else if (key == "hidden") a.actor_hidden = a.critic_hidden = p.int_list(value);
    else if (key == "grad_clip") a.grad_clip = p.real(value);
    else if (key == "normalize_inputs") a.normalize_inputs = p.boolean(value);
    else if (key == "reward_scale") a.reward_scale = p.real(value);
    else if (key == "replay_capacity") a.replay_capacity = p.integer<std::size_t>(value);
    else if (key == "env") c.env = value;
    else if (key == "total_env_steps") c.total_env_steps = p.integer<std::int64_t>(value);
    else if (key == "eval_period") c.eval_period = p.integer<std::int64_t>(value);
    else if (key == "eval_episodes") c.eval_episodes = p.integer<int>(value);
    else if (key == "noise_scales") {
      c.noise_scales.clear();
      for (const auto& s : split_list(value)) c.noise_scales.push_back(p.real(s));
    }
    else if (key == "seeds" || key == "seed") {
      c.seeds.clear();
      for (const auto& s : split_list(value)) c.seeds.push_back(p.integer<std::uint64_t>(s));
    }
    else if (key == "output_dir") c.output_dir = value;
    else if (key == "discounted_returns") c.discounted_returns = p.boolean(value);
    else throw ParseError("line " + std::to_string(line_no) + ": unknown key '" + key + "'");
  }
  if (!c.seeds.empty()) c.agent.seed = c.seeds.front();
  try {
    c.validate();
  } catch (const DomainError& e) {
    throw ParseError(std::string("invalid configuration: ") + e.what());
  }
  return c;
}

RunConfig read_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string format_config(const RunConfig& c) {
  const auto& a = c.agent;
  const auto ints = [](int v) { return std::to_string(v); };
  std::ostringstream out;
  out << "alpha=" << fmt_double(a.alpha) << '\n'
      << "gamma=" << fmt_double(a.gamma) << '\n'
      << "n_atoms=" << a.n_atoms << '\n'
      << "batch_size=" << a.batch_size << '\n'
      << "critic_lr=" << fmt_double(a.critic_lr) << '\n'
      << "actor_lr=" << fmt_double(a.actor_lr) << '\n'
      << "delta=" << fmt_double(a.delta) << '\n'
      << "zeta=" << fmt_double(a.zeta) << '\n'
      << "tau_target=" << fmt_double(a.tau_target) << '\n'
      << "target_period=" << a.target_period << '\n'
      << "optimizer=" << to_string(a.optimizer) << '\n'
      << "actor_hidden=" << join(a.actor_hidden, ints) << '\n'
      << "critic_hidden=" << join(a.critic_hidden, ints) << '\n'
      << "grad_clip=" << fmt_double(a.grad_clip) << '\n'
      << "normalize_inputs=" << (a.normalize_inputs ? "true" : "false") << '\n'
      << "reward_scale=" << fmt_double(a.reward_scale) << '\n'
      << "replay_capacity=" << a.replay_capacity << '\n'
      << "env=" << c.env << '\n'
      << "total_env_steps=" << c.total_env_steps << '\n'
      << "eval_period=" << c.eval_period << '\n'
      << "eval_episodes=" << c.eval_episodes << '\n'
      << "noise_scales=" << join(c.noise_scales, fmt_double) << '\n'
      << "seeds=" << join(c.seeds, [](std::uint64_t s) { return std::to_string(s); }) << '\n'
      << "output_dir=" << c.output_dir.string() << '\n'
      << "discounted_returns=" << (c.discounted_returns ? "true" : "false") << '\n';
  return out.str();
}

// --- statistics ------------------------------------------------------------------

std::vector<CdfPoint> empirical_cdf(const std::vector<double>& returns) {
  if (returns.empty()) throw DomainError("empirical CDF of an empty sample");
  std::vector<double> v = returns;
  std::sort(v.begin(), v.end());
  const double n = static_cast<double>(v.size());
  std::vector<CdfPoint> out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i + 1 < v.size() && v[i + 1] == v[i]) continue;
    out.push_back({v[i], static_cast<double>(i + 1) / n});
  }
  return out;
}

ScaleReport summarize(double scale, std::vector<double> returns) {
  if (returns.empty()) throw DomainError("no returns to summarize");
  ScaleReport r;
  r.scale = scale;
  const double n = static_cast<double>(returns.size());
  double sum = 0.0;
  for (double x : returns) sum += x;
  r.mean = sum / n;
  double ss = 0.0;
  for (double x : returns) ss += (x - r.mean) * (x - r.mean);
  r.std = std::sqrt(ss / n);
  const auto [lo, hi] = std::minmax_element(returns.begin(), returns.end());
  r.min = *lo;
  r.max = *hi;
  r.cdf = empirical_cdf(returns);
  r.returns = std::move(returns);
  return r;
}

EvalReport evaluate_policy(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& policy,
                           const Environment& env_proto, const std::vector<double>& noise_scales,
                           int episodes, std::uint64_t seed, double discount) {
  if (episodes < 1) throw DomainError("episodes must be >= 1");
  const auto env = env_proto.clone();
  const auto& spec = env->spec();
  EvalReport report;
  for (std::size_t si = 0; si < noise_scales.size(); ++si) {
    std::vector<double> returns;
    returns.reserve(static_cast<std::size_t>(episodes));
    for (int e = 0; e < episodes; ++e) {
      const std::string ep = std::to_string(e);
      Rng reset_rng = Rng::substream(seed, "eval/reset/" + ep);
      Rng env_rng = Rng::substream(seed, "eval/env/" + ep);
      Rng noise_rng = Rng::substream(seed, "eval/disturb/" + std::to_string(si) + "/" + ep);
      Eigen::VectorXd x = env->reset(reset_rng);
      double ret = 0.0;
      double weight = 1.0;
      for (;;) {
        const Eigen::VectorXd a =
            disturb_action(policy(x), noise_scales[si], spec.a_max, noise_rng);
        const StepResult res = env->step(x, a, env_rng);
        ret += weight * res.r;
        weight *= discount;
        if (res.terminal) break;
        x = res.x_next;
      }
      returns.push_back(ret);
    }
    report.scales.push_back(summarize(noise_scales[si], std::move(returns)));
  }
  return report;
}

EvalReport evaluate(const ActorNet& actor, const Environment& env,
                    const std::vector<double>& noise_scales, int episodes, std::uint64_t seed,
                    double discount) {
  return evaluate_policy([&](const Eigen::VectorXd& x) { return actor.act(x); }, env,
                         noise_scales, episodes, seed, discount);
}

// --- training --------------------------------------------------------------------

TrainResult train(const RunConfig& config, std::uint64_t seed) {
  config.validate();
  AgentConfig agent_cfg = config.agent;
  agent_cfg.seed = seed;
  const auto env = make_environment(config.env);
  const EnvSpec& spec = env->spec();

  TrainResult result{Agent(agent_cfg, spec), seed, 0, {}, {}, {}, {}};
  Agent& agent = result.agent;
  ReplayPool pool(agent_cfg.replay_capacity, spec.state_dim, spec.action_dim);

  Rng reset_rng = Rng::substream(seed, "train/reset");
  Rng env_rng = Rng::substream(seed, "train/env");
  Rng explore_rng = Rng::substream(seed, "train/explore");
  Rng replay_rng = Rng::substream(seed, "train/replay");
  Rng learner_rng = Rng::substream(seed, "train/learner");
  const std::uint64_t eval_seed = splitmix64(seed ^ fnv1a64("eval"));
  const double discount = config.discounted_returns ? agent_cfg.gamma : 1.0;
  const auto batch = static_cast<std::size_t>(agent_cfg.batch_size);

  double loss_acc = 0.0, cvar_acc = 0.0;
  std::int64_t window = 0;
  auto record = [&](std::int64_t step) {
    MetricsRow row;
    row.step = step;
    const double nan = std::numeric_limits<double>::quiet_NaN();
    row.critic_loss = window ? loss_acc / static_cast<double>(window) : nan;
    row.actor_cvar = window ? cvar_acc / static_cast<double>(window) : nan;
    result.final_report = evaluate(agent.actor(), *env, config.noise_scales,
                                   config.eval_episodes, eval_seed, discount);
    for (const auto& s : result.final_report.scales) row.eval_means.push_back(s.mean);
    result.metrics.push_back(std::move(row));
    loss_acc = cvar_acc = 0.0;
    window = 0;
  };

  Eigen::VectorXd x = env->reset(reset_rng);
  for (std::int64_t step = 1; step <= config.total_env_steps; ++step) {
    agent.observe_state(x);
    const Eigen::VectorXd a = agent.select_action(x, agent_cfg.delta, explore_rng);
    const StepResult res = env->step(x, a, env_rng);
    pool.push(Transition{x, a, res.r, res.x_next, res.terminal && !res.truncated});
    x = res.terminal ? env->reset(reset_rng) : res.x_next;

    if (pool.size() >= batch) {
      const auto sample = pool.sample_batch(batch, replay_rng);
      try {
        const double loss = agent.critic_update(sample, learner_rng);
        const double cvar = agent.actor_update(sample, learner_rng);
        agent.target_sync();
        result.critic_losses.push_back(loss);
        result.actor_cvars.push_back(cvar);
        loss_acc += loss;
        cvar_acc += cvar;
        ++window;
        ++result.learner_updates;
      } catch (const DivergenceError& e) {
        if (!config.output_dir.empty()) {
          const auto dir = config.output_dir / ("seed_" + std::to_string(seed)) / "diverged";
          std::filesystem::create_directories(dir);
          save_checkpoint(agent, config, dir);
        }
        throw DivergenceError("diverged at env step " + std::to_string(step) + " (seed " +
                              std::to_string(seed) + "): " + e.what());
      }
    }
    if (step % config.eval_period == 0 || step == config.total_env_steps) record(step);
  }
  if (config.total_env_steps == 0) record(0);
  return result;
}

// --- reports ---------------------------------------------------------------------

std::string scale_label(double scale) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%g", scale);
  return buf;
}

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  return out;
}

void close_out(std::ofstream& out, const std::filesystem::path& path) {
  out.close();
  if (!out) throw IoError("write failed: " + path.string());
}

std::string csv_number(double v) { return std::isnan(v) ? std::string() : fmt_double(v); }

}  // namespace

void write_reports(const std::vector<SeedReport>& runs, const std::vector<double>& noise_scales,
                   const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());

  {
    const auto path = dir / "metrics.csv";
    auto out = open_out(path);
    out << "seed,step,critic_loss,actor_cvar";
    for (double s : noise_scales) out << ",eval_mean_" << scale_label(s);
    out << '\n';
    for (const auto& run : runs) {
      for (const auto& row : run.metrics) {
        out << run.seed << ',' << row.step << ',' << csv_number(row.critic_loss) << ','
            << csv_number(row.actor_cvar);
        for (double m : row.eval_means) out << ',' << csv_number(m);
        out << '\n';
      }
    }
    close_out(out, path);
  }
  {
    const auto path = dir / "summary.csv";
    auto out = open_out(path);
    out << "seed,scale,mean,std,min,max\n";
    for (const auto& run : runs)
      for (const auto& s : run.report.scales)
        out << run.seed << ',' << fmt_double(s.scale) << ',' << fmt_double(s.mean) << ','
            << fmt_double(s.std) << ',' << fmt_double(s.min) << ',' << fmt_double(s.max) << '\n';
    close_out(out, path);
  }
  for (std::size_t si = 0; si < noise_scales.size(); ++si) {
    std::vector<double> pooled;
    for (const auto& run : runs) {
      if (si >= run.report.scales.size()) throw DimensionError("report lacks a noise scale");
      const auto& r = run.report.scales[si].returns;
      pooled.insert(pooled.end(), r.begin(), r.end());
    }
    if (pooled.empty()) continue;
    const auto path = dir / ("cdf_" + scale_label(noise_scales[si]) + ".csv");
    auto out = open_out(path);
    out << "value,prob\n";
    for (const auto& p : empirical_cdf(pooled))
      out << fmt_double(p.value) << ',' << fmt_double(p.prob) << '\n';
    close_out(out, path);
  }
}

// --- checkpoints -------------------------------------------------------------------

void save_checkpoint(const Agent& agent, const RunConfig& config, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  save_params(dir / "actor.ckpt", agent.actor().params);
  save_params(dir / "critic.ckpt", agent.critic().params);
  save_params(dir / "actor_target.ckpt", agent.targets().actor_target.params);
  save_params(dir / "critic_target.ckpt", agent.targets().critic_target.params);
  {
    const auto path = dir / "config.txt";
    auto out = open_out(path);
    RunConfig echo = config;
    echo.seeds = {agent.config().seed};
    out << format_config(echo);
    close_out(out, path);
  }
  if (agent.actor().state_norm) {
    const auto path = dir / "state_norm.txt";
    auto out = open_out(path);
    agent.actor().state_norm->save(out);
    close_out(out, path);
  }
}

ActorNet load_actor(const std::filesystem::path& path, const EnvSpec& env) {
  const bool is_dir = std::filesystem::is_directory(path);
  const auto file = is_dir ? path / "actor.ckpt" : path;
  ActorNet actor;
  actor.params = load_params(file);
  if (actor.params.in_dim() != env.state_dim || actor.params.out_dim() != env.action_dim)
    throw DimensionError("checkpoint " + file.string() + " does not match the environment");
  actor.a_max = env.a_max;
  const auto norm = file.parent_path() / "state_norm.txt";
  if (std::filesystem::exists(norm)) {
    std::ifstream in(norm);
    actor.state_norm = RunningNormalizer::load(in);
  }
  return actor;
}

}  // namespace riskdpg
