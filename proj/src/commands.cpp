#include "strol/commands.hpp"

#include "strol/bench.hpp"
#include "strol/config.hpp"
#include "strol/lyapunov.hpp"
#include "strol/serve.hpp"
#include "strol/version.hpp"

#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

namespace strol {

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Loads the config and applies the flags that override it.
ExperimentConfig resolve(const CommandOptions& opts) {
  if (opts.config.empty()) throw ConfigError("--config is required");
  ExperimentConfig cfg = load_config(opts.config);
  if (opts.epochs) {
    if (*opts.epochs < 0) throw ConfigError("--epochs must be >= 0");
    cfg.train.epochs = *opts.epochs;
  }
  if (opts.episodes) {
    if (*opts.episodes < 1) throw ConfigError("--episodes must be >= 1");
    cfg.episodes = *opts.episodes;
    if (cfg.bench) cfg.bench->episodes = *opts.episodes;
  }
  if (opts.weights)
    for (const char* rule : {"strol", "e2e"}) cfg.weights[rule] = *opts.weights / (std::string(rule) + ".weights");
  if (opts.out) cfg.output_dir = *opts.out;
  return cfg;
}

std::ofstream open_output(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  return f;
}

// Runs `body`, mapping exceptions to exit codes.
template <class F>
int guarded(std::ostream& err, const char* name, F&& body) {
  try {
    return body();
  } catch (const ConfigError& e) {
    err << name << ": config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const PortBusyError& e) {
    err << name << ": " << e.what() << "\n";
    return kExitPortBusy;
  } catch (const std::exception& e) {
    err << name << ": " << e.what() << "\n";
    return kExitFailure;
  }
}

RuleKind load_rule(const ExperimentConfig& cfg, const Environment& env, const std::string& name) {
  RuleTag tag;
  try {
    tag = parse_rule_tag(name);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  switch (tag) {
    case RuleTag::Gradient: return RuleKind::gradient();
    case RuleTag::One: return RuleKind::one();
    case RuleTag::Mof: return RuleKind::mof(cfg.train.prior.mode_means(), cfg.mof_beta);
    case RuleTag::E2e:
    case RuleTag::Strol: {
      auto net = std::make_shared<const CorrectionNet>(net_load(cfg.weights_for(name)));
      RuleKind kind = tag == RuleTag::E2e ? RuleKind::e2e(net) : RuleKind::strol(net);
      kind.validate(env);
      return kind;
    }
  }
  throw std::logic_error("unhandled rule");
}

}  // namespace

int cmd_train(const CommandOptions& opts, std::ostream& out, std::ostream& err) {
  return guarded(err, "train", [&] {
    ExperimentConfig cfg = resolve(opts);
    if (opts.seed) cfg.train.seed = *opts.seed;
    const auto env = make_environment(cfg.env_name, cfg.env);
    std::filesystem::create_directories(cfg.output_dir);
    for (const auto& rule : cfg.train_rules) {
      TrainConfig tc = cfg.train;
      tc.rule = parse_rule_tag(rule);
      const TrainResult result = train(*env, tc);
      const auto weights = cfg.output_dir / (rule + ".weights");
      net_save(result.net, weights);
      auto csv = open_output(cfg.output_dir / (rule + "_loss.csv"));
      csv << "# strol " << kVersion << " env=" << cfg.env_name << " rule=" << rule << " seed=" << tc.seed << "\n";
      csv << "epoch,loss\n";
      for (std::size_t e = 0; e < result.report.epoch_loss.size(); ++e) csv << e + 1 << "," << fmt(result.report.epoch_loss[e]) << "\n";
      out << "trained " << rule << " on " << cfg.env_name << ": " << result.report.epoch_loss.size() << " epochs";
      if (!result.report.epoch_loss.empty())
        out << ", loss " << result.report.epoch_loss.front() << " -> " << result.report.epoch_loss.back();
      out << ", " << std::fixed << std::setprecision(1) << result.report.wall_seconds << " s" << std::defaultfloat
          << " -> " << weights.string() << "\n";
      if (result.report.skipped_steps > 0)
        out << "  warning: " << result.report.skipped_steps << " optimizer steps skipped (non-finite gradients)\n";
    }
    return kExitOk;
  });
}

int cmd_eval(const CommandOptions& opts, std::ostream& out, std::ostream& err) {
  return guarded(err, "eval", [&] {
    ExperimentConfig cfg = resolve(opts);
    if (opts.seed) cfg.eval_seed = *opts.seed;
    const auto env = make_environment(cfg.env_name, cfg.env);
    const EvalCondition condition{cfg.train.prior, cfg.train.noise, cfg.train.prior.mean(), -1};
    std::filesystem::create_directories(cfg.output_dir);
    auto csv = open_output(cfg.output_dir / "eval.csv");
    csv << "# strol " << kVersion << " env=" << cfg.env_name << " seed=" << cfg.eval_seed << "\n";
    csv << "rule,episodes,mean_error,sem_error,mean_regret,sem_regret\n";
    out << std::left << std::setw(10) << "rule" << std::setw(22) << "error (mean +- sem)" << "regret (mean +- sem)\n";
    for (const char* name : {"gradient", "one", "mof", "e2e", "strol"}) {
      RuleKind kind;
      try {
        kind = load_rule(cfg, *env, name);
      } catch (const std::exception& e) {
        out << std::setw(10) << name << "skipped: " << e.what() << "\n";
        csv << name << ",0,,,,\n";
        continue;
      }
      const auto s = evaluate_rule(*env, kind, condition, cfg.episodes, cfg.eval_seed).summary;
      csv << name << "," << s.episodes << "," << fmt(s.mean_error) << "," << fmt(s.sem_error) << "," << fmt(s.mean_regret)
          << "," << fmt(s.sem_regret) << "\n";
      std::ostringstream e, r;
      e << std::setprecision(4) << s.mean_error << " +- " << s.sem_error;
      r << std::setprecision(4) << s.mean_regret << " +- " << s.sem_regret;
      out << std::setw(10) << name << std::setw(22) << e.str() << r.str() << "\n";
    }
    return kExitOk;
  });
}

int cmd_bench(const CommandOptions& opts, std::ostream& out, std::ostream& err) {
  return guarded(err, "bench", [&] {
    ExperimentConfig cfg = resolve(opts);
    if (!cfg.bench) throw ConfigError(opts.config.string() + ": bench: missing [bench] section");
    if (opts.seed) cfg.bench->seed = *opts.seed;
    SweepSpec spec = sweep_spec(cfg);
    try {
      spec.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
    const SweepResult result = run_sweep(spec);
    std::filesystem::create_directories(cfg.output_dir);
    {
      auto f = open_output(cfg.output_dir / "summary.csv");
      write_summary_csv(f, spec, result);
    }
    {
      auto f = open_output(cfg.output_dir / "episodes.csv");
      write_episodes_csv(f, spec, result);
    }
    std::size_t skipped = 0;
    for (const auto& c : result.cells) {
      if (c.skipped) {
        ++skipped;
        out << c.rule << " [" << c.condition.prior_id << " sigma=" << c.condition.sigma << " bias=" << c.condition.bias
            << "] skipped: " << c.skip_reason << "\n";
        continue;
      }
      const auto& s = c.evaluation.summary;
      out << c.rule << " [" << c.condition.prior_id << " sigma=" << c.condition.sigma << " bias=" << c.condition.bias
          << "] error " << s.mean_error << " regret " << s.mean_regret << "\n";
    }
    out << result.cells.size() << " cells (" << skipped << " skipped) -> " << (cfg.output_dir / "summary.csv").string()
        << "\n";
    return kExitOk;
  });
}

int cmd_basin(const CommandOptions& opts, std::ostream& out, std::ostream& err) {
  return guarded(err, "basin", [&] {
    ExperimentConfig cfg = resolve(opts);
    const auto env = make_environment(cfg.env_name, cfg.env);
    if (env->human_action_dim() > 2)
      throw ConfigError(cfg.env_name + " has a " + std::to_string(env->human_action_dim()) +
                        "-D human action space; basin maps cover 1-D and 2-D action grids only (use the per-episode "
                        "tables from bench for higher dimensions)");
    const RuleKind kind = load_rule(cfg, *env, opts.rule);
    BasinSettings settings;
    if (opts.resolution) {
      if (*opts.resolution < 2) throw ConfigError("--resolution must be >= 2");
      settings.resolution = *opts.resolution;
    }
    const std::uint64_t seed = opts.seed.value_or(cfg.eval_seed);
    const auto modes = cfg.train.prior.mode_means();
    const BasinMap map = basin_map(*env, bind_rule(kind, *env), cfg.train.prior.mean(), episode_start_state(*env, seed),
                                   modes, settings);
    const auto path = opts.out.value_or(std::filesystem::path("out") / cfg.env_name / ("basin_" + opts.rule + ".csv"));
    auto f = open_output(path);
    write_basin_csv(f, map, opts.rule);
    out << "basin " << opts.rule << " on " << cfg.env_name << ": converged fraction " << map.converged_fraction()
        << " -> " << path.string() << "\n";
    return kExitOk;
  });
}

int cmd_serve(const CommandOptions& opts, std::ostream& out, std::ostream& err) {
  return guarded(err, "serve", [&] {
    ExperimentConfig cfg = resolve(opts);
    ServerOptions so;
    so.port = opts.port;
    so.session.initial_rule = opts.rule;
    so.session.seed = opts.seed.value_or(cfg.eval_seed);
    so.session.tick_ms = opts.tick_ms;
    {
      const auto env = make_environment(cfg.env_name, cfg.env);
      if (!available_rules(cfg, *env).count(opts.rule)) {
        out << "serve: rule '" << opts.rule << "' has no usable weights; starting with gradient\n";
        so.session.initial_rule = "gradient";
      }
    }
    std::unique_ptr<ServeServer> server;
    try {
      server = std::make_unique<ServeServer>(cfg, so);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
    out << "serving " << cfg.env_name << " on ws://" << so.address << ":" << server->port() << "\n" << std::flush;
    server->run(true);
    return kExitOk;
  });
}

}  // namespace strol
