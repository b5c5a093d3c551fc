// strol: train, evaluate, sweep, map basins, and serve live learning sessions.

#include "strol/commands.hpp"
#include "strol/version.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace {

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> epochs;
  std::optional<int> episodes;
  std::optional<std::string> weights;
  std::optional<std::string> out;
  std::string rule = "strol";
  std::optional<int> resolution;
  unsigned short port = 8765;
  int tick_ms = 50;

  strol::CommandOptions options() const {
    strol::CommandOptions o;
    o.config = config;
    o.seed = seed;
    o.epochs = epochs;
    o.episodes = episodes;
    if (weights) o.weights = *weights;
    if (out) o.out = *out;
    o.rule = rule;
    o.resolution = resolution;
    o.port = port;
    o.tick_ms = tick_ms;
    return o;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Online reward learning with a stabilized, robust learning rule"};
  app.set_version_flag("--version", strol::kVersion);
  app.require_subcommand(1);
  Flags f;

  const auto common = [&f](CLI::App* sub) {
    sub->add_option("--config", f.config, "Experiment config (TOML)")->required();
    sub->add_option("--seed", f.seed, "Overrides the config seed");
    sub->add_option("--weights", f.weights, "Directory holding strol.weights / e2e.weights");
    sub->add_option("--out", f.out, "Output directory (basin: output file)");
  };

  auto* train = app.add_subcommand("train", "Train the correction nets listed in train.rules");
  common(train);
  train->add_option("--epochs", f.epochs, "Overrides train.epochs");

  auto* eval = app.add_subcommand("eval", "Evaluate every rule under the training condition");
  common(eval);
  eval->add_option("--episodes", f.episodes, "Overrides eval.episodes");

  auto* bench = app.add_subcommand("bench", "Run the [bench] sweep");
  common(bench);
  bench->add_option("--episodes", f.episodes, "Overrides bench.episodes");

  auto* basin = app.add_subcommand("basin", "Write a basin-of-attraction map over the human action grid");
  common(basin);
  basin->add_option("--rule", f.rule, "Learning rule")->capture_default_str();
  basin->add_option("--resolution", f.resolution, "Grid points per action axis (default 41)");

  auto* serve = app.add_subcommand("serve", "Host live sessions over WebSocket");
  common(serve);
  serve->add_option("--port", f.port, "TCP port")->capture_default_str();
  serve->add_option("--rule", f.rule, "Initial learning rule")->capture_default_str();
  serve->add_option("--tick-ms", f.tick_ms, "Tick period in milliseconds (>= 20)")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : strol::kExitConfig;
  }

  const auto opts = f.options();
  if (*train) return strol::cmd_train(opts, std::cout, std::cerr);
  if (*eval) return strol::cmd_eval(opts, std::cout, std::cerr);
  if (*bench) return strol::cmd_bench(opts, std::cout, std::cerr);
  if (*basin) return strol::cmd_basin(opts, std::cout, std::cerr);
  if (*serve) return strol::cmd_serve(opts, std::cout, std::cerr);
  return strol::kExitConfig;
}
