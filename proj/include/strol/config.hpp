#pragma once

// Experiment configuration files (TOML). One schema serves training,
// evaluation, basin maps, sweeps, and serve mode:
//
//   [env]      name, dt, horizon, window, alpha, action_bound, theta_bound, clamp_theta, teach_resolution
//   [planner]  resolution, lookahead
//   [prior]    kind = "mixture" (modes = [{mean, variance, weight}, ...]) or "box" (lo, hi)
//   [noise]    sigma, bias (scalar fraction of the action bound, or a per-axis list)
//   [train]    rules, epochs, samples, minibatch, seed, lambda, hidden, step_size
//   [eval]     episodes, seed, mof_beta
//   [weights]  strol, e2e  (defaults: <output.dir>/<rule>.weights)
//   [output]   dir
//   [bench]    rules, noise, bias, priors, episodes, seed
//   [priors.<id>]  extra priors referenced by bench.priors; "train" names [prior]
//
// Relative paths are resolved against the working directory.

#include "strol/envs.hpp"
#include "strol/humansim.hpp"
#include "strol/rules.hpp"
#include "strol/trainer.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace strol {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct BenchSection {
  std::vector<std::string> rules;
  std::vector<double> noise;             ///< sigma levels
  std::vector<double> bias;              ///< epsilon magnitudes, fraction of the action bound
  std::vector<std::string> priors;       ///< prior ids; "train" is the training prior
  int episodes = 0;
  std::uint64_t seed = 0;
};

struct ExperimentConfig {
  std::filesystem::path source;  ///< file this was read from; empty for built-ins
  std::string env_name;
  EnvSettings env;
  TrainConfig train;             ///< rule is set per trained rule by the caller
  std::vector<std::string> train_rules = {"strol", "e2e"};
  int episodes = 100;
  std::uint64_t eval_seed = 7;
  double mof_beta = 0.5;
  std::map<std::string, std::filesystem::path> weights;
  std::filesystem::path output_dir;
  std::map<std::string, Prior> priors;  ///< every named prior, "train" included
  std::optional<BenchSection> bench;

  /// Prior looked up by id; throws ConfigError for unknown ids.
  const Prior& prior(const std::string& id) const;
  /// Weight file of a trained rule.
  std::filesystem::path weights_for(const std::string& rule) const;
};

/// Parses TOML text. Errors carry "source:line:column: field: message".
ExperimentConfig parse_config(const std::string& text, const std::string& source_name = "config");
ExperimentConfig load_config(const std::filesystem::path& path);

/// Built-in defaults for an environment (used when a config omits sections).
ExperimentConfig default_config(const std::string& env_name);

/// Scalar bias fraction expanded to a per-axis offset in action units.
HumanNoise noise_with_bias(double sigma, double bias_fraction, const Environment& env);

}  // namespace strol
