#pragma once

// Offline training of the correction term: regenerate a synthetic dataset of
// (x, u_H, theta*, theta) tuples every epoch and descend the summed stability
// margin of the corrected rule.

#include "strol/episode.hpp"
#include "strol/humansim.hpp"
#include "strol/lyapunov.hpp"
#include "strol/metrics.hpp"
#include "strol/net.hpp"
#include "strol/rules.hpp"

#include <optional>
#include <stdexcept>
#include <vector>

namespace strol {

struct TrainConfig {
  int epochs = 500;
  int samples_per_epoch = 512;
  int minibatch = 128;
  std::uint64_t seed = 1;
  RuleTag rule = RuleTag::Strol;  ///< Strol or E2e
  HumanNoise noise;
  Prior prior;
  double lambda = 1.0;
  std::vector<std::size_t> hidden = {64, 64, 64, 64};
  AdamSettings adam;

  void validate(const Environment& env) const;
};

struct TrainSample {
  StateVector x;
  ActionVector u_h;
  ParamVector theta_star;
  ParamVector theta;
  ActionVector u_r;
};

struct TrainReport {
  std::vector<double> epoch_loss;  ///< mean per-sample margin, one entry per epoch
  double wall_seconds = 0.0;
  std::size_t skipped_steps = 0;   ///< optimizer steps dropped for non-finite gradients
  std::optional<double> basin_fraction;
};

struct TrainResult {
  CorrectionNet net;
  TrainReport report;
};

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// N fresh tuples for `epoch`: x from the environment's training distribution,
/// theta uniform over the parameter box, theta* from the prior, u_R from the
/// planner under theta, u_H the noisy optimal teaching action.
std::vector<TrainSample> generate_dataset(const Environment& env, const TrainConfig& cfg, int epoch);

/// Stability record of the corrected rule (strol: g + g_hat, e2e: g_hat) on one sample.
StabilityRecord sample_record(const Environment& env, const CorrectionNet& net, RuleTag rule, const TrainSample& s);

/// 95th percentile of ||g|| over the samples (the e2e bound reference).
double reference_norm(const Environment& env, std::span<const TrainSample> samples);

/// Untrained net with the layer widths and bound for this environment and config.
CorrectionNet initial_net(const Environment& env, const TrainConfig& cfg);

TrainResult train(const Environment& env, const TrainConfig& cfg);

struct EvalCondition {
  Prior human_prior;  ///< theta* is drawn from here
  HumanNoise noise;
  ParamVector theta0; ///< the robot's initial estimate
  int window = -1;    ///< -1 uses the environment default
};

struct EvalEpisode {
  std::uint64_t seed = 0;
  ParamVector theta_star;
  ParamVector final_theta;
  double error = 0.0;
  double regret = 0.0;
};

struct Evaluation {
  EvalSummary summary;
  std::vector<EvalEpisode> episodes;
  bool empty() const { return episodes.empty(); }
};

/// Seed of episode i of an evaluation rooted at `seed`; shared across rules so
/// that cells are paired episode by episode.
std::uint64_t episode_seed(std::uint64_t seed, std::size_t index);

Evaluation evaluate_rule(const Environment& env, const RuleKind& rule, const EvalCondition& condition, int episodes,
                         std::uint64_t seed);
Evaluation evaluate_rule(const Environment& env, const RuleFn& rule, const std::string& rule_name,
                         const EvalCondition& condition, int episodes, std::uint64_t seed);

}  // namespace strol
