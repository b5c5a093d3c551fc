#pragma once

// Sweeps of learning rules across human noise, bias, and prior conditions, with
// per-episode pairing across rules and bootstrap comparisons between cells.

#include "strol/config.hpp"
#include "strol/trainer.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace strol {

struct SweepCondition {
  std::string prior_id;
  double sigma = 0.0;
  double bias = 0.0;  ///< fraction of the action bound, applied to every axis
};

struct SweepSpec {
  std::string env_name;
  EnvSettings env;
  std::vector<std::string> rules;
  std::vector<double> noise;
  std::vector<double> bias;
  std::vector<std::string> prior_ids;
  std::map<std::string, Prior> priors;  ///< must contain "train" and every id above
  int episodes = 1;
  std::uint64_t seed = 0;
  double mof_beta = 0.5;
  std::map<std::string, std::filesystem::path> weights;  ///< e2e / strol weight files

  /// Throws std::invalid_argument on empty lists, unknown rules or priors, or episodes < 1.
  void validate() const;
  /// Conditions in output order: prior (outer), noise, bias (inner).
  std::vector<SweepCondition> conditions() const;
};

/// Sweep spec from a config's [bench] section; throws ConfigError if absent.
SweepSpec sweep_spec(const ExperimentConfig& cfg);

struct CellResult {
  std::string rule;
  SweepCondition condition;
  std::uint64_t seed = 0;   ///< shared by every rule under the same condition
  bool skipped = false;
  std::string skip_reason;
  Evaluation evaluation;
};

struct SweepResult {
  std::string env_name;
  std::uint64_t seed = 0;
  std::vector<CellResult> cells;  ///< condition-major, rules in spec order

  const CellResult* find(const std::string& rule, const SweepCondition& condition) const;
};

/// Runs every (condition x rule) cell. Missing or unreadable weight files skip
/// the affected cells with a reason; every other cell still runs.
SweepResult run_sweep(const SweepSpec& spec);

/// 64-bit FNV-1a.
std::uint64_t fnv1a64(std::string_view bytes);
/// Canonical text of everything that determines a sweep's output.
std::string spec_fingerprint(const SweepSpec& spec);

/// One row per cell, preceded by a "# strol ..." header comment.
void write_summary_csv(std::ostream& out, const SweepSpec& spec, const SweepResult& result);
/// One row per episode of every non-skipped cell.
void write_episodes_csv(std::ostream& out, const SweepSpec& spec, const SweepResult& result);

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  bool contains(double v) const { return lo <= v && v <= hi; }
};

struct CellComparison {
  double mean_difference = 0.0;  ///< mean of a_i - b_i
  Interval interval;             ///< bootstrap 95% percentile interval
  bool significant = false;      ///< interval excludes 0
};

constexpr int kBootstrapResamples = 10000;

/// Paired bootstrap over per-episode differences a_i - b_i.
CellComparison compare_cells(std::span<const double> a, std::span<const double> b,
                             int resamples = kBootstrapResamples, std::uint64_t seed = 0xB007);

enum class Metric { Error, Regret };
std::vector<double> metric_values(const Evaluation& evaluation, Metric metric);
CellComparison compare_cells(const CellResult& a, const CellResult& b, Metric metric,
                             int resamples = kBootstrapResamples, std::uint64_t seed = 0xB007);

/// Bootstrap 95% percentile interval of the mean of `values`.
Interval bootstrap_mean_interval(std::span<const double> values, int resamples = kBootstrapResamples,
                                 std::uint64_t seed = 0xB007);

}  // namespace strol
