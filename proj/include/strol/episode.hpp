#pragma once

// Online interaction episodes: the robot replans every step, the human
// corrects during the first W steps, and the estimate follows the chosen rule.

#include "strol/envs.hpp"
#include "strol/humansim.hpp"
#include "strol/rules.hpp"

#include <nlohmann/json.hpp>

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace strol {

struct EpisodeLog {
  std::string env;
  std::string rule;
  Trajectory states;                       ///< T + 1 states when complete
  std::vector<ParamVector> theta_history;  ///< T + 1 estimates
  std::vector<std::string> rule_history;   ///< rule used at each step (T entries)
  std::vector<double> margins;             ///< stability margin against theta*, NaN if theta* unknown
  std::vector<ActionVector> human_actions;
  std::vector<ActionVector> robot_actions;
  std::vector<bool> clipped;               ///< human action was outside the box and got clipped
  std::vector<bool> collisions;            ///< highway only; false elsewhere
  std::optional<ParamVector> theta_star;
  double final_error = 0.0;
  double regret = 0.0;

  std::size_t steps() const { return margins.size(); }
};

/// Drives one episode a step at a time. Offline evaluation and the live
/// session both advance through this class, so they share one update path.
class OnlineLearner {
 public:
  OnlineLearner(const Environment& env, RuleFn rule, std::string rule_name, ParamVector theta0, StateVector x0,
                std::optional<ParamVector> theta_star);

  /// Plans u_R under the current estimate, applies the (clipped) human action,
  /// updates theta with the active rule, and advances the state.
  void advance(const Vector& u_h);
  /// Robot action the planner would take right now.
  ActionVector current_plan() const;

  void set_rule(RuleFn rule, std::string rule_name);
  void set_theta_star(std::optional<ParamVector> theta_star);

  int tick() const { return static_cast<int>(log_.steps()); }
  bool done() const { return tick() >= env_.settings().horizon; }
  const ParamVector& theta() const { return log_.theta_history.back(); }
  const StateVector& state() const { return log_.states.states.back(); }
  const std::string& rule_name() const { return rule_name_; }
  const EpisodeLog& log() const { return log_; }
  double last_margin() const;

  /// Fills final error and regret (when theta* is known) and returns the log.
  EpisodeLog finish() const;

 private:
  const Environment& env_;
  RuleFn rule_;
  std::string rule_name_;
  EpisodeLog log_;
};

/// Start state used by every episode seeded with `seed`.
StateVector episode_start_state(const Environment& env, std::uint64_t seed);

/// Runs T steps; the simulated human supplies noisy optimal teaching actions
/// while t < window and no input afterwards.
EpisodeLog run_episode(const Environment& env, const RuleFn& rule, const std::string& rule_name,
                       const HumanNoise& noise, const ParamVector& theta_star, const ParamVector& theta0, int window,
                       std::uint64_t seed);
EpisodeLog run_episode(const Environment& env, const RuleKind& rule, const HumanNoise& noise,
                       const ParamVector& theta_star, const ParamVector& theta0, int window, std::uint64_t seed);

/// Replays a fixed human action sequence (missing entries are zero actions).
EpisodeLog run_scripted_episode(const Environment& env, const RuleKind& rule, const ParamVector& theta_star,
                                const ParamVector& theta0, std::uint64_t seed, std::span<const Vector> human_actions);

/// One row per timestep: t, state..., theta..., u_h..., u_r..., margin, clipped.
void write_episode_csv(std::ostream& out, const EpisodeLog& log);
nlohmann::json episode_json(const EpisodeLog& log);

}  // namespace strol
