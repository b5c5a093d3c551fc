#include "strol/metrics.hpp"

#include <cmath>
#include <stdexcept>

namespace strol {

double param_error(const ParamVector& theta_star, const ParamVector& theta) {
  require_dim("param_error", theta_star.size(), theta.size());
  return (theta_star.values - theta.values).norm();
}

double regret(const Environment& env, const ParamVector& theta_star, const ParamVector& theta, const StateVector& x0,
              int steps, const PlannerSettings& planner) {
  const RewardModel model = env.reward_model();
  const Trajectory ideal = planned_trajectory(env, x0, theta_star, steps, planner);
  const Trajectory learned = planned_trajectory(env, x0, theta, steps, planner);
  return trajectory_reward(model, ideal, theta_star) - trajectory_reward(model, learned, theta_star);
}

double regret(const Environment& env, const ParamVector& theta_star, const ParamVector& theta, const StateVector& x0) {
  return regret(env, theta_star, theta, x0, env.settings().horizon, env.settings().planner);
}

double mean_of(std::span<const double> values) {
  if (values.empty()) return 0.0;
  double s = 0.0;
  for (double v : values) s += v;
  return s / static_cast<double>(values.size());
}

double sample_std(std::span<const double> values) {
  if (values.size() < 2) return 0.0;
  const double m = mean_of(values);
  double ss = 0.0;
  for (double v : values) ss += (v - m) * (v - m);
  return std::sqrt(ss / static_cast<double>(values.size() - 1));
}

EvalSummary summarize(std::span<const double> errors, std::span<const double> regrets, std::string label) {
  if (errors.size() != regrets.size()) throw DimensionError("summary columns", errors.size(), regrets.size());
  EvalSummary s;
  s.label = std::move(label);
  s.episodes = errors.size();
  if (s.episodes == 0) return s;
  const double root_n = std::sqrt(static_cast<double>(s.episodes));
  s.mean_error = mean_of(errors);
  s.std_error = sample_std(errors);
  s.sem_error = s.std_error / root_n;
  s.mean_regret = mean_of(regrets);
  s.std_regret = sample_std(regrets);
  s.sem_regret = s.std_regret / root_n;
  return s;
}

}  // namespace strol
