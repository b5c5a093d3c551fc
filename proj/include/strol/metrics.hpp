#pragma once

#include "strol/core.hpp"
#include "strol/envs.hpp"

#include <span>
#include <string>

namespace strol {

/// ||theta* - theta||_2.
double param_error(const ParamVector& theta_star, const ParamVector& theta);

/// True-reward gap between the planner's trajectory under theta* and under
/// theta, both from x0 with no human input, same planner and horizon.
double regret(const Environment& env, const ParamVector& theta_star, const ParamVector& theta, const StateVector& x0);
double regret(const Environment& env, const ParamVector& theta_star, const ParamVector& theta, const StateVector& x0,
              int steps, const PlannerSettings& planner);

double mean_of(std::span<const double> values);
/// Sample standard deviation (n - 1); 0 for fewer than two values.
double sample_std(std::span<const double> values);

struct EvalSummary {
  std::string label;
  std::size_t episodes = 0;
  double mean_error = 0.0, std_error = 0.0, sem_error = 0.0;
  double mean_regret = 0.0, std_regret = 0.0, sem_regret = 0.0;

  bool empty() const { return episodes == 0; }
};

EvalSummary summarize(std::span<const double> errors, std::span<const double> regrets, std::string label);

}  // namespace strol
