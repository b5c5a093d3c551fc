#pragma once

// Stability analysis of the learning dynamics around theta = theta*.
//
// With V = ||e||^2 and e = theta* - theta, one update theta' = theta + alpha*g
// changes V by ||e - alpha*g||^2 - ||e||^2 = alpha^2 ||g||^2 - 2 alpha (e . g).
// A negative value (the stability margin) certifies that the step contracts
// the error.

#include "strol/core.hpp"
#include "strol/envs.hpp"
#include "strol/rules.hpp"

#include <iosfwd>
#include <span>
#include <vector>

namespace strol {

double lyapunov_candidate(const ErrorVector& e);

double stability_margin(const ErrorVector& e, const ParamDelta& gtilde, double alpha);

/// True when the margin and the direct difference ||e - alpha g||^2 - ||e||^2
/// have the same sign (values within `tol` of zero count as zero).
bool margin_equivalence_check(const ErrorVector& e, const ParamDelta& gtilde, double alpha, double tol = 1e-9);

struct StabilityRecord {
  ErrorVector e;
  ParamDelta gtilde;
  double alpha = 0.0;
  double V = 0.0;
  double margin = 0.0;

  static StabilityRecord make(const ErrorVector& e, const ParamDelta& gtilde, double alpha);
};

/// Sum of margins; lower means more of the records contract.
double training_loss(std::span<const StabilityRecord> records);

struct BasinSettings {
  int steps = 50;
  int resolution = 41;
  double tolerance = 0.1;  ///< infinity-norm distance to a mode that counts as converged
};

struct BasinMap {
  std::vector<ActionVector> action_grid;
  std::vector<int> converged;          ///< mode index, or -1 for no convergence
  std::vector<int> steps_to_converge;  ///< first step after which theta stayed at the mode; -1 if none
  std::vector<ParamVector> final_theta;
  int resolution = 0;
  BasinSettings settings;

  double converged_fraction() const;
  double fraction_to_mode(int mode) const;
};

/// Holds each grid action fixed as u_H at x_start and runs `steps` learning
/// updates from theta_start (the robot's u_R is replanned from x_start under
/// the current estimate each step), then records which mode, if any, theta
/// ended within tolerance of.
BasinMap basin_map(const Environment& env, const RuleFn& rule, const ParamVector& theta_start,
                   const StateVector& x_start, std::span<const ParamVector> modes, const BasinSettings& settings);

/// "# basin ..." metadata line, then u1,u2,...,mode_index,steps_to_converge rows.
void write_basin_csv(std::ostream& out, const BasinMap& map, const std::string& label);

}  // namespace strol
