#pragma once

// Nominal human model: a prior over the true parameters, optimal teaching
// actions, and Gaussian noise/bias perturbations of those actions.

#include "strol/core.hpp"
#include "strol/envs.hpp"
#include "strol/random.hpp"

#include <string>
#include <vector>

namespace strol {

struct PriorMode {
  ParamVector mean;
  Vector covariance;  ///< diagonal variances, same length as mean
  double weight = 1.0;
};

struct Prior {
  enum class Kind { Mixture, UniformBox };

  Kind kind = Kind::Mixture;
  std::string id;
  std::vector<PriorMode> modes;  ///< Mixture
  Vector box_lo, box_hi;         ///< UniformBox

  /// Weights are normalized to sum to 1.
  static Prior mixture(std::vector<PriorMode> modes, std::string id = "mixture");
  static Prior uniform_box(Vector lo, Vector hi, std::string id = "uniform");

  std::size_t dim() const;
  void validate() const;
  /// Mixture: weighted mean of mode means. Box: the midpoint.
  ParamVector mean() const;
  /// Mixture: mode means. Box: the midpoint only.
  std::vector<ParamVector> mode_means() const;
};

/// Draws theta* from the prior, clamped to [-theta_bound, theta_bound]^d.
ParamVector sample_theta(const Prior& prior, Rng& rng, double theta_bound = 1.0);
ParamVector sample_theta(const Prior& prior, std::uint64_t seed, double theta_bound = 1.0);

/// ||theta* - (theta + alpha * g(u_H))||, the quantity an optimal teacher minimizes.
double teaching_objective(const Environment& env, const ParamVector& theta_star, const ParamVector& theta,
                          const StateVector& x, const ActionVector& u_r, double alpha, const Vector& u_h);

/// Minimizes teaching_objective over a per-axis grid of `resolution` points,
/// then over a second grid of the same resolution spanning one coarse cell
/// around the best coarse point. Earlier candidates win ties.
ActionVector optimal_action(const Environment& env, const ParamVector& theta_star, const ParamVector& theta,
                            const StateVector& x, const ActionVector& u_r, double alpha, int resolution);
ActionVector optimal_action(const Environment& env, const ParamVector& theta_star, const ParamVector& theta,
                            const StateVector& x, const ActionVector& u_r, double alpha);

struct HumanNoise {
  double sigma = 0.0;  ///< std dev as a fraction of the largest action magnitude
  Vector bias;         ///< per-component mean offset in action units; empty means zero

  Vector bias_for(std::size_t m) const;
};

/// u* + delta, delta_i ~ N(bias_i, sigma * bound), clipped to the action box.
ActionVector noisy_action(const ActionVector& u_star, const HumanNoise& noise, Rng& rng);
ActionVector noisy_action(const ActionVector& u_star, const HumanNoise& noise, std::uint64_t seed);

}  // namespace strol
