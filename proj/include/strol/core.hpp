#pragma once

// Shared value types for online reward learning, and the linear reward model.

#include <Eigen/Dense>

#include <cstddef>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace strol {

/// Upper bound on state, action, parameter, and feature dimensions.
constexpr int kMaxSmallDim = 16;

/// Small dynamic vector with inline storage (no heap allocation).
using Vector = Eigen::Matrix<double, Eigen::Dynamic, 1, Eigen::ColMajor, kMaxSmallDim, 1>;
using DynVector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

class DimensionError : public std::invalid_argument {
 public:
  DimensionError(const std::string& what, std::size_t expected, std::size_t actual);
};

/// Throws DimensionError unless `actual == expected`.
void require_dim(const char* what, std::size_t expected, std::size_t actual);

bool all_finite(const Vector& v);

/// A real vector with a compile-time role tag so states, parameters, and
/// features cannot be mixed up at call sites.
template <class Tag>
struct TaggedVector {
  Vector values;

  TaggedVector() = default;
  explicit TaggedVector(Vector v) : values(std::move(v)) {}
  TaggedVector(std::initializer_list<double> init)
      : values(Eigen::Map<const DynVector>(init.begin(), static_cast<Eigen::Index>(init.size()))) {}

  static TaggedVector zeros(std::size_t n) { return TaggedVector(Vector::Zero(static_cast<Eigen::Index>(n))); }

  std::size_t size() const { return static_cast<std::size_t>(values.size()); }
  double operator[](std::size_t i) const { return values[static_cast<Eigen::Index>(i)]; }
  double& operator[](std::size_t i) { return values[static_cast<Eigen::Index>(i)]; }

  friend bool operator==(const TaggedVector& a, const TaggedVector& b) {
    return a.values.size() == b.values.size() && a.values == b.values;
  }
};

struct StateTag {};
struct ParamTag {};
struct FeatureTag {};
struct DeltaTag {};

using StateVector = TaggedVector<StateTag>;
using ParamVector = TaggedVector<ParamTag>;
using FeatureVector = TaggedVector<FeatureTag>;
/// Output of a learning rule: the direction the estimate moves in.
using ParamDelta = TaggedVector<DeltaTag>;

/// Action of one agent. Every component satisfies |u_i| <= bound.
struct ActionVector {
  Vector values;
  double bound = 1.0;

  ActionVector() = default;
  ActionVector(Vector v, double b);

  static ActionVector zeros(std::size_t m, double b) { return {Vector::Zero(static_cast<Eigen::Index>(m)), b}; }
  /// Clips every component into [-bound, bound].
  static ActionVector clipped(const Vector& v, double b);

  std::size_t size() const { return static_cast<std::size_t>(values.size()); }
  bool within_bound(const Vector& v) const;
  double operator[](std::size_t i) const { return values[static_cast<Eigen::Index>(i)]; }
};

/// e = theta_star - theta.
struct ErrorVector {
  Vector values;

  static ErrorVector between(const ParamVector& truth, const ParamVector& estimate);
  std::size_t size() const { return static_cast<std::size_t>(values.size()); }
};

struct Trajectory {
  std::vector<StateVector> states;

  /// Number of transitions, T. A trajectory always holds T + 1 states.
  std::size_t horizon() const { return states.empty() ? 0 : states.size() - 1; }
};

/// Joins two trajectories where `b` starts at the final state of `a`; the
/// junction state appears once.
Trajectory concatenate(const Trajectory& a, const Trajectory& b);

/// R(x, theta) = theta . phi(x).
struct RewardModel {
  std::function<FeatureVector(const StateVector&)> feature_map;
  std::size_t dim = 0;
  std::string description;
};

double reward_eval(const RewardModel& model, const StateVector& x, const ParamVector& theta);
double reward_eval(const FeatureVector& phi, const ParamVector& theta);

/// Sum of rewards over every state of the trajectory, start state included.
double trajectory_reward(const RewardModel& model, const Trajectory& xi, const ParamVector& theta);

}  // namespace strol
