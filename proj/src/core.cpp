#include "strol/core.hpp"

#include <cmath>

namespace strol {

DimensionError::DimensionError(const std::string& what, std::size_t expected, std::size_t actual)
    : std::invalid_argument(what + ": dimension mismatch (expected " + std::to_string(expected) + ", got " +
                            std::to_string(actual) + ")") {}

void require_dim(const char* what, std::size_t expected, std::size_t actual) {
  if (expected != actual) throw DimensionError(what, expected, actual);
}

bool all_finite(const Vector& v) { return v.allFinite(); }

ActionVector::ActionVector(Vector v, double b) : values(std::move(v)), bound(b) {
  if (!(bound >= 0.0)) throw std::invalid_argument("action bound must be non-negative");
  if (!within_bound(values)) throw std::invalid_argument("action component exceeds its bound");
}

ActionVector ActionVector::clipped(const Vector& v, double b) {
  return {v.cwiseMax(-b).cwiseMin(b), b};
}

bool ActionVector::within_bound(const Vector& v) const {
  return v.allFinite() && (v.size() == 0 || v.cwiseAbs().maxCoeff() <= bound);
}

ErrorVector ErrorVector::between(const ParamVector& truth, const ParamVector& estimate) {
  require_dim("error vector", truth.size(), estimate.size());
  return {truth.values - estimate.values};
}

Trajectory concatenate(const Trajectory& a, const Trajectory& b) {
  if (a.states.empty()) return b;
  if (b.states.empty()) return a;
  Trajectory out = a;
  out.states.insert(out.states.end(), b.states.begin() + 1, b.states.end());
  return out;
}

double reward_eval(const FeatureVector& phi, const ParamVector& theta) {
  require_dim("reward_eval", phi.size(), theta.size());
  return theta.values.dot(phi.values);
}

double reward_eval(const RewardModel& model, const StateVector& x, const ParamVector& theta) {
  return reward_eval(model.feature_map(x), theta);
}

double trajectory_reward(const RewardModel& model, const Trajectory& xi, const ParamVector& theta) {
  if (xi.states.empty()) throw std::invalid_argument("trajectory_reward: empty trajectory");
  double total = 0.0;
  for (const auto& x : xi.states) total += reward_eval(model, x, theta);
  return total;
}

}  // namespace strol
