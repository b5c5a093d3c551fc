#pragma once

// Helpers shared by the unit tests.

#include "strol/core.hpp"
#include "strol/random.hpp"

#include <filesystem>
#include <random>
#include <string>

namespace strol::testing {

inline Vector random_vector(Rng& rng, Eigen::Index n, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> d(lo, hi);
  Vector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = d(rng);
  return v;
}

inline DynVector random_dyn(Rng& rng, Eigen::Index n, double lo = -1.0, double hi = 1.0) {
  return random_vector(rng, n, lo, hi);
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("strol_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace strol::testing
