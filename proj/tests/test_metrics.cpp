#include "support.hpp"

#include "strol/metrics.hpp"

#include <doctest.h>

#include <array>
#include <cmath>
#include <limits>

using namespace strol;
using strol::testing::random_vector;

TEST_CASE("param_error") {
  CHECK(param_error(ParamVector{0.3, 0.2}, ParamVector{0.3, 0.2}) == 0.0);
  CHECK(param_error(ParamVector{1.0, 0.0}, ParamVector{0.0, 0.0}) == 1.0);
  Rng rng(1);
  for (int i = 0; i < 1000; ++i) {
    const ParamVector a(random_vector(rng, 3)), b(random_vector(rng, 3)), c(random_vector(rng, 3));
    CHECK(param_error(a, b) == param_error(b, a));
    CHECK(param_error(a, c) <= param_error(a, b) + param_error(b, c) + 1e-15);
  }
}

TEST_CASE("regret of the true parameters is exactly zero") {
  Rng rng(2);
  for (const char* name : {"robot", "highway", "demo2d"}) {
    const auto env = make_environment(name);
    for (int i = 0; i < 10; ++i) {
      const ParamVector ts(random_vector(rng, static_cast<Eigen::Index>(env->theta_dim())));
      CHECK(regret(*env, ts, ts, env->start_state(rng)) == 0.0);
    }
  }
}

TEST_CASE("regret scaling") {
  const auto env = make_environment("robot");
  Rng rng(3);
  for (int i = 0; i < 10; ++i) {
    const ParamVector ts(random_vector(rng, 2)), th(random_vector(rng, 2));
    const StateVector x0 = env->start_state(rng);
    const double base = regret(*env, ts, th, x0);
    CHECK(regret(*env, ts, ParamVector(Vector(2.5 * th.values)), x0) == doctest::Approx(base).epsilon(1e-12));
    CHECK(regret(*env, ParamVector(Vector(4.0 * ts.values)), th, x0) == doctest::Approx(4.0 * base).epsilon(1e-12));
  }
}

namespace {

// Standalone demo2d: planar point mass at unit speed, one feature = -distance to the laptop at (0.5, 0).
struct Demo2dOracle {
  double dt = 0.1;
  int resolution = 3;
  int lookahead = 2;

  using P = std::array<double, 2>;

  static double feature(const P& p) { return -std::hypot(p[0] - 0.5, p[1]); }

  std::vector<P> candidates() const {
    std::vector<P> out;
    for (int i = 0; i < resolution; ++i)
      for (int j = 0; j < resolution; ++j)
        out.push_back({-1.0 + 2.0 * i / (resolution - 1), -1.0 + 2.0 * j / (resolution - 1)});
    return out;
  }

  // Every candidate rollout is enumerated; the best first action wins (earliest on ties).
  P choose(const P& x, double theta) const {
    P best_u{};
    double best = -std::numeric_limits<double>::infinity();
    for (const P& u : candidates()) {
      P s = x;
      double value = 0.0;
      for (int h = 0; h < lookahead; ++h) {
        s = {s[0] + u[0] * dt, s[1] + u[1] * dt};
        value += theta * feature(s);
      }
      if (value > best) {
        best = value;
        best_u = u;
      }
    }
    return best_u;
  }

  double true_return(const P& x0, double plan_theta, double true_theta, int steps) const {
    P x = x0;
    double total = true_theta * feature(x);
    for (int t = 0; t < steps; ++t) {
      const P u = choose(x, plan_theta);
      x = {x[0] + u[0] * dt, x[1] + u[1] * dt};
      total += true_theta * feature(x);
    }
    return total;
  }
};

}  // namespace

TEST_CASE("demo2d regret matches exhaustive enumeration on a reduced candidate set") {
  const auto env = make_environment("demo2d");
  const Demo2dOracle oracle;
  const PlannerSettings reduced{oracle.resolution, oracle.lookahead};
  const int steps = 8;
  Rng rng(4);
  for (int i = 0; i < 50; ++i) {
    const StateVector x0 = env->start_state(rng);
    const double ts = i % 2 ? 1.0 : -1.0;
    const double th = std::uniform_real_distribution<double>(-1, 1)(rng);
    const double expected = oracle.true_return({x0[0], x0[1]}, ts, ts, steps) - oracle.true_return({x0[0], x0[1]}, th, ts, steps);
    const double got = regret(*env, ParamVector{ts}, ParamVector{th}, x0, steps, reduced);
    CHECK(std::abs(got - expected) <= 1e-9);
    CHECK(got >= -1e-9);
  }
}

TEST_CASE("summaries") {
  const std::vector<double> e = {1.0, 2.0, 3.0, 4.0}, r = {0.0, 0.0, 2.0, 2.0};
  const auto s = summarize(e, r, "x");
  CHECK(s.episodes == 4);
  CHECK(s.mean_error == 2.5);
  CHECK(s.std_error == doctest::Approx(std::sqrt(5.0 / 3.0)));
  CHECK(s.sem_error == doctest::Approx(std::sqrt(5.0 / 3.0) / 2.0));
  CHECK(s.mean_regret == 1.0);
  CHECK(summarize({}, {}, "none").empty());
  CHECK(sample_std(std::vector<double>{5.0}) == 0.0);
}
