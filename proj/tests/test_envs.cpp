#include "support.hpp"

#include "strol/envs.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>

using namespace strol;
using strol::testing::random_vector;

TEST_CASE("point mass step") {
  const auto env = make_environment("robot");
  const auto zero = env->zero_human_action();

  SUBCASE("no input leaves the state unchanged") {
    const StateVector x{0.1, -0.2, 0.3};
    CHECK(env->step(x, zero, env->zero_robot_action()) == x);
  }
  SUBCASE("unit robot velocity along x for one step") {
    const StateVector next = env->step(StateVector{0, 0, 0}, zero, ActionVector(Vector{{1.0, 0.0, 0.0}}, 1.0));
    CHECK(next[0] == doctest::Approx(0.1).epsilon(1e-15));
    CHECK(next[1] == 0.0);
    CHECK(next[2] == 0.0);
  }
  SUBCASE("human and robot velocities superimpose") {
    const StateVector next = env->step(StateVector{0, 0, 0}, ActionVector(Vector{{0.0, 0.5, 0.0}}, 1.0),
                                       ActionVector(Vector{{0.0, 0.5, -1.0}}, 1.0));
    CHECK(next[1] == doctest::Approx(0.1));
    CHECK(next[2] == doctest::Approx(-0.1));
  }
  SUBCASE("wrong action length is an error") {
    CHECK_THROWS_AS(env->step(StateVector{0, 0, 0}, ActionVector(Vector{{0.0, 0.0}}, 1.0), env->zero_robot_action()),
                    DimensionError);
  }
}

TEST_CASE("highway: straight-line constant speed matches closed-form kinematics over 10 steps") {
  const auto env = make_environment("highway");
  const double dt = env->settings().dt;
  Rng rng(21);
  for (int trial = 0; trial < 20; ++trial) {
    const double hr = std::uniform_real_distribution<double>(-0.2, 0.2)(rng);
    const double hh = std::uniform_real_distribution<double>(-0.2, 0.2)(rng);
    const double vr = std::uniform_real_distribution<double>(15, 25)(rng);
    const double vh = std::uniform_real_distribution<double>(15, 25)(rng);
    const StateVector x0{3.0, 1.85, hr, vr, -10.0, -1.85, hh, vh};
    StateVector x = x0;
    for (int k = 0; k < 10; ++k) x = env->step(x, env->zero_human_action(), env->zero_robot_action());
    const double t = 10 * dt;
    CHECK(std::abs(x[0] - (3.0 + vr * std::cos(hr) * t)) < 1e-9);
    CHECK(std::abs(x[1] - (1.85 + vr * std::sin(hr) * t)) < 1e-9);
    CHECK(x[2] == hr);
    CHECK(x[3] == vr);
    CHECK(std::abs(x[4] - (-10.0 + vh * std::cos(hh) * t)) < 1e-9);
    CHECK(std::abs(x[5] - (-1.85 + vh * std::sin(hh) * t)) < 1e-9);
    CHECK(x[6] == hh);
    CHECK(x[7] == vh);
  }
}

TEST_CASE("robot features") {
  const auto env = make_environment("robot");
  SUBCASE("end effector at the cup gives the maximal cup feature") {
    const auto phi = env->features(StateVector{0.6, 0.15, 0.0});
    CHECK(phi[0] == 0.0);
    CHECK(phi[1] < 0.0);
  }
  SUBCASE("features decrease along a ray away from each object") {
    const Vector cup{{0.6, 0.15, 0.0}};
    const Vector dir = Vector{{-1.0, 0.3, 0.4}}.normalized();
    double prev = std::numeric_limits<double>::infinity();
    for (int k = 0; k <= 20; ++k) {
      const double phi = env->features(StateVector(Vector(cup + 0.05 * k * dir)))[0];
      CHECK(phi < prev);
      prev = phi;
    }
  }
  SUBCASE("distance feature gradients match central differences") {
    Rng rng(4);
    const double h = 1e-6;
    const std::vector<Vector> objects = {Vector{{0.6, 0.15, 0.0}}, Vector{{0.6, -0.15, 0.0}}};
    for (int trial = 0; trial < 200; ++trial) {
      const Vector p = random_vector(rng, 3, -0.3, 0.4);
      for (std::size_t k = 0; k < objects.size(); ++k) {
        const Vector analytic = -(p - objects[k]) / (p - objects[k]).norm();
        for (Eigen::Index i = 0; i < 3; ++i) {
          Vector hi = p, lo = p;
          hi[i] += h;
          lo[i] -= h;
          const double fd = (env->features(StateVector(hi))[k] - env->features(StateVector(lo))[k]) / (2 * h);
          CHECK(std::abs(fd - analytic[i]) < 1e-6);
        }
      }
    }
  }
}

TEST_CASE("highway features") {
  const auto env = make_environment("highway");
  SUBCASE("co-located cars have zero distance; straight heading has zero lane-change feature") {
    const auto phi = env->features(StateVector{5.0, 1.85, 0.0, 20.0, 5.0, 1.85, 0.0, 18.0});
    CHECK(phi[0] == 0.0);
    CHECK(phi[1] == 20.0);
    CHECK(phi[2] == 0.0);
  }
  SUBCASE("scripted lane change matches hand geometry at 5 checkpoints") {
    // Human car steers clockwise (toward the right lane) at full yaw rate, constant speed.
    const double dt = env->settings().dt, v = 20.0, yaw = -0.5;
    StateVector x{0.0, 1.85, 0.0, 22.0, -12.0, 1.85, 0.0, v};
    const ActionVector turn(Vector{{0.0, -1.0}}, 1.0);
    double hx = -12.0, hy = 1.85, heading = 0.0, rx = 0.0;
    int checked = 0;
    for (int k = 1; k <= 25; ++k) {
      x = env->step(x, turn, env->zero_robot_action());
      heading = k * yaw * dt;
      hx += v * std::cos(heading) * dt;
      hy += v * std::sin(heading) * dt;
      rx += 22.0 * dt;
      if (k % 5 == 0) {
        const auto phi = env->features(x);
        CHECK(phi[0] == doctest::Approx(std::hypot(hx - rx, hy - 1.85)).epsilon(1e-12));
        CHECK(phi[1] == doctest::Approx(22.0).epsilon(1e-12));
        CHECK(phi[2] == doctest::Approx(std::tanh(-heading / 0.3)).epsilon(1e-12));
        CHECK(phi[2] > 0.0);
        ++checked;
      }
    }
    CHECK(checked == 5);
  }
  SUBCASE("collision flag tracks footprint overlap") {
    auto* hw = dynamic_cast<HighwayEnv*>(env.get());
    REQUIRE(hw != nullptr);
    CHECK(hw->collision(StateVector{0, 1.85, 0, 20, -4.0, 1.85, 0, 20}));
    CHECK_FALSE(hw->collision(StateVector{0, 1.85, 0, 20, -5.0, 1.85, 0, 20}));
    CHECK_FALSE(hw->collision(StateVector{0, 1.85, 0, 20, -1.0, -1.85, 0, 20}));
  }
}

TEST_CASE("action grid covers the box lexicographically") {
  const auto grid = action_grid(2, 1.0, 3);
  REQUIRE(grid.size() == 9);
  CHECK(grid.front() == Vector{{-1.0, -1.0}});
  CHECK(grid[1] == Vector{{-1.0, 0.0}});
  CHECK(grid.back() == Vector{{1.0, 1.0}});
}

namespace {

// Independent exhaustive planner: nested loops over the per-axis grid, same tie-break.
Vector brute_force_plan(const Environment& env, const StateVector& x, const ParamVector& theta, int p, int H) {
  const std::size_t m = env.robot_action_dim();
  const double b = env.settings().action_bound;
  std::size_t total = 1;
  for (std::size_t i = 0; i < m; ++i) total *= static_cast<std::size_t>(p);
  Vector best_u;
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t idx = 0; idx < total; ++idx) {
    Vector u(static_cast<Eigen::Index>(m));
    std::size_t rem = idx;
    for (std::size_t k = m; k-- > 0;) {
      const auto level = static_cast<double>(rem % static_cast<std::size_t>(p));
      u[static_cast<Eigen::Index>(k)] = -b + 2.0 * b * level / (p - 1);
      rem /= static_cast<std::size_t>(p);
    }
    StateVector s = x;
    double value = 0.0;
    for (int h = 0; h < H; ++h) {
      s = env.step(s, env.zero_human_action(), ActionVector(u, b));
      const auto phi = env.features(s);
      for (std::size_t j = 0; j < phi.size(); ++j) value += theta[j] * phi[j];
    }
    if (value > best) {
      best = value;
      best_u = u;
    }
  }
  return best_u;
}

}  // namespace

TEST_CASE("planner") {
  SUBCASE("zero theta ties every candidate and picks the lowest index") {
    for (const char* name : {"robot", "demo2d", "highway"}) {
      const auto env = make_environment(name);
      Rng rng(1);
      const auto u = plan(*env, env->start_state(rng), ParamVector::zeros(env->theta_dim()), 5);
      CHECK(u.values == Vector::Constant(static_cast<Eigen::Index>(env->robot_action_dim()), -1.0));
    }
  }
  SUBCASE("approaching the cup moves toward it") {
    const auto env = make_environment("robot");
    Rng rng(2);
    for (int trial = 0; trial < 50; ++trial) {
      const StateVector x = env->start_state(rng);
      const auto u = plan(*env, x, ParamVector{1.0, 0.0}, 5);
      CHECK(u.values.dot(Vector{{0.6, 0.15, 0.0}} - x.values) > 0.0);
    }
  }
  SUBCASE("matches exhaustive search over the full candidate set") {
    Rng rng(3);
    for (const char* name : {"robot", "demo2d", "highway"}) {
      const auto env = make_environment(name);
      for (int trial = 0; trial < 30; ++trial) {
        const StateVector x = env->sample_state(rng);
        const ParamVector th(random_vector(rng, static_cast<Eigen::Index>(env->theta_dim())));
        const auto& ps = env->settings().planner;
        CHECK(plan(*env, x, th, ps).values == brute_force_plan(*env, x, th, ps.resolution, ps.lookahead));
      }
    }
  }
  SUBCASE("positive rescaling of theta leaves the plan unchanged") {
    Rng rng(4);
    std::uniform_real_distribution<double> scale(0.05, 20.0);
    for (const char* name : {"robot", "demo2d", "highway"}) {
      const auto env = make_environment(name);
      for (int trial = 0; trial < 50; ++trial) {
        const StateVector x = env->sample_state(rng);
        const ParamVector th(random_vector(rng, static_cast<Eigen::Index>(env->theta_dim())));
        const double c = scale(rng);
        CHECK(plan(*env, x, th, 5).values == plan(*env, x, ParamVector(Vector(c * th.values)), 5).values);
      }
    }
  }
}

TEST_CASE("planned trajectory has T + 1 states consistent with the dynamics") {
  const auto env = make_environment("demo2d");
  Rng rng(8);
  const StateVector x0 = env->start_state(rng);
  const ParamVector th{-1.0};
  const Trajectory xi = planned_trajectory(*env, x0, th);
  REQUIRE(xi.states.size() == static_cast<std::size_t>(env->settings().horizon) + 1);
  for (std::size_t t = 0; t + 1 < xi.states.size(); ++t) {
    const auto u = plan(*env, xi.states[t], th, env->settings().planner);
    CHECK(env->step(xi.states[t], env->zero_human_action(), u) == xi.states[t + 1]);
  }
}

TEST_CASE("environment construction") {
  CHECK_THROWS_AS(make_environment("carla"), std::invalid_argument);
  EnvSettings s = default_settings("robot");
  s.dt = 0.0;
  CHECK_THROWS_AS(make_environment("robot", s), std::invalid_argument);
  CHECK(make_environment("robot")->settings().window == 5);
  CHECK(make_environment("highway")->settings().horizon == 60);
  CHECK(make_environment("demo2d")->theta_dim() == 1);
}
