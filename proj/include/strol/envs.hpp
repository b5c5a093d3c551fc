#pragma once

// Simulation environments: state dynamics, feature maps, action boxes, and the
// receding-horizon planner the robot agent uses in each of them.

#include "strol/core.hpp"
#include "strol/random.hpp"

#include <nlohmann/json.hpp>

#include <memory>
#include <string>
#include <vector>

namespace strol {

struct PlannerSettings {
  int resolution = 5;  ///< grid points per robot action axis
  int lookahead = 5;   ///< rollout length H
};

/// Task-level settings shared by every environment.
struct EnvSettings {
  double dt = 0.1;             ///< seconds per step
  int horizon = 30;            ///< T
  int window = 5;              ///< steps during which the human corrects
  double alpha = 1.0;          ///< learning rate
  double action_bound = 1.0;   ///< every action lives in [-bound, bound]^m
  double theta_bound = 1.0;    ///< parameter box [-b, b]^d
  bool clamp_theta = true;
  int teach_resolution = 9;    ///< q, per-axis grid of the optimal-action search
  PlannerSettings planner;
};

class Environment {
 public:
  explicit Environment(EnvSettings settings);
  virtual ~Environment() = default;

  virtual std::string name() const = 0;
  virtual std::size_t state_dim() const = 0;
  virtual std::size_t human_action_dim() const = 0;
  virtual std::size_t robot_action_dim() const = 0;
  virtual std::size_t theta_dim() const = 0;

  /// x' = f(x, u_H, u_R). Actions outside the box are clipped first.
  virtual StateVector step(const StateVector& x, const ActionVector& u_h, const ActionVector& u_r) const = 0;
  virtual FeatureVector features(const StateVector& x) const = 0;
  virtual std::vector<std::string> feature_names() const = 0;

  /// Training-time state distribution (uniform over the reachable region).
  virtual StateVector sample_state(Rng& rng) const = 0;
  /// Episode start-state distribution.
  virtual StateVector start_state(Rng& rng) const = 0;
  /// State as seen by the correction network: same length, rescaled to O(1).
  virtual Vector net_state(const StateVector& x) const;
  virtual nlohmann::json geometry() const = 0;

  const EnvSettings& settings() const { return settings_; }
  EnvSettings& mutable_settings() { return settings_; }
  RewardModel reward_model() const;

  ActionVector zero_human_action() const;
  ActionVector zero_robot_action() const;
  ActionVector clip_human(const Vector& u) const;
  ActionVector clip_robot(const Vector& u) const;

 protected:
  void check_step_args(const StateVector& x, const ActionVector& u_h, const ActionVector& u_r) const;

 private:
  EnvSettings settings_;
};

/// A named point in the scene (meters).
struct SceneObject {
  std::string name;
  Vector position;
};

/// End-effector point mass under velocity control: x' = x + (u_R + u_H) * speed * dt.
/// Features are negated distances to each object, optionally followed by a
/// table-height feature and an upright-orientation feature.
struct PointScene {
  std::string name = "robot";
  int spatial_dim = 3;
  std::vector<SceneObject> objects;
  bool table_feature = false;
  double table_height = 0.0;
  bool orientation_feature = false;  ///< adds a tilt state/action component
  double max_speed = 1.0;            ///< m/s at |u| = 1
  Vector workspace_lo, workspace_hi;
  Vector start_lo, start_hi;

  static PointScene robot();
  static PointScene demo2d();
};

class PointMassEnv final : public Environment {
 public:
  PointMassEnv(PointScene scene, EnvSettings settings);

  std::string name() const override { return scene_.name; }
  std::size_t state_dim() const override { return dim_; }
  std::size_t human_action_dim() const override { return dim_; }
  std::size_t robot_action_dim() const override { return dim_; }
  std::size_t theta_dim() const override;

  StateVector step(const StateVector& x, const ActionVector& u_h, const ActionVector& u_r) const override;
  FeatureVector features(const StateVector& x) const override;
  std::vector<std::string> feature_names() const override;
  StateVector sample_state(Rng& rng) const override;
  StateVector start_state(Rng& rng) const override;
  Vector net_state(const StateVector& x) const override;
  nlohmann::json geometry() const override;

  const PointScene& scene() const { return scene_; }

 private:
  PointScene scene_;
  std::size_t dim_;
};

/// Two cars on a two-lane road, robot ahead of the human in the left lane.
/// State: [x_r, y_r, heading_r, v_r, x_h, y_h, heading_h, v_h].
/// Action of each car: [acceleration, yaw rate], normalized to the action box.
struct HighwayScene {
  double lane_width = 3.7;
  double max_accel = 3.0;     ///< m/s^2 at |u| = 1
  double max_yaw_rate = 0.5;  ///< rad/s at |u| = 1
  double heading_scale = 0.3; ///< rad; lane-change indicator = tanh(-heading_h / scale)
  double start_gap_min = 8.0, start_gap_max = 20.0;
  double speed_min = 18.0, speed_max = 22.0;

  double left_lane_y() const { return 0.5 * lane_width; }
  double right_lane_y() const { return -0.5 * lane_width; }
};

class HighwayEnv final : public Environment {
 public:
  HighwayEnv(HighwayScene scene, EnvSettings settings);

  std::string name() const override { return "highway"; }
  std::size_t state_dim() const override { return 8; }
  std::size_t human_action_dim() const override { return 2; }
  std::size_t robot_action_dim() const override { return 2; }
  std::size_t theta_dim() const override { return 3; }

  StateVector step(const StateVector& x, const ActionVector& u_h, const ActionVector& u_r) const override;
  FeatureVector features(const StateVector& x) const override;
  std::vector<std::string> feature_names() const override;
  StateVector sample_state(Rng& rng) const override;
  StateVector start_state(Rng& rng) const override;
  Vector net_state(const StateVector& x) const override;
  nlohmann::json geometry() const override;

  /// True when the two car footprints (4.5 m x 1.8 m, axis-aligned) overlap.
  bool collision(const StateVector& x) const;
  const HighwayScene& scene() const { return scene_; }

 private:
  HighwayScene scene_;
};

EnvSettings default_settings(const std::string& env_name);
/// Builds one of {"robot", "highway", "demo2d"} with its default scene.
std::unique_ptr<Environment> make_environment(const std::string& name, const EnvSettings& settings);
std::unique_ptr<Environment> make_environment(const std::string& name);

// --- planner ---------------------------------------------------------------

/// Per-axis grid over [-bound, bound]^dim, lexicographic with axis 0 slowest.
std::vector<Vector> action_grid(std::size_t dim, double bound, int resolution);

/// Receding-horizon planner: among constant robot actions on the grid, returns
/// the first action of the rollout (u_H = 0, `lookahead` steps) with the
/// largest cumulative reward under theta. Ties go to the lowest grid index.
ActionVector plan(const Environment& env, const StateVector& x, const ParamVector& theta, int lookahead);
ActionVector plan(const Environment& env, const StateVector& x, const ParamVector& theta,
                  const PlannerSettings& planner);

/// Trajectory the robot executes alone (u_H = 0) when replanning every step
/// under a fixed theta, `steps` transitions from x0.
Trajectory planned_trajectory(const Environment& env, const StateVector& x0, const ParamVector& theta,
                              int steps, const PlannerSettings& planner);
Trajectory planned_trajectory(const Environment& env, const StateVector& x0, const ParamVector& theta);

}  // namespace strol
