#include "strol/envs.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace strol {

namespace {

Vector uniform_in_box(const Vector& lo, const Vector& hi, Rng& rng) {
  Vector out(lo.size());
  for (Eigen::Index i = 0; i < lo.size(); ++i) {
    std::uniform_real_distribution<double> dist(lo[i], hi[i]);
    out[i] = dist(rng);
  }
  return out;
}

double uniform(double lo, double hi, Rng& rng) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

nlohmann::json to_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

}  // namespace

Environment::Environment(EnvSettings settings) : settings_(settings) {
  if (!(settings_.dt > 0.0)) throw std::invalid_argument("environment dt must be positive");
  if (settings_.horizon < 1) throw std::invalid_argument("environment horizon must be >= 1");
  if (settings_.window < 0) throw std::invalid_argument("correction window must be >= 0");
  if (!(settings_.alpha >= 0.0)) throw std::invalid_argument("learning rate must be >= 0");
  if (settings_.planner.resolution < 1 || settings_.planner.lookahead < 1)
    throw std::invalid_argument("planner resolution and lookahead must be >= 1");
}

Vector Environment::net_state(const StateVector& x) const { return x.values; }

RewardModel Environment::reward_model() const {
  RewardModel model;
  model.feature_map = [this](const StateVector& x) { return features(x); };
  model.dim = theta_dim();
  model.description = name() + " linear reward";
  return model;
}

ActionVector Environment::zero_human_action() const {
  return ActionVector::zeros(human_action_dim(), settings_.action_bound);
}

ActionVector Environment::zero_robot_action() const {
  return ActionVector::zeros(robot_action_dim(), settings_.action_bound);
}

ActionVector Environment::clip_human(const Vector& u) const {
  require_dim("human action", human_action_dim(), static_cast<std::size_t>(u.size()));
  return ActionVector::clipped(u, settings_.action_bound);
}

ActionVector Environment::clip_robot(const Vector& u) const {
  require_dim("robot action", robot_action_dim(), static_cast<std::size_t>(u.size()));
  return ActionVector::clipped(u, settings_.action_bound);
}

void Environment::check_step_args(const StateVector& x, const ActionVector& u_h, const ActionVector& u_r) const {
  require_dim("state", state_dim(), x.size());
  require_dim("human action", human_action_dim(), u_h.size());
  require_dim("robot action", robot_action_dim(), u_r.size());
}

// --- point mass --------------------------------------------------------------

PointScene PointScene::robot() {
  PointScene s;
  s.name = "robot";
  s.spatial_dim = 3;
  s.objects = {{"cup", Vector{{0.6, 0.15, 0.0}}}, {"plate", Vector{{0.6, -0.15, 0.0}}}};
  s.workspace_lo = Vector{{-0.3, -0.4, 0.0}};
  s.workspace_hi = Vector{{0.3, 0.4, 0.4}};
  s.start_lo = Vector{{-0.3, -0.3, 0.1}};
  s.start_hi = Vector{{0.0, 0.3, 0.3}};
  return s;
}

PointScene PointScene::demo2d() {
  PointScene s;
  s.name = "demo2d";
  s.spatial_dim = 2;
  s.objects = {{"laptop", Vector{{0.5, 0.0}}}};
  s.workspace_lo = Vector{{-0.5, -0.5}};
  s.workspace_hi = Vector{{0.3, 0.5}};
  s.start_lo = Vector{{-0.1, -0.1}};
  s.start_hi = Vector{{0.1, 0.1}};
  return s;
}

PointMassEnv::PointMassEnv(PointScene scene, EnvSettings settings)
    : Environment(settings), scene_(std::move(scene)) {
  if (scene_.spatial_dim != 2 && scene_.spatial_dim != 3)
    throw std::invalid_argument("point scene must be planar or spatial");
  if (scene_.table_feature && scene_.spatial_dim != 3)
    throw std::invalid_argument("table-height feature needs a 3-D scene");
  dim_ = static_cast<std::size_t>(scene_.spatial_dim) + (scene_.orientation_feature ? 1 : 0);
  for (const auto& obj : scene_.objects)
    require_dim(("object " + obj.name).c_str(), static_cast<std::size_t>(scene_.spatial_dim),
                static_cast<std::size_t>(obj.position.size()));
  for (const Vector* box : {&scene_.workspace_lo, &scene_.workspace_hi, &scene_.start_lo, &scene_.start_hi})
    require_dim("scene box", static_cast<std::size_t>(scene_.spatial_dim), static_cast<std::size_t>(box->size()));
  if (theta_dim() == 0) throw std::invalid_argument("point scene defines no features");
  if (theta_dim() > static_cast<std::size_t>(kMaxSmallDim))
    throw std::invalid_argument("point scene defines more than " + std::to_string(kMaxSmallDim) + " features");
}

std::size_t PointMassEnv::theta_dim() const {
  return scene_.objects.size() + (scene_.table_feature ? 1 : 0) + (scene_.orientation_feature ? 1 : 0);
}

StateVector PointMassEnv::step(const StateVector& x, const ActionVector& u_h, const ActionVector& u_r) const {
  check_step_args(x, u_h, u_r);
  const double b = settings().action_bound;
  Vector v = u_h.values.cwiseMax(-b).cwiseMin(b) + u_r.values.cwiseMax(-b).cwiseMin(b);
  return StateVector(x.values + v * (scene_.max_speed * settings().dt));
}

FeatureVector PointMassEnv::features(const StateVector& x) const {
  require_dim("state", dim_, x.size());
  const auto k = static_cast<Eigen::Index>(scene_.spatial_dim);
  const auto pos = x.values.head(k);
  Vector phi(static_cast<Eigen::Index>(theta_dim()));
  Eigen::Index i = 0;
  for (const auto& obj : scene_.objects) phi[i++] = -(pos - obj.position).norm();
  if (scene_.table_feature) phi[i++] = -(pos[2] - scene_.table_height);
  if (scene_.orientation_feature) phi[i++] = -x.values[k] * x.values[k];
  return FeatureVector(std::move(phi));
}

std::vector<std::string> PointMassEnv::feature_names() const {
  std::vector<std::string> names;
  for (const auto& obj : scene_.objects) names.push_back(obj.name);
  if (scene_.table_feature) names.emplace_back("table");
  if (scene_.orientation_feature) names.emplace_back("upright");
  return names;
}

StateVector PointMassEnv::sample_state(Rng& rng) const {
  Vector x = Vector::Zero(static_cast<Eigen::Index>(dim_));
  x.head(scene_.spatial_dim) = uniform_in_box(scene_.workspace_lo, scene_.workspace_hi, rng);
  if (scene_.orientation_feature) x[scene_.spatial_dim] = uniform(-0.5, 0.5, rng);
  return StateVector(std::move(x));
}

StateVector PointMassEnv::start_state(Rng& rng) const {
  Vector x = Vector::Zero(static_cast<Eigen::Index>(dim_));
  x.head(scene_.spatial_dim) = uniform_in_box(scene_.start_lo, scene_.start_hi, rng);
  if (scene_.orientation_feature) x[scene_.spatial_dim] = uniform(-0.3, 0.3, rng);
  return StateVector(std::move(x));
}

Vector PointMassEnv::net_state(const StateVector& x) const {
  Vector out = x.values;
  const auto k = static_cast<Eigen::Index>(scene_.spatial_dim);
  const Vector center = 0.5 * (scene_.workspace_lo + scene_.workspace_hi);
  const Vector half = (0.5 * (scene_.workspace_hi - scene_.workspace_lo)).cwiseMax(1e-9);
  out.head(k) = (x.values.head(k) - center).cwiseQuotient(half);
  return out;
}

nlohmann::json PointMassEnv::geometry() const {
  nlohmann::json objects = nlohmann::json::array();
  for (const auto& obj : scene_.objects) objects.push_back({{"name", obj.name}, {"position", to_json(obj.position)}});
  nlohmann::json g = {{"spatial_dim", scene_.spatial_dim},
                      {"objects", objects},
                      {"max_speed", scene_.max_speed},
                      {"workspace", {{"lo", to_json(scene_.workspace_lo)}, {"hi", to_json(scene_.workspace_hi)}}},
                      {"action_bound", settings().action_bound},
                      {"features", feature_names()}};
  if (scene_.table_feature) g["table_height"] = scene_.table_height;
  return g;
}

// --- highway -----------------------------------------------------------------

namespace {

// Semi-implicit Euler for one car: speed and heading first, then position
// along the new heading. Speed never goes negative.
void advance_car(Vector& x, Eigen::Index base, double accel, double yaw_rate, double dt) {
  const double v = std::max(0.0, x[base + 3] + accel * dt);
  const double h = x[base + 2] + yaw_rate * dt;
  x[base + 0] += v * std::cos(h) * dt;
  x[base + 1] += v * std::sin(h) * dt;
  x[base + 2] = h;
  x[base + 3] = v;
}

}  // namespace

HighwayEnv::HighwayEnv(HighwayScene scene, EnvSettings settings) : Environment(settings), scene_(scene) {
  if (!(scene_.heading_scale > 0.0)) throw std::invalid_argument("heading scale must be positive");
}

StateVector HighwayEnv::step(const StateVector& x, const ActionVector& u_h, const ActionVector& u_r) const {
  check_step_args(x, u_h, u_r);
  const double b = settings().action_bound;
  const double dt = settings().dt;
  auto c = [b](double u) { return std::clamp(u, -b, b); };
  Vector next = x.values;
  advance_car(next, 0, c(u_r[0]) * scene_.max_accel, c(u_r[1]) * scene_.max_yaw_rate, dt);
  advance_car(next, 4, c(u_h[0]) * scene_.max_accel, c(u_h[1]) * scene_.max_yaw_rate, dt);
  return StateVector(std::move(next));
}

FeatureVector HighwayEnv::features(const StateVector& x) const {
  require_dim("state", 8, x.size());
  const double dx = x[4] - x[0];
  const double dy = x[5] - x[1];
  // Free lane is to the right (negative y), so a clockwise heading signals a lane change.
  return FeatureVector{std::hypot(dx, dy), x[3], std::tanh(-x[6] / scene_.heading_scale)};
}

std::vector<std::string> HighwayEnv::feature_names() const { return {"distance", "speed", "lane_change"}; }

StateVector HighwayEnv::sample_state(Rng& rng) const {
  const double y = scene_.left_lane_y();
  const double xr = 0.0;
  Vector x(8);
  x << xr, y + uniform(-0.5, 0.5, rng), uniform(-0.1, 0.1, rng), uniform(scene_.speed_min - 3, scene_.speed_max + 3, rng),
      xr - uniform(scene_.start_gap_min - 3, scene_.start_gap_max + 5, rng), y + uniform(-1.5, 0.5, rng),
      uniform(-0.3, 0.3, rng), uniform(scene_.speed_min - 3, scene_.speed_max + 3, rng);
  return StateVector(std::move(x));
}

StateVector HighwayEnv::start_state(Rng& rng) const {
  const double y = scene_.left_lane_y();
  const double xr = uniform(0.0, 10.0, rng);
  Vector x(8);
  x << xr, y, 0.0, uniform(scene_.speed_min, scene_.speed_max, rng),
      xr - uniform(scene_.start_gap_min, scene_.start_gap_max, rng), y, 0.0,
      uniform(scene_.speed_min, scene_.speed_max, rng);
  return StateVector(std::move(x));
}

Vector HighwayEnv::net_state(const StateVector& x) const {
  // Longitudinal positions are expressed relative to the robot car.
  const double v_mid = 0.5 * (scene_.speed_min + scene_.speed_max);
  Vector out(8);
  out << 0.0, x[1] / scene_.lane_width, x[2] / scene_.heading_scale, (x[3] - v_mid) / 5.0, (x[4] - x[0]) / 20.0,
      x[5] / scene_.lane_width, x[6] / scene_.heading_scale, (x[7] - v_mid) / 5.0;
  return out;
}

nlohmann::json HighwayEnv::geometry() const {
  return {{"lanes", 2},
          {"lane_width", scene_.lane_width},
          {"lane_centers", {scene_.left_lane_y(), scene_.right_lane_y()}},
          {"max_accel", scene_.max_accel},
          {"max_yaw_rate", scene_.max_yaw_rate},
          {"action_bound", settings().action_bound},
          {"features", feature_names()}};
}

bool HighwayEnv::collision(const StateVector& x) const {
  return std::abs(x[4] - x[0]) < 4.5 && std::abs(x[5] - x[1]) < 1.8;
}

// --- factory -------------------------------------------------------------------

EnvSettings default_settings(const std::string& env_name) {
  EnvSettings s;
  if (env_name == "robot") {
    s.horizon = 30;
    s.alpha = 4.0;
  } else if (env_name == "highway") {
    s.horizon = 60;
    s.alpha = 1.0;
  } else if (env_name == "demo2d") {
    s.horizon = 30;
    s.alpha = 1.0;
  } else {
    throw std::invalid_argument("unknown environment '" + env_name + "' (expected robot, highway, or demo2d)");
  }
  return s;
}

std::unique_ptr<Environment> make_environment(const std::string& name, const EnvSettings& settings) {
  if (name == "robot") return std::make_unique<PointMassEnv>(PointScene::robot(), settings);
  if (name == "demo2d") return std::make_unique<PointMassEnv>(PointScene::demo2d(), settings);
  if (name == "highway") return std::make_unique<HighwayEnv>(HighwayScene{}, settings);
  throw std::invalid_argument("unknown environment '" + name + "' (expected robot, highway, or demo2d)");
}

std::unique_ptr<Environment> make_environment(const std::string& name) {
  return make_environment(name, default_settings(name));
}

// --- planner -------------------------------------------------------------------

std::vector<Vector> action_grid(std::size_t dim, double bound, int resolution) {
  if (resolution < 1) throw std::invalid_argument("grid resolution must be >= 1");
  std::vector<double> axis(static_cast<std::size_t>(resolution));
  for (int i = 0; i < resolution; ++i)
    axis[static_cast<std::size_t>(i)] = resolution == 1 ? 0.0 : -bound + 2.0 * bound * i / (resolution - 1);
  std::size_t count = 1;
  for (std::size_t k = 0; k < dim; ++k) count *= static_cast<std::size_t>(resolution);
  std::vector<Vector> grid;
  grid.reserve(count);
  for (std::size_t idx = 0; idx < count; ++idx) {
    Vector u(static_cast<Eigen::Index>(dim));
    std::size_t rem = idx;
    for (std::size_t k = dim; k-- > 0;) {
      u[static_cast<Eigen::Index>(k)] = axis[rem % static_cast<std::size_t>(resolution)];
      rem /= static_cast<std::size_t>(resolution);
    }
    grid.push_back(std::move(u));
  }
  return grid;
}

ActionVector plan(const Environment& env, const StateVector& x, const ParamVector& theta,
                  const PlannerSettings& planner) {
  if (planner.lookahead < 1) throw std::invalid_argument("planner lookahead must be >= 1");
  require_dim("plan theta", env.theta_dim(), theta.size());
  const double bound = env.settings().action_bound;
  const auto candidates = action_grid(env.robot_action_dim(), bound, planner.resolution);
  const ActionVector no_human = env.zero_human_action();

  std::size_t best = 0;
  double best_value = -std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    const ActionVector u_r(candidates[c], bound);
    StateVector state = x;
    double value = 0.0;
    for (int h = 0; h < planner.lookahead; ++h) {
      state = env.step(state, no_human, u_r);
      value += reward_eval(env.features(state), theta);
    }
    if (value > best_value) {
      best_value = value;
      best = c;
    }
  }
  return {candidates[best], bound};
}

ActionVector plan(const Environment& env, const StateVector& x, const ParamVector& theta, int lookahead) {
  PlannerSettings p = env.settings().planner;
  p.lookahead = lookahead;
  return plan(env, x, theta, p);
}

Trajectory planned_trajectory(const Environment& env, const StateVector& x0, const ParamVector& theta, int steps,
                              const PlannerSettings& planner) {
  Trajectory xi;
  xi.states.reserve(static_cast<std::size_t>(steps) + 1);
  xi.states.push_back(x0);
  const ActionVector no_human = env.zero_human_action();
  for (int t = 0; t < steps; ++t) {
    const auto u_r = plan(env, xi.states.back(), theta, planner);
    xi.states.push_back(env.step(xi.states.back(), no_human, u_r));
  }
  return xi;
}

Trajectory planned_trajectory(const Environment& env, const StateVector& x0, const ParamVector& theta) {
  return planned_trajectory(env, x0, theta, env.settings().horizon, env.settings().planner);
}

}  // namespace strol
