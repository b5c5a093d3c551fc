#include "strol/lyapunov.hpp"

#include <cmath>
#include <ostream>
#include <stdexcept>

namespace strol {

double lyapunov_candidate(const ErrorVector& e) { return e.values.squaredNorm(); }

double stability_margin(const ErrorVector& e, const ParamDelta& gtilde, double alpha) {
  require_dim("stability_margin", e.size(), gtilde.size());
  return alpha * alpha * gtilde.values.squaredNorm() - 2.0 * alpha * e.values.dot(gtilde.values);
}

bool margin_equivalence_check(const ErrorVector& e, const ParamDelta& gtilde, double alpha, double tol) {
  const double margin = stability_margin(e, gtilde, alpha);
  const double direct = (e.values - alpha * gtilde.values).squaredNorm() - e.values.squaredNorm();
  auto sign = [tol](double v) { return std::abs(v) <= tol ? 0 : (v > 0 ? 1 : -1); };
  const int a = sign(margin), b = sign(direct);
  if (a == b) return true;
  // One side inside the zero band, the other just outside it.
  return std::abs(margin - direct) <= tol;
}

StabilityRecord StabilityRecord::make(const ErrorVector& e, const ParamDelta& gtilde, double alpha) {
  if (!(alpha > 0.0)) throw std::invalid_argument("stability record: learning rate must be positive");
  return {e, gtilde, alpha, lyapunov_candidate(e), stability_margin(e, gtilde, alpha)};
}

double training_loss(std::span<const StabilityRecord> records) {
  if (records.empty()) throw std::invalid_argument("training_loss: empty record list");
  double total = 0.0;
  for (const auto& r : records) total += r.margin;
  return total;
}

double BasinMap::converged_fraction() const {
  if (converged.empty()) return 0.0;
  std::size_t n = 0;
  for (int c : converged) n += c >= 0 ? 1 : 0;
  return static_cast<double>(n) / static_cast<double>(converged.size());
}

double BasinMap::fraction_to_mode(int mode) const {
  if (converged.empty()) return 0.0;
  std::size_t n = 0;
  for (int c : converged) n += c == mode ? 1 : 0;
  return static_cast<double>(n) / static_cast<double>(converged.size());
}

namespace {

int nearest_mode_within(const ParamVector& theta, std::span<const ParamVector> modes, double tol) {
  for (std::size_t k = 0; k < modes.size(); ++k)
    if ((theta.values - modes[k].values).cwiseAbs().maxCoeff() <= tol) return static_cast<int>(k);
  return -1;
}

}  // namespace

BasinMap basin_map(const Environment& env, const RuleFn& rule, const ParamVector& theta_start,
                   const StateVector& x_start, std::span<const ParamVector> modes, const BasinSettings& settings) {
  if (modes.empty()) throw std::invalid_argument("basin_map: no modes given");
  if (settings.steps < 1 || settings.resolution < 1) throw std::invalid_argument("basin_map: steps and resolution must be >= 1");
  for (const auto& m : modes) require_dim("basin mode", env.theta_dim(), m.size());
  require_dim("basin theta_start", env.theta_dim(), theta_start.size());

  const double bound = env.settings().action_bound;
  const double alpha = env.settings().alpha;
  BasinMap map;
  map.resolution = settings.resolution;
  map.settings = settings;
  for (const auto& u : action_grid(env.human_action_dim(), bound, settings.resolution)) map.action_grid.emplace_back(u, bound);

  const std::size_t cells = map.action_grid.size();
  map.converged.assign(cells, -1);
  map.steps_to_converge.assign(cells, -1);
  map.final_theta.assign(cells, theta_start);

  for (std::size_t c = 0; c < cells; ++c) {
    LearningContext ctx{x_start, map.action_grid[c], env.zero_robot_action(), theta_start, alpha};
    int settled_at = -1;
    int settled_mode = -1;
    for (int t = 1; t <= settings.steps; ++t) {
      ctx.u_r = plan(env, x_start, ctx.theta, env.settings().planner);
      ctx.theta = step_estimate(env, ctx.theta, rule(ctx), alpha);
      const int mode = nearest_mode_within(ctx.theta, modes, settings.tolerance);
      if (mode != settled_mode) {
        settled_mode = mode;
        settled_at = t;
      }
    }
    map.final_theta[c] = ctx.theta;
    if (settled_mode >= 0) {
      map.converged[c] = settled_mode;
      map.steps_to_converge[c] = settled_at;
    }
  }
  return map;
}

void write_basin_csv(std::ostream& out, const BasinMap& map, const std::string& label) {
  const std::size_t m = map.action_grid.empty() ? 0 : map.action_grid.front().size();
  out << "# basin label=" << label << " resolution=" << map.resolution << " action_dim=" << m
      << " steps=" << map.settings.steps << " tolerance=" << map.settings.tolerance
      << " converged_fraction=" << map.converged_fraction() << "\n";
  for (std::size_t k = 0; k < m; ++k) out << "u" << (k + 1) << ",";
  out << "mode_index,steps_to_converge\n";
  const auto old_precision = out.precision(17);
  for (std::size_t c = 0; c < map.action_grid.size(); ++c) {
    for (std::size_t k = 0; k < m; ++k) out << map.action_grid[c][k] << ",";
    out << map.converged[c] << "," << map.steps_to_converge[c] << "\n";
  }
  out.precision(old_precision);
}

}  // namespace strol
