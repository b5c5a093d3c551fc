#include "strol/humansim.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace strol {

Prior Prior::mixture(std::vector<PriorMode> modes, std::string id) {
  Prior p;
  p.kind = Kind::Mixture;
  p.id = std::move(id);
  double total = 0.0;
  for (const auto& m : modes) total += m.weight;
  if (!(total > 0.0)) throw std::invalid_argument("prior mixture weights must sum to a positive value");
  for (auto& m : modes) {
    m.weight /= total;
    if (m.covariance.size() == 0) m.covariance = Vector::Zero(m.mean.values.size());
  }
  p.modes = std::move(modes);
  p.validate();
  return p;
}

Prior Prior::uniform_box(Vector lo, Vector hi, std::string id) {
  Prior p;
  p.kind = Kind::UniformBox;
  p.id = std::move(id);
  p.box_lo = std::move(lo);
  p.box_hi = std::move(hi);
  p.validate();
  return p;
}

std::size_t Prior::dim() const {
  if (kind == Kind::UniformBox) return static_cast<std::size_t>(box_lo.size());
  return modes.empty() ? 0 : modes.front().mean.size();
}

void Prior::validate() const {
  if (kind == Kind::UniformBox) {
    require_dim("prior box", static_cast<std::size_t>(box_lo.size()), static_cast<std::size_t>(box_hi.size()));
    if (box_lo.size() == 0) throw std::invalid_argument("prior box must have at least one dimension");
    if ((box_lo.array() > box_hi.array()).any()) throw std::invalid_argument("prior box bounds are not ordered");
    return;
  }
  if (modes.empty()) throw std::invalid_argument("prior mixture needs at least one mode");
  double total = 0.0;
  for (const auto& m : modes) {
    require_dim("prior mode", dim(), m.mean.size());
    require_dim("prior mode covariance", dim(), static_cast<std::size_t>(m.covariance.size()));
    if (!(m.weight >= 0.0)) throw std::invalid_argument("prior mode weights must be non-negative");
    if ((m.covariance.array() < 0.0).any()) throw std::invalid_argument("prior mode variances must be non-negative");
    total += m.weight;
  }
  if (std::abs(total - 1.0) > 1e-9) throw std::invalid_argument("prior mixture weights must sum to 1");
}

ParamVector Prior::mean() const {
  if (kind == Kind::UniformBox) return ParamVector(0.5 * (box_lo + box_hi));
  Vector m = Vector::Zero(static_cast<Eigen::Index>(dim()));
  for (const auto& mode : modes) m += mode.weight * mode.mean.values;
  return ParamVector(std::move(m));
}

std::vector<ParamVector> Prior::mode_means() const {
  if (kind == Kind::UniformBox) return {mean()};
  std::vector<ParamVector> out;
  for (const auto& m : modes) out.push_back(m.mean);
  return out;
}

ParamVector sample_theta(const Prior& prior, Rng& rng, double theta_bound) {
  Vector theta(static_cast<Eigen::Index>(prior.dim()));
  if (prior.kind == Prior::Kind::UniformBox) {
    for (Eigen::Index i = 0; i < theta.size(); ++i)
      theta[i] = std::uniform_real_distribution<double>(prior.box_lo[i], prior.box_hi[i])(rng);
  } else {
    std::uniform_real_distribution<double> pick(0.0, 1.0);
    const double r = pick(rng);
    std::size_t k = 0;
    double acc = prior.modes[0].weight;
    while (r >= acc && k + 1 < prior.modes.size()) acc += prior.modes[++k].weight;
    const auto& mode = prior.modes[k];
    std::normal_distribution<double> normal(0.0, 1.0);
    for (Eigen::Index i = 0; i < theta.size(); ++i) {
      const double sd = std::sqrt(mode.covariance[i]);
      theta[i] = mode.mean.values[i] + (sd > 0.0 ? sd * normal(rng) : 0.0);
    }
  }
  return ParamVector(theta.cwiseMax(-theta_bound).cwiseMin(theta_bound));
}

ParamVector sample_theta(const Prior& prior, std::uint64_t seed, double theta_bound) {
  Rng rng(seed);
  return sample_theta(prior, rng, theta_bound);
}

namespace {

// Teaching objective with the uncorrected next-state features precomputed.
struct TeachingProblem {
  const Environment& env;
  Vector target;  ///< theta* - theta
  const StateVector& x;
  const ActionVector& u_r;
  Vector phi_robot;
  double alpha;

  double operator()(const Vector& u_h) const {
    const ActionVector uh(u_h, env.settings().action_bound);
    const Vector g = env.features(env.step(x, uh, u_r)).values - phi_robot;
    return (target - alpha * g).norm();
  }
};

TeachingProblem make_problem(const Environment& env, const ParamVector& theta_star, const ParamVector& theta,
                             const StateVector& x, const ActionVector& u_r, double alpha) {
  require_dim("teaching theta*", env.theta_dim(), theta_star.size());
  require_dim("teaching theta", env.theta_dim(), theta.size());
  Vector phi_r = env.features(env.step(x, env.zero_human_action(), u_r)).values;
  return {env, theta_star.values - theta.values, x, u_r, std::move(phi_r), alpha};
}

}  // namespace

double teaching_objective(const Environment& env, const ParamVector& theta_star, const ParamVector& theta,
                          const StateVector& x, const ActionVector& u_r, double alpha, const Vector& u_h) {
  return make_problem(env, theta_star, theta, x, u_r, alpha)(u_h);
}

ActionVector optimal_action(const Environment& env, const ParamVector& theta_star, const ParamVector& theta,
                            const StateVector& x, const ActionVector& u_r, double alpha, int resolution) {
  if (resolution < 2) throw std::invalid_argument("optimal_action: grid resolution must be >= 2");
  const auto problem = make_problem(env, theta_star, theta, x, u_r, alpha);
  const double bound = env.settings().action_bound;
  const std::size_t m = env.human_action_dim();

  Vector best;
  double best_value = std::numeric_limits<double>::infinity();
  for (const auto& u : action_grid(m, bound, resolution)) {
    const double v = problem(u);
    if (v < best_value) {
      best_value = v;
      best = u;
    }
  }

  // Refinement: same resolution over +-one coarse spacing around the best point.
  const double spacing = 2.0 * bound / (resolution - 1);
  const Vector center = best;
  for (const auto& offset : action_grid(m, spacing, resolution)) {
    const Vector u = (center + offset).cwiseMax(-bound).cwiseMin(bound);
    const double v = problem(u);
    if (v < best_value) {
      best_value = v;
      best = u;
    }
  }
  return {best, bound};
}

ActionVector optimal_action(const Environment& env, const ParamVector& theta_star, const ParamVector& theta,
                            const StateVector& x, const ActionVector& u_r, double alpha) {
  return optimal_action(env, theta_star, theta, x, u_r, alpha, env.settings().teach_resolution);
}

Vector HumanNoise::bias_for(std::size_t m) const {
  if (bias.size() == 0) return Vector::Zero(static_cast<Eigen::Index>(m));
  require_dim("human bias", m, static_cast<std::size_t>(bias.size()));
  return bias;
}

ActionVector noisy_action(const ActionVector& u_star, const HumanNoise& noise, Rng& rng) {
  if (!(noise.sigma >= 0.0)) throw std::invalid_argument("human noise sigma must be >= 0");
  const Vector eps = noise.bias_for(u_star.size());
  const double sd = noise.sigma * u_star.bound;
  Vector u = u_star.values + eps;
  if (sd > 0.0) {
    std::normal_distribution<double> normal(0.0, 1.0);
    for (Eigen::Index i = 0; i < u.size(); ++i) u[i] += sd * normal(rng);
  }
  return ActionVector::clipped(u, u_star.bound);
}

ActionVector noisy_action(const ActionVector& u_star, const HumanNoise& noise, std::uint64_t seed) {
  Rng rng(seed);
  return noisy_action(u_star, noise, rng);
}

}  // namespace strol
