#include "strol/rules.hpp"

#include "strol/humansim.hpp"

#include <cmath>
#include <stdexcept>

namespace strol {

std::size_t correction_input_dim(const Environment& env) {
  return env.state_dim() + env.human_action_dim() + env.robot_action_dim() + env.theta_dim();
}

DynVector correction_input(const Environment& env, const LearningContext& ctx) {
  const Vector xs = env.net_state(ctx.x);
  DynVector in(static_cast<Eigen::Index>(correction_input_dim(env)));
  in << xs, ctx.u_h.values, ctx.u_r.values, ctx.theta.values;
  return in;
}

ParamDelta g_original(const LearningContext& ctx, const Environment& env) {
  require_dim("learning context theta", env.theta_dim(), ctx.theta.size());
  const StateVector x_h = env.step(ctx.x, ctx.u_h, ctx.u_r);
  const StateVector x_r = env.step(ctx.x, env.zero_human_action(), ctx.u_r);
  return ParamDelta(env.features(x_h).values - env.features(x_r).values);
}

ParamDelta g_strol(const LearningContext& ctx, const Environment& env, const CorrectionNet& net) {
  if (!net.initialized()) throw std::logic_error("strol rule: correction net is not loaded");
  ParamDelta g = g_original(ctx, env);
  const ParamDelta correction = bounded_correction(net, correction_input(env, ctx), g.values.norm());
  g.values += correction.values;
  return g;
}

ParamDelta one_at_a_time(const ParamDelta& v) {
  ParamDelta out = ParamDelta::zeros(v.size());
  if (v.size() == 0) return out;
  Eigen::Index best = 0;
  for (Eigen::Index k = 1; k < v.values.size(); ++k)
    if (std::abs(v.values[k]) > std::abs(v.values[best])) best = k;
  out.values[best] = v.values[best];
  return out;
}

ParamDelta g_one(const LearningContext& ctx, const Environment& env) { return one_at_a_time(g_original(ctx, env)); }

double mof_alignment(const LearningContext& ctx, const Environment& env, std::span<const ParamVector> modes) {
  const double uh_norm = ctx.u_h.values.norm();
  if (uh_norm == 0.0) return 0.0;
  double best = -1.0;
  for (const auto& mode : modes) {
    const auto u_star = optimal_action(env, mode, ctx.theta, ctx.x, ctx.u_r, ctx.alpha);
    const double n = u_star.values.norm();
    if (n == 0.0) continue;
    best = std::max(best, ctx.u_h.values.dot(u_star.values) / (uh_norm * n));
  }
  return best;
}

ParamDelta g_mof(const LearningContext& ctx, const Environment& env, double beta, std::span<const ParamVector> modes) {
  if (ctx.u_h.values.norm() == 0.0) return ParamDelta::zeros(env.theta_dim());
  if (mof_alignment(ctx, env, modes) >= beta) return g_original(ctx, env);
  return ParamDelta::zeros(env.theta_dim());
}

ParamDelta g_e2e(const LearningContext& ctx, const Environment& env, const CorrectionNet& net) {
  if (!net.initialized()) throw std::logic_error("e2e rule: correction net is not loaded");
  // No human input carries no information, same as every other rule.
  if (ctx.u_h.values.norm() == 0.0) return ParamDelta::zeros(env.theta_dim());
  return bounded_correction(net, correction_input(env, ctx), net.reference_norm());
}

ParamVector step_estimate(const ParamVector& theta, const ParamDelta& delta, double alpha,
                          std::optional<double> clamp_bound) {
  require_dim("step_estimate", theta.size(), delta.size());
  if (!(alpha >= 0.0)) throw std::invalid_argument("step_estimate: learning rate must be >= 0");
  Vector next = theta.values + alpha * delta.values;
  if (clamp_bound) next = next.cwiseMax(-*clamp_bound).cwiseMin(*clamp_bound);
  return ParamVector(std::move(next));
}

ParamVector step_estimate(const Environment& env, const ParamVector& theta, const ParamDelta& delta, double alpha) {
  const auto& s = env.settings();
  return step_estimate(theta, delta, alpha, s.clamp_theta ? std::optional<double>(s.theta_bound) : std::nullopt);
}

std::string_view rule_name(RuleTag tag) {
  switch (tag) {
    case RuleTag::Gradient: return "gradient";
    case RuleTag::One: return "one";
    case RuleTag::Mof: return "mof";
    case RuleTag::E2e: return "e2e";
    case RuleTag::Strol: return "strol";
  }
  return "unknown";
}

RuleTag parse_rule_tag(std::string_view name) {
  for (auto tag : {RuleTag::Gradient, RuleTag::One, RuleTag::Mof, RuleTag::E2e, RuleTag::Strol})
    if (rule_name(tag) == name) return tag;
  throw std::invalid_argument("unknown learning rule '" + std::string(name) +
                              "' (expected gradient, one, mof, e2e, or strol)");
}

RuleKind RuleKind::mof(std::vector<ParamVector> modes, double beta) {
  return {RuleTag::Mof, beta, std::move(modes), nullptr};
}

RuleKind RuleKind::e2e(std::shared_ptr<const CorrectionNet> net) { return {RuleTag::E2e, 0.5, {}, std::move(net)}; }

RuleKind RuleKind::strol(std::shared_ptr<const CorrectionNet> net) {
  return {RuleTag::Strol, 0.5, {}, std::move(net)};
}

void RuleKind::validate(const Environment& env) const {
  switch (tag) {
    case RuleTag::Gradient:
    case RuleTag::One:
      if (net) throw std::invalid_argument(std::string(name()) + " rule takes no correction net");
      return;
    case RuleTag::Mof:
      if (!(beta >= 0.0 && beta <= 1.0)) throw std::invalid_argument("mof threshold must lie in [0, 1]");
      if (modes.empty()) throw std::invalid_argument("mof rule needs at least one candidate mode");
      for (const auto& m : modes) require_dim("mof mode", env.theta_dim(), m.size());
      return;
    case RuleTag::E2e:
    case RuleTag::Strol:
      if (!net || !net->initialized()) throw std::invalid_argument(std::string(name()) + " rule needs a loaded correction net");
      require_dim("correction net input", correction_input_dim(env), net->input_dim());
      require_dim("correction net output", env.theta_dim(), net->output_dim());
      return;
  }
}

ParamDelta apply_rule(const RuleKind& rule, const LearningContext& ctx, const Environment& env) {
  switch (rule.tag) {
    case RuleTag::Gradient: return g_original(ctx, env);
    case RuleTag::One: return g_one(ctx, env);
    case RuleTag::Mof: return g_mof(ctx, env, rule.beta, rule.modes);
    case RuleTag::E2e:
      if (!rule.net) throw std::logic_error("e2e rule: correction net is not loaded");
      return g_e2e(ctx, env, *rule.net);
    case RuleTag::Strol:
      if (!rule.net) throw std::logic_error("strol rule: correction net is not loaded");
      return g_strol(ctx, env, *rule.net);
  }
  throw std::logic_error("unhandled rule tag");
}

RuleFn bind_rule(const RuleKind& rule, const Environment& env) {
  return [rule, &env](const LearningContext& ctx) { return apply_rule(rule, ctx, env); };
}

}  // namespace strol
