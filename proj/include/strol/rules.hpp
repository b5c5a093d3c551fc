#pragma once

// Learning dynamics theta' = clamp(theta + alpha * g(x, u_H, u_R, theta)):
// the original feature-difference rule, its corrected form g + g_hat, and the
// One / MOF / e2e baselines.

#include "strol/core.hpp"
#include "strol/envs.hpp"
#include "strol/net.hpp"

#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace strol {

struct LearningContext {
  StateVector x;
  ActionVector u_h;
  ActionVector u_r;
  ParamVector theta;
  double alpha = 1.0;
};

/// concat(net_state(x), u_H, u_R, theta): the correction net's input.
DynVector correction_input(const Environment& env, const LearningContext& ctx);
std::size_t correction_input_dim(const Environment& env);

/// phi(f(x, u_H, u_R)) - phi(f(x, 0, u_R)), the theta-gradient of the reward gap
/// between the corrected and uncorrected next states.
ParamDelta g_original(const LearningContext& ctx, const Environment& env);

/// g + bounded correction, with the bound referenced to ||g||.
ParamDelta g_strol(const LearningContext& ctx, const Environment& env, const CorrectionNet& net);

/// Keeps only the largest-magnitude component of v (lowest index on ties).
ParamDelta one_at_a_time(const ParamDelta& v);
ParamDelta g_one(const LearningContext& ctx, const Environment& env);

/// Largest cosine similarity between u_H and the optimal teaching action for
/// each candidate mode. Zero when u_H is the zero vector.
double mof_alignment(const LearningContext& ctx, const Environment& env, std::span<const ParamVector> modes);
/// g when the alignment reaches beta, otherwise 0.
ParamDelta g_mof(const LearningContext& ctx, const Environment& env, double beta, std::span<const ParamVector> modes);

/// Bounded net output alone, bound referenced to the net's frozen reference norm.
ParamDelta g_e2e(const LearningContext& ctx, const Environment& env, const CorrectionNet& net);

/// theta + alpha * delta, clamped to [-clamp_bound, clamp_bound]^d when a bound is given.
ParamVector step_estimate(const ParamVector& theta, const ParamDelta& delta, double alpha,
                          std::optional<double> clamp_bound);
/// Uses the environment's parameter box settings.
ParamVector step_estimate(const Environment& env, const ParamVector& theta, const ParamDelta& delta, double alpha);

enum class RuleTag { Gradient, One, Mof, E2e, Strol };

std::string_view rule_name(RuleTag tag);
/// Accepts gradient, one, mof, e2e, strol.
RuleTag parse_rule_tag(std::string_view name);

struct RuleKind {
  RuleTag tag = RuleTag::Gradient;
  double beta = 0.5;                            ///< MOF acceptance threshold
  std::vector<ParamVector> modes;               ///< MOF candidate parameters
  std::shared_ptr<const CorrectionNet> net;     ///< E2E / StROL

  static RuleKind gradient() { return {}; }
  static RuleKind one() { return {RuleTag::One, 0.5, {}, nullptr}; }
  static RuleKind mof(std::vector<ParamVector> modes, double beta = 0.5);
  static RuleKind e2e(std::shared_ptr<const CorrectionNet> net);
  static RuleKind strol(std::shared_ptr<const CorrectionNet> net);

  std::string_view name() const { return rule_name(tag); }
  /// Throws if the tag-specific configuration is missing or malformed.
  void validate(const Environment& env) const;
};

ParamDelta apply_rule(const RuleKind& rule, const LearningContext& ctx, const Environment& env);

/// A rule bound to its environment, for code that only needs ctx -> delta.
using RuleFn = std::function<ParamDelta(const LearningContext&)>;
RuleFn bind_rule(const RuleKind& rule, const Environment& env);

}  // namespace strol
