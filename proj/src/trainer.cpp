#include "strol/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>

namespace strol {

void TrainConfig::validate(const Environment& env) const {
  if (epochs < 0) throw std::invalid_argument("epochs must be >= 0");
  if (samples_per_epoch < 1) throw std::invalid_argument("samples_per_epoch must be >= 1");
  if (minibatch < 1 || minibatch > samples_per_epoch)
    throw std::invalid_argument("minibatch must lie in [1, samples_per_epoch]");
  if (rule != RuleTag::Strol && rule != RuleTag::E2e) throw std::invalid_argument("only strol and e2e rules are trained");
  if (!(env.settings().alpha > 0.0)) throw std::invalid_argument("training needs a positive learning rate");
  if (!(noise.sigma >= 0.0)) throw std::invalid_argument("noise sigma must be >= 0");
  prior.validate();
  require_dim("prior", env.theta_dim(), prior.dim());
  if (hidden.size() != kCorrectionLayers - 1) throw std::invalid_argument("correction net needs four hidden widths");
}

std::vector<TrainSample> generate_dataset(const Environment& env, const TrainConfig& cfg, int epoch) {
  const auto& s = env.settings();
  const std::uint64_t epoch_seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(epoch) + 1);
  std::vector<TrainSample> data;
  data.reserve(static_cast<std::size_t>(cfg.samples_per_epoch));
  std::uniform_real_distribution<double> theta_dist(-s.theta_bound, s.theta_bound);
  for (int j = 0; j < cfg.samples_per_epoch; ++j) {
    Rng rng(derive_seed(epoch_seed, static_cast<std::uint64_t>(j)));
    StateVector x = env.sample_state(rng);
    Vector theta(static_cast<Eigen::Index>(env.theta_dim()));
    for (Eigen::Index i = 0; i < theta.size(); ++i) theta[i] = theta_dist(rng);
    ParamVector theta_star = sample_theta(cfg.prior, rng, s.theta_bound);
    ParamVector est(std::move(theta));
    ActionVector u_r = plan(env, x, est, s.planner);
    const ActionVector u_star = optimal_action(env, theta_star, est, x, u_r, s.alpha);
    ActionVector u_h = noisy_action(u_star, cfg.noise, rng);
    data.push_back({std::move(x), std::move(u_h), std::move(theta_star), std::move(est), std::move(u_r)});
  }
  return data;
}

namespace {

LearningContext context_of(const TrainSample& s, double alpha) { return {s.x, s.u_h, s.u_r, s.theta, alpha}; }

std::string describe(const TrainSample& s) {
  std::ostringstream out;
  const Eigen::IOFormat fmt(Eigen::StreamPrecision, Eigen::DontAlignCols, ", ", ", ", "", "", "[", "]");
  out << "x=" << s.x.values.format(fmt) << " u_h=" << s.u_h.values.format(fmt) << " u_r=" << s.u_r.values.format(fmt)
      << " theta=" << s.theta.values.format(fmt) << " theta*=" << s.theta_star.values.format(fmt);
  return out.str();
}

// Per-sample forward pass of the corrected rule, keeping what backprop needs.
struct CorrectedStep {
  Vector g;        // original rule (zero for e2e)
  Vector gtilde;   // corrected rule
  double scale = 0.0;
  ForwardCache cache;
  bool active = false;  // net participates (nonzero scale)
};

CorrectedStep corrected_step(const Environment& env, const CorrectionNet& net, RuleTag rule, const TrainSample& s) {
  const LearningContext ctx = context_of(s, env.settings().alpha);
  CorrectedStep out;
  const Vector g = g_original(ctx, env).values;
  double gnorm = g.norm();
  if (rule == RuleTag::Strol) {
    out.g = g;
  } else {
    out.g = Vector::Zero(g.size());
    gnorm = ctx.u_h.values.norm() == 0.0 ? 0.0 : net.reference_norm();
  }
  out.scale = correction_scale(net, gnorm);
  out.gtilde = out.g;
  if (out.scale != 0.0) {
    out.gtilde += out.scale * net_forward(net, correction_input(env, ctx), out.cache);
    out.active = true;
  }
  return out;
}

}  // namespace

StabilityRecord sample_record(const Environment& env, const CorrectionNet& net, RuleTag rule, const TrainSample& s) {
  const auto step = corrected_step(env, net, rule, s);
  return StabilityRecord::make(ErrorVector::between(s.theta_star, s.theta), ParamDelta(step.gtilde), env.settings().alpha);
}

double reference_norm(const Environment& env, std::span<const TrainSample> samples) {
  if (samples.empty()) throw std::invalid_argument("reference_norm: no samples");
  std::vector<double> norms;
  norms.reserve(samples.size());
  for (const auto& s : samples) norms.push_back(g_original(context_of(s, env.settings().alpha), env).values.norm());
  std::sort(norms.begin(), norms.end());
  // Nearest-rank percentile.
  const auto rank = static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(norms.size())));
  return norms[std::max<std::size_t>(rank, 1) - 1];
}

CorrectionNet initial_net(const Environment& env, const TrainConfig& cfg) {
  std::vector<std::size_t> dims{correction_input_dim(env)};
  dims.insert(dims.end(), cfg.hidden.begin(), cfg.hidden.end());
  dims.push_back(env.theta_dim());
  return CorrectionNet::random(dims, derive_seed(cfg.seed, 0x5eedULL), cfg.lambda);
}

TrainResult train(const Environment& env, const TrainConfig& cfg) {
  cfg.validate(env);
  const auto started = std::chrono::steady_clock::now();
  const double alpha = env.settings().alpha;

  TrainResult result{initial_net(env, cfg), {}};
  CorrectionNet& net = result.net;
  if (cfg.epochs == 0) return result;

  std::vector<TrainSample> data = generate_dataset(env, cfg, 0);
  if (cfg.rule == RuleTag::E2e) net.set_reference_norm(reference_norm(env, data));

  OptimizerState opt = OptimizerState::for_net(net, cfg.adam);
  NetGradients grads = NetGradients::zeros_like(net);
  const auto n = static_cast<std::size_t>(cfg.samples_per_epoch);
  const auto batch = static_cast<std::size_t>(cfg.minibatch);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    if (epoch > 0) data = generate_dataset(env, cfg, epoch);
    double epoch_sum = 0.0;
    for (std::size_t start = 0; start < n; start += batch) {
      const std::size_t stop = std::min(n, start + batch);
      const double inv_b = 1.0 / static_cast<double>(stop - start);
      grads *= 0.0;
      for (std::size_t j = start; j < stop; ++j) {
        const auto& s = data[j];
        const auto step = corrected_step(env, net, cfg.rule, s);
        const Vector e = s.theta_star.values - s.theta.values;
        const double margin = alpha * alpha * step.gtilde.squaredNorm() - 2.0 * alpha * e.dot(step.gtilde);
        if (!std::isfinite(margin))
          throw TrainingError("non-finite loss in epoch " + std::to_string(epoch) + " at sample " + std::to_string(j) +
                              ": " + describe(s));
        const double bound = cfg.rule == RuleTag::Strol ? net.lambda() * step.g.norm() : net.lambda() * net.reference_norm();
        if ((step.gtilde - step.g).norm() > bound + 1e-12)
          throw TrainingError("correction exceeded its norm bound at sample " + std::to_string(j) + ": " + describe(s));
        epoch_sum += margin;
        if (!step.active) continue;
        // d(margin)/d(gtilde) = 2 alpha^2 gtilde - 2 alpha e; gtilde depends on the net output through `scale`.
        const DynVector upstream = (2.0 * alpha * alpha * step.gtilde - 2.0 * alpha * e) * (step.scale * inv_b);
        net_backward(net, step.cache, upstream, grads);
      }
      if (optimizer_step(net, grads, opt) == StepStatus::SkippedNonFinite) result.report.skipped_steps += 1;
    }
    result.report.epoch_loss.push_back(epoch_sum / static_cast<double>(n));
  }
  result.report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return result;
}

std::uint64_t episode_seed(std::uint64_t seed, std::size_t index) { return derive_seed(seed, 0xE915ULL + index); }

Evaluation evaluate_rule(const Environment& env, const RuleFn& rule, const std::string& rule_name,
                         const EvalCondition& condition, int episodes, std::uint64_t seed) {
  Evaluation out;
  out.summary.label = rule_name;
  if (episodes <= 0) return out;
  const int window = condition.window >= 0 ? condition.window : env.settings().window;
  std::vector<double> errors, regrets;
  for (int i = 0; i < episodes; ++i) {
    const std::uint64_t s = episode_seed(seed, static_cast<std::size_t>(i));
    const ParamVector theta_star = sample_theta(condition.human_prior, derive_seed(s, 2), env.settings().theta_bound);
    const EpisodeLog log = run_episode(env, rule, rule_name, condition.noise, theta_star, condition.theta0, window, s);
    out.episodes.push_back({s, theta_star, log.theta_history.back(), log.final_error, log.regret});
    errors.push_back(log.final_error);
    regrets.push_back(log.regret);
  }
  out.summary = summarize(errors, regrets, rule_name);
  return out;
}

Evaluation evaluate_rule(const Environment& env, const RuleKind& rule, const EvalCondition& condition, int episodes,
                         std::uint64_t seed) {
  rule.validate(env);
  return evaluate_rule(env, bind_rule(rule, env), std::string(rule.name()), condition, episodes, seed);
}

}  // namespace strol
