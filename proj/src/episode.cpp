#include "strol/episode.hpp"

#include "strol/lyapunov.hpp"
#include "strol/metrics.hpp"

#include <cmath>
#include <limits>
#include <ostream>

namespace strol {

namespace {

bool collided(const Environment& env, const StateVector& x) {
  if (const auto* hw = dynamic_cast<const HighwayEnv*>(&env)) return hw->collision(x);
  return false;
}

nlohmann::json to_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

}  // namespace

OnlineLearner::OnlineLearner(const Environment& env, RuleFn rule, std::string rule_name, ParamVector theta0,
                             StateVector x0, std::optional<ParamVector> theta_star)
    : env_(env), rule_(std::move(rule)), rule_name_(std::move(rule_name)) {
  require_dim("theta0", env.theta_dim(), theta0.size());
  require_dim("start state", env.state_dim(), x0.size());
  log_.env = env.name();
  log_.rule = rule_name_;
  log_.states.states.push_back(std::move(x0));
  log_.theta_history.push_back(std::move(theta0));
  set_theta_star(std::move(theta_star));
}

void OnlineLearner::set_rule(RuleFn rule, std::string rule_name) {
  rule_ = std::move(rule);
  rule_name_ = std::move(rule_name);
  log_.rule = rule_name_;
}

void OnlineLearner::set_theta_star(std::optional<ParamVector> theta_star) {
  if (theta_star) require_dim("theta*", env_.theta_dim(), theta_star->size());
  log_.theta_star = std::move(theta_star);
}

ActionVector OnlineLearner::current_plan() const { return plan(env_, state(), theta(), env_.settings().planner); }

void OnlineLearner::advance(const Vector& u_h_raw) {
  const double alpha = env_.settings().alpha;
  const ActionVector u_h = env_.clip_human(u_h_raw);
  const bool was_clipped = !(u_h.values == u_h_raw);

  LearningContext ctx{state(), u_h, current_plan(), theta(), alpha};
  const ParamDelta delta = rule_(ctx);
  double margin = std::numeric_limits<double>::quiet_NaN();
  if (log_.theta_star) margin = stability_margin(ErrorVector::between(*log_.theta_star, ctx.theta), delta, alpha);

  ParamVector next_theta = step_estimate(env_, ctx.theta, delta, alpha);
  StateVector next_x = env_.step(ctx.x, ctx.u_h, ctx.u_r);

  log_.rule_history.push_back(rule_name_);
  log_.margins.push_back(margin);
  log_.human_actions.push_back(u_h);
  log_.robot_actions.push_back(ctx.u_r);
  log_.clipped.push_back(was_clipped);
  log_.collisions.push_back(collided(env_, next_x));
  log_.theta_history.push_back(std::move(next_theta));
  log_.states.states.push_back(std::move(next_x));
}

double OnlineLearner::last_margin() const {
  return log_.margins.empty() ? std::numeric_limits<double>::quiet_NaN() : log_.margins.back();
}

EpisodeLog OnlineLearner::finish() const {
  EpisodeLog out = log_;
  if (out.theta_star) {
    out.final_error = param_error(*out.theta_star, theta());
    out.regret = regret(env_, *out.theta_star, theta(), out.states.states.front());
  }
  return out;
}

StateVector episode_start_state(const Environment& env, std::uint64_t seed) {
  Rng rng(derive_seed(seed, 0));
  return env.start_state(rng);
}

EpisodeLog run_episode(const Environment& env, const RuleFn& rule, const std::string& rule_name,
                       const HumanNoise& noise, const ParamVector& theta_star, const ParamVector& theta0, int window,
                       std::uint64_t seed) {
  OnlineLearner learner(env, rule, rule_name, theta0, episode_start_state(env, seed), theta_star);
  Rng human_rng(derive_seed(seed, 1));
  const double alpha = env.settings().alpha;
  while (!learner.done()) {
    if (learner.tick() < window) {
      const auto u_star = optimal_action(env, theta_star, learner.theta(), learner.state(), learner.current_plan(), alpha);
      learner.advance(noisy_action(u_star, noise, human_rng).values);
    } else {
      learner.advance(env.zero_human_action().values);
    }
  }
  return learner.finish();
}

EpisodeLog run_episode(const Environment& env, const RuleKind& rule, const HumanNoise& noise,
                       const ParamVector& theta_star, const ParamVector& theta0, int window, std::uint64_t seed) {
  rule.validate(env);
  return run_episode(env, bind_rule(rule, env), std::string(rule.name()), noise, theta_star, theta0, window, seed);
}

EpisodeLog run_scripted_episode(const Environment& env, const RuleKind& rule, const ParamVector& theta_star,
                                const ParamVector& theta0, std::uint64_t seed, std::span<const Vector> human_actions) {
  rule.validate(env);
  OnlineLearner learner(env, bind_rule(rule, env), std::string(rule.name()), theta0, episode_start_state(env, seed),
                        theta_star);
  while (!learner.done()) {
    const auto t = static_cast<std::size_t>(learner.tick());
    learner.advance(t < human_actions.size() ? human_actions[t] : env.zero_human_action().values);
  }
  return learner.finish();
}

void write_episode_csv(std::ostream& out, const EpisodeLog& log) {
  const std::size_t n = log.states.states.empty() ? 0 : log.states.states.front().size();
  const std::size_t d = log.theta_history.empty() ? 0 : log.theta_history.front().size();
  const std::size_t mh = log.human_actions.empty() ? 0 : log.human_actions.front().size();
  const std::size_t mr = log.robot_actions.empty() ? 0 : log.robot_actions.front().size();
  out << "t";
  for (std::size_t i = 0; i < n; ++i) out << ",x" << i;
  for (std::size_t i = 0; i < d; ++i) out << ",theta" << i;
  for (std::size_t i = 0; i < mh; ++i) out << ",uh" << i;
  for (std::size_t i = 0; i < mr; ++i) out << ",ur" << i;
  out << ",margin,clipped,rule\n";
  const auto old = out.precision(17);
  for (std::size_t t = 0; t < log.steps(); ++t) {
    out << t;
    for (std::size_t i = 0; i < n; ++i) out << "," << log.states.states[t][i];
    for (std::size_t i = 0; i < d; ++i) out << "," << log.theta_history[t][i];
    for (std::size_t i = 0; i < mh; ++i) out << "," << log.human_actions[t][i];
    for (std::size_t i = 0; i < mr; ++i) out << "," << log.robot_actions[t][i];
    out << "," << log.margins[t] << "," << (log.clipped[t] ? 1 : 0) << "," << log.rule_history[t] << "\n";
  }
  out.precision(old);
}

nlohmann::json episode_json(const EpisodeLog& log) {
  nlohmann::json j;
  j["env"] = log.env;
  j["rule"] = log.rule;
  j["theta_star"] = log.theta_star ? to_json(log.theta_star->values) : nlohmann::json(nullptr);
  j["final_error"] = log.final_error;
  j["regret"] = log.regret;
  auto& steps = j["steps"] = nlohmann::json::array();
  for (std::size_t t = 0; t < log.steps(); ++t) {
    steps.push_back({{"t", t},
                     {"state", to_json(log.states.states[t].values)},
                     {"theta", to_json(log.theta_history[t].values)},
                     {"u_h", to_json(log.human_actions[t].values)},
                     {"u_r", to_json(log.robot_actions[t].values)},
                     {"margin", std::isfinite(log.margins[t]) ? nlohmann::json(log.margins[t]) : nlohmann::json(nullptr)},
                     {"rule", log.rule_history[t]},
                     {"clipped", static_cast<bool>(log.clipped[t])}});
  }
  j["final_state"] = log.states.states.empty() ? nlohmann::json(nullptr) : to_json(log.states.states.back().values);
  j["final_theta"] = log.theta_history.empty() ? nlohmann::json(nullptr) : to_json(log.theta_history.back().values);
  return j;
}

}  // namespace strol
