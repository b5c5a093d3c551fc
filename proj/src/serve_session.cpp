#include "strol/serve.hpp"

#include "strol/random.hpp"

#include <cinttypes>
#include <cmath>
#include <cstdio>

namespace strol {

namespace {

nlohmann::json to_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

// Reads a numeric array; nullopt when the field is missing or not numeric.
std::optional<Vector> read_vector(const nlohmann::json& msg, const char* key) {
  const auto it = msg.find(key);
  if (it == msg.end() || !it->is_array() || it->size() > static_cast<std::size_t>(kMaxSmallDim)) return std::nullopt;
  Vector v(static_cast<Eigen::Index>(it->size()));
  for (std::size_t i = 0; i < it->size(); ++i) {
    const auto& e = (*it)[i];
    if (!e.is_number()) return std::nullopt;
    v[static_cast<Eigen::Index>(i)] = e.get<double>();
  }
  if (!all_finite(v)) return std::nullopt;
  return v;
}

}  // namespace

nlohmann::json error_message(const std::string& code, const std::string& message) {
  return {{"type", "error"}, {"code", code}, {"message", message}};
}

RuleSet available_rules(const ExperimentConfig& cfg, const Environment& env) {
  RuleSet out;
  out["gradient"] = RuleKind::gradient();
  out["one"] = RuleKind::one();
  out["mof"] = RuleKind::mof(cfg.train.prior.mode_means(), cfg.mof_beta);
  for (const char* name : {"e2e", "strol"}) {
    try {
      auto net = std::make_shared<const CorrectionNet>(net_load(cfg.weights_for(name)));
      RuleKind kind = std::string(name) == "e2e" ? RuleKind::e2e(net) : RuleKind::strol(net);
      kind.validate(env);
      out[name] = std::move(kind);
    } catch (const std::exception&) {
      // Rules without usable weights are simply not offered.
    }
  }
  return out;
}

ServeSession::ServeSession(const ExperimentConfig& cfg, RuleSet rules, SessionSettings settings)
    : env_(make_environment(cfg.env_name, cfg.env)),
      rules_(std::move(rules)),
      settings_(settings),
      theta0_(cfg.train.prior.mean()),
      prior_(cfg.train.prior) {
  if (settings_.tick_ms < kMinTickMs)
    throw std::invalid_argument("tick period must be at least " + std::to_string(kMinTickMs) + " ms");
  if (!rules_.count(settings_.initial_rule))
    throw std::invalid_argument("initial rule '" + settings_.initial_rule + "' is not available");
  for (const auto& [name, kind] : rules_) kind.validate(*env_);
  char id[24];
  std::snprintf(id, sizeof id, "s%016" PRIx64, derive_seed(settings_.seed, 0x5e55));
  session_id_ = id;
  rule_ = settings_.initial_rule;
  reset(settings_.seed);
}

RuleFn ServeSession::bound(const std::string& name) const { return bind_rule(rules_.at(name), *env_); }

void ServeSession::reset(std::uint64_t seed) {
  settings_.seed = seed;
  theta_star_ = sample_theta(prior_, derive_seed(seed, 2), env_->settings().theta_bound);
  learner_ = std::make_unique<OnlineLearner>(*env_, bound(rule_), rule_, theta0_, episode_start_state(*env_, seed),
                                             theta_star_);
  pending_.reset();
}

nlohmann::json ServeSession::hello() const {
  nlohmann::json rules = nlohmann::json::array();
  for (const auto& [name, kind] : rules_) rules.push_back(name);
  return {{"type", "hello"},
          {"session_id", session_id_},
          {"env",
           {{"name", env_->name()},
            {"geometry", env_->geometry()},
            {"dt", env_->settings().dt},
            {"T", env_->settings().horizon}}},
          {"rules", rules},
          {"theta_dim", env_->theta_dim()},
          {"feature_names", env_->feature_names()},
          {"action_bound", env_->settings().action_bound},
          {"tick_ms", settings_.tick_ms}};
}

nlohmann::json ServeSession::snapshot() const {
  const double margin = learner_->last_margin();
  const int remaining = env_->settings().horizon - learner_->tick();
  nlohmann::json plan = nlohmann::json::array();
  if (remaining > 0) {
    const auto xi = planned_trajectory(*env_, learner_->state(), learner_->theta(),
                                       std::min(remaining, settings_.plan_preview), env_->settings().planner);
    for (const auto& x : xi.states) plan.push_back(to_json(x.values));
  }
  const auto& star = learner_->log().theta_star;
  return {{"type", "snapshot"},
          {"tick", learner_->tick()},
          {"rule", rule_},
          {"state", to_json(learner_->state().values)},
          {"theta", to_json(learner_->theta().values)},
          {"theta_star", star ? to_json(star->values) : nlohmann::json(nullptr)},
          {"margin", std::isfinite(margin) ? nlohmann::json(margin) : nlohmann::json(nullptr)},
          {"plan", plan},
          {"episode_done", learner_->done()},
          {"paused", paused_}};
}

std::optional<nlohmann::json> ServeSession::handle_text(const std::string& text) {
  nlohmann::json msg;
  try {
    msg = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    return error_message("bad_request", std::string("malformed JSON: ") + e.what());
  }
  return handle(msg);
}

std::optional<nlohmann::json> ServeSession::handle(const nlohmann::json& msg) {
  if (!msg.is_object() || !msg.contains("type") || !msg["type"].is_string())
    return error_message("bad_request", "message needs a string field 'type'");
  const std::string type = msg["type"];

  if (type == "correct") {
    auto v = read_vector(msg, "vector");
    if (!v || static_cast<std::size_t>(v->size()) != env_->human_action_dim())
      return error_message("bad_request", "correct needs 'vector' with " + std::to_string(env_->human_action_dim()) +
                                              " finite numbers");
    pending_ = env_->clip_human(*v).values;  // latest correction wins
    return std::nullopt;
  }
  if (type == "set_rule") {
    if (!msg.contains("name") || !msg["name"].is_string()) return error_message("bad_request", "set_rule needs 'name'");
    const std::string name = msg["name"];
    if (!rules_.count(name)) return error_message("unknown_rule", "rule '" + name + "' is not available");
    rule_ = name;
    learner_->set_rule(bound(name), name);
    return snapshot();
  }
  if (type == "set_theta_star") {
    if (msg.contains("vector") && msg["vector"].is_null()) {
      theta_star_.reset();
      learner_->set_theta_star(std::nullopt);
      return snapshot();
    }
    auto v = read_vector(msg, "vector");
    if (!v || static_cast<std::size_t>(v->size()) != env_->theta_dim())
      return error_message("bad_request",
                           "set_theta_star needs 'vector' with " + std::to_string(env_->theta_dim()) + " finite numbers");
    const double b = env_->settings().theta_bound;
    theta_star_ = ParamVector(v->cwiseMax(-b).cwiseMin(b));
    learner_->set_theta_star(theta_star_);
    return snapshot();
  }
  if (type == "reset") {
    std::uint64_t seed = settings_.seed;
    if (msg.contains("seed")) {
      if (!msg["seed"].is_number_integer() || msg["seed"].get<std::int64_t>() < 0)
        return error_message("bad_request", "reset 'seed' must be a non-negative integer");
      seed = msg["seed"].get<std::uint64_t>();
    }
    reset(seed);
    return snapshot();
  }
  if (type == "pause") {
    if (!msg.contains("on") || !msg["on"].is_boolean()) return error_message("bad_request", "pause needs boolean 'on'");
    paused_ = msg["on"].get<bool>();
    return snapshot();
  }
  return error_message("unknown_type", "unknown message type '" + type + "'");
}

bool ServeSession::tick() {
  if (paused_ || learner_->done()) return false;
  const Vector u_h = pending_ ? *pending_ : env_->zero_human_action().values;
  pending_.reset();
  learner_->advance(u_h);
  return true;
}

}  // namespace strol
