#pragma once

// Live learning sessions driven over a JSON message protocol. A session owns
// one environment and one OnlineLearner; corrections arriving between ticks are
// held for exactly the next tick (latest wins), then zeroed.
//
//   server -> client  hello     {session_id, env:{name, geometry, dt, T}, rules, theta_dim}
//   server -> client  snapshot  {tick, rule, state, theta, theta_star|null, margin, plan, episode_done, paused}
//   server -> client  error     {code, message}
//   client -> server  correct {vector} | set_rule {name} | set_theta_star {vector} | reset {seed} | pause {on}

#include "strol/config.hpp"
#include "strol/episode.hpp"
#include "strol/rules.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace strol {

constexpr int kMinTickMs = 20;

/// Rules a session can switch between, by protocol name.
using RuleSet = std::map<std::string, RuleKind>;

/// gradient, one, and mof always; e2e and strol when their weight files load.
RuleSet available_rules(const ExperimentConfig& cfg, const Environment& env);

struct SessionSettings {
  std::string initial_rule = "gradient";
  std::uint64_t seed = 1;
  int tick_ms = 50;
  int plan_preview = 10;  ///< planned states included in each snapshot
};

class ServeSession {
 public:
  /// theta0 is the training prior's mean; theta* starts as a draw from that prior.
  ServeSession(const ExperimentConfig& cfg, RuleSet rules, SessionSettings settings);

  nlohmann::json hello() const;
  nlohmann::json snapshot() const;

  /// Applies one client message. Returns a reply to send back (an error, or a
  /// snapshot after state-changing messages), or nothing.
  std::optional<nlohmann::json> handle(const nlohmann::json& message);
  /// Parses and handles raw text; malformed JSON yields a bad_request error.
  std::optional<nlohmann::json> handle_text(const std::string& text);

  /// One learning step using the pending correction (or zero). Returns false
  /// without advancing when paused or when the episode is over.
  bool tick();

  const std::string& session_id() const { return session_id_; }
  const EpisodeLog& log() const { return learner_->log(); }
  const Environment& env() const { return *env_; }
  int tick_ms() const { return settings_.tick_ms; }
  bool paused() const { return paused_; }
  std::optional<Vector> pending_correction() const { return pending_; }

 private:
  void reset(std::uint64_t seed);
  RuleFn bound(const std::string& name) const;

  std::unique_ptr<Environment> env_;
  RuleSet rules_;
  SessionSettings settings_;
  ParamVector theta0_;
  Prior prior_;
  std::string session_id_;
  std::string rule_;
  std::optional<ParamVector> theta_star_;
  std::unique_ptr<OnlineLearner> learner_;
  std::optional<Vector> pending_;
  bool paused_ = false;
};

nlohmann::json error_message(const std::string& code, const std::string& message);

class PortBusyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ServerOptions {
  std::string address = "127.0.0.1";
  unsigned short port = 8765;  ///< 0 picks a free port
  SessionSettings session;
};

/// WebSocket host: one ServeSession per connection, ticked on a timer.
class ServeServer {
 public:
  /// Binds immediately; throws PortBusyError when the port is taken.
  ServeServer(ExperimentConfig cfg, ServerOptions options);
  ~ServeServer();
  ServeServer(const ServeServer&) = delete;
  ServeServer& operator=(const ServeServer&) = delete;

  unsigned short port() const;
  /// Serves until stop() is called, or until SIGINT/SIGTERM when `handle_signals`.
  void run(bool handle_signals = false);
  /// Thread-safe.
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace strol
