#include "support.hpp"

#include "strol/episode.hpp"
#include "strol/metrics.hpp"

#include <doctest.h>

#include <cmath>
#include <sstream>

using namespace strol;
using strol::testing::random_vector;

namespace {

std::shared_ptr<const CorrectionNet> random_net(const Environment& env, std::uint64_t seed) {
  return std::make_shared<const CorrectionNet>(
      CorrectionNet::random(default_layer_dims(correction_input_dim(env), env.theta_dim()), seed));
}

}  // namespace

TEST_CASE("log shapes") {
  const auto env = make_environment("robot");
  const auto log = run_episode(*env, RuleKind::gradient(), HumanNoise{0.25, {}}, ParamVector{1.0, -1.0},
                               ParamVector{0.0, 0.0}, 5, 11);
  const auto T = static_cast<std::size_t>(env->settings().horizon);
  CHECK(log.states.states.size() == T + 1);
  CHECK(log.theta_history.size() == T + 1);
  CHECK(log.steps() == T);
  CHECK(log.human_actions.size() == T);
  CHECK(log.rule_history.size() == T);
  for (std::size_t t = 5; t < T; ++t) CHECK(log.human_actions[t].values.isZero(0.0));
  for (std::size_t t = 0; t < T; ++t)
    CHECK(env->step(log.states.states[t], log.human_actions[t], log.robot_actions[t]) == log.states.states[t + 1]);
  CHECK(log.final_error == doctest::Approx(param_error(ParamVector{1.0, -1.0}, log.theta_history.back())));
}

TEST_CASE("no correction window keeps theta at its start value for every rule") {
  const auto env = make_environment("robot");
  auto net = std::make_shared<CorrectionNet>(
      CorrectionNet::random(default_layer_dims(correction_input_dim(*env), env->theta_dim()), 2));
  net->set_reference_norm(0.5);
  const std::vector<RuleKind> rules = {RuleKind::gradient(), RuleKind::one(),
                                       RuleKind::mof({ParamVector{1.0, -1.0}, ParamVector{-1.0, 1.0}}),
                                       RuleKind::e2e(net), RuleKind::strol(net)};
  for (const auto& rule : rules) {
    const auto log = run_episode(*env, rule, HumanNoise{0.25, {}}, ParamVector{1.0, -1.0}, ParamVector{0.1, 0.2}, 0, 3);
    for (const auto& th : log.theta_history) CHECK(th == ParamVector{0.1, 0.2});
  }
}

TEST_CASE("negative logged margins always shrink the error") {
  Rng rng(5);
  for (const char* name : {"robot", "highway", "demo2d"}) {
    const auto env = make_environment(name);
    const auto net = random_net(*env, 7);
    int negatives = 0;
    for (int ep = 0; ep < 20; ++ep) {
      const ParamVector ts(random_vector(rng, static_cast<Eigen::Index>(env->theta_dim())));
      const auto rule = ep % 2 ? RuleKind::strol(net) : RuleKind::gradient();
      const auto log = run_episode(*env, rule, HumanNoise{0.3, {}}, ts, ParamVector::zeros(env->theta_dim()), 5,
                                   static_cast<std::uint64_t>(ep));
      for (std::size_t t = 0; t < log.steps(); ++t) {
        if (!(log.margins[t] < 0.0)) continue;
        ++negatives;
        CHECK(param_error(ts, log.theta_history[t + 1]) < param_error(ts, log.theta_history[t]));
      }
    }
    CHECK(negatives > 0);
  }
}

TEST_CASE("noise-free gradient teaching on demo2d lowers the error") {
  EnvSettings s = default_settings("demo2d");
  s.alpha = 0.5;
  const auto env = make_environment("demo2d", s);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const ParamVector ts{seed % 2 ? 1.0 : -1.0};
    const ParamVector th0{0.0};
    const auto log = run_episode(*env, RuleKind::gradient(), HumanNoise{}, ts, th0, 5, seed);
    CHECK(log.final_error < param_error(ts, th0));
  }
}

TEST_CASE("episodes are deterministic in their seed") {
  const auto env = make_environment("highway");
  const auto a = run_episode(*env, RuleKind::gradient(), HumanNoise{0.1, {}}, ParamVector{0, 1, 1}, ParamVector{0.5, 0.5, 0}, 5, 42);
  const auto b = run_episode(*env, RuleKind::gradient(), HumanNoise{0.1, {}}, ParamVector{0, 1, 1}, ParamVector{0.5, 0.5, 0}, 5, 42);
  CHECK(episode_json(a) == episode_json(b));
  const auto c = run_episode(*env, RuleKind::gradient(), HumanNoise{0.1, {}}, ParamVector{0, 1, 1}, ParamVector{0.5, 0.5, 0}, 5, 43);
  CHECK(episode_json(a) != episode_json(c));
}

TEST_CASE("out-of-box human actions are clipped and flagged") {
  const auto env = make_environment("demo2d");
  const std::vector<Vector> script = {Vector{{3.0, 0.0}}, Vector{{0.5, 0.5}}};
  const auto log = run_scripted_episode(*env, RuleKind::gradient(), ParamVector{-1.0}, ParamVector{0.0}, 1, script);
  CHECK(log.clipped[0]);
  CHECK_FALSE(log.clipped[1]);
  CHECK(log.human_actions[0].values == Vector{{1.0, 0.0}});
}

TEST_CASE("online learner switches rules between steps") {
  const auto env = make_environment("demo2d");
  const auto x0 = episode_start_state(*env, 1);
  OnlineLearner learner(*env, bind_rule(RuleKind::gradient(), *env), "gradient", ParamVector{0.0}, x0, std::nullopt);
  learner.advance(Vector{{-1.0, 0.0}});
  CHECK(std::isnan(learner.last_margin()));
  learner.set_rule(bind_rule(RuleKind::one(), *env), "one");
  learner.advance(Vector{{-1.0, 0.0}});
  CHECK(learner.log().rule_history == std::vector<std::string>{"gradient", "one"});
  learner.set_theta_star(ParamVector{-1.0});
  learner.advance(Vector{{-1.0, 0.0}});
  CHECK(std::isfinite(learner.last_margin()));
  CHECK_THROWS(learner.set_theta_star(ParamVector{1.0, 2.0}));
}

TEST_CASE("episode exports") {
  const auto env = make_environment("demo2d");
  const auto log = run_episode(*env, RuleKind::gradient(), HumanNoise{0.25, {}}, ParamVector{-1.0}, ParamVector{0.0}, 5, 9);
  std::ostringstream csv;
  write_episode_csv(csv, log);
  std::istringstream in(csv.str());
  std::string line;
  std::getline(in, line);
  CHECK(line == "t,x0,x1,theta0,uh0,uh1,ur0,ur1,margin,clipped,rule");
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  CHECK(rows == env->settings().horizon);
  const auto j = episode_json(log);
  CHECK(j["steps"].size() == static_cast<std::size_t>(env->settings().horizon));
  CHECK(j["theta_star"][0] == -1.0);
}
