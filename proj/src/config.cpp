#include "strol/config.hpp"

#define TOML_EXCEPTIONS 1
#include <toml.hpp>

#include <fstream>
#include <set>
#include <sstream>

namespace strol {

namespace {

class Reader {
 public:
  Reader(const toml::table& root, std::string source) : root_(root), source_(std::move(source)) {}

  [[noreturn]] void fail(const toml::node* node, const std::string& field, const std::string& message) const {
    std::ostringstream out;
    out << source_;
    if (node != nullptr && node->source().begin) out << ":" << node->source().begin.line << ":" << node->source().begin.column;
    out << ": " << field << ": " << message;
    throw ConfigError(out.str());
  }

  const toml::table* table(const std::string& name) const {
    const toml::node* n = root_.get(name);
    if (n == nullptr) return nullptr;
    if (!n->is_table()) fail(n, name, "expected a table");
    return n->as_table();
  }

  template <class T>
  std::optional<T> scalar(const toml::table* t, const std::string& section, const std::string& key) const {
    if (t == nullptr) return std::nullopt;
    const toml::node* n = t->get(key);
    if (n == nullptr) return std::nullopt;
    return scalar_of<T>(n, section + "." + key);
  }

  template <class T>
  T scalar_of(const toml::node* n, const std::string& field) const {
    if constexpr (std::is_same_v<T, double>) {
      if (auto v = n->value<double>()) return *v;  // integers convert
      fail(n, field, "expected a number");
    } else if constexpr (std::is_same_v<T, bool>) {
      if (n->is_boolean()) return *n->value<bool>();
      fail(n, field, "expected true or false");
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (n->is_string()) return *n->value<std::string>();
      fail(n, field, "expected a string");
    } else {
      if (n->is_integer()) {
        const auto v = *n->value<std::int64_t>();
        if constexpr (std::is_unsigned_v<T>) {
          if (v < 0) fail(n, field, "expected a non-negative integer");
        }
        return static_cast<T>(v);
      }
      fail(n, field, "expected an integer");
    }
  }

  template <class T>
  std::optional<std::vector<T>> list(const toml::table* t, const std::string& section, const std::string& key) const {
    if (t == nullptr) return std::nullopt;
    const toml::node* n = t->get(key);
    if (n == nullptr) return std::nullopt;
    return list_of<T>(n, section + "." + key);
  }

  template <class T>
  std::vector<T> list_of(const toml::node* n, const std::string& field) const {
    if (!n->is_array()) fail(n, field, "expected a list");
    std::vector<T> out;
    const auto& arr = *n->as_array();
    for (std::size_t i = 0; i < arr.size(); ++i) out.push_back(scalar_of<T>(arr.get(i), field + "[" + std::to_string(i) + "]"));
    return out;
  }

  Vector vector_of(const toml::node* n, const std::string& field) const {
    const auto v = list_of<double>(n, field);
    if (v.size() > static_cast<std::size_t>(kMaxSmallDim)) fail(n, field, "too many components");
    return Eigen::Map<const DynVector>(v.data(), static_cast<Eigen::Index>(v.size()));
  }

  Prior prior_of(const toml::table& t, const std::string& field, const std::string& id) const {
    const std::string kind = t.get("kind") ? scalar_of<std::string>(t.get("kind"), field + ".kind") : "mixture";
    try {
      if (kind == "box") {
        const toml::node* lo = t.get("lo");
        const toml::node* hi = t.get("hi");
        if (lo == nullptr || hi == nullptr) fail(&t, field, "box prior needs lo and hi");
        return Prior::uniform_box(vector_of(lo, field + ".lo"), vector_of(hi, field + ".hi"), id);
      }
      if (kind != "mixture") fail(t.get("kind"), field + ".kind", "expected \"mixture\" or \"box\"");
      const toml::node* modes = t.get("modes");
      if (modes == nullptr || !modes->is_array()) fail(modes ? modes : &t, field + ".modes", "expected a list of modes");
      std::vector<PriorMode> out;
      const auto& arr = *modes->as_array();
      for (std::size_t i = 0; i < arr.size(); ++i) {
        const std::string mf = field + ".modes[" + std::to_string(i) + "]";
        const toml::node* m = arr.get(i);
        if (!m->is_table()) fail(m, mf, "expected a table {mean, variance, weight}");
        const auto& mt = *m->as_table();
        check_keys(mt, mf, {"mean", "variance", "weight"});
        if (mt.get("mean") == nullptr) fail(m, mf, "mode needs a mean");
        PriorMode mode;
        mode.mean = ParamVector(vector_of(mt.get("mean"), mf + ".mean"));
        if (mt.get("variance")) mode.covariance = vector_of(mt.get("variance"), mf + ".variance");
        if (mt.get("weight")) mode.weight = scalar_of<double>(mt.get("weight"), mf + ".weight");
        out.push_back(std::move(mode));
      }
      return Prior::mixture(std::move(out), id);
    } catch (const std::invalid_argument& e) {
      fail(&t, field, e.what());
    }
  }

  void check_keys(const toml::table& t, const std::string& section, std::initializer_list<const char*> allowed) const {
    const std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& [key, node] : t)
      if (!ok.count(std::string(key.str()))) fail(&node, section + "." + std::string(key.str()), "unknown key");
  }

  const toml::table& root() const { return root_; }

 private:
  const toml::table& root_;
  std::string source_;
};

template <class T>
void assign(std::optional<T> v, T& out) {
  if (v) out = *v;
}

}  // namespace

const Prior& ExperimentConfig::prior(const std::string& id) const {
  const auto it = priors.find(id);
  if (it == priors.end()) throw ConfigError("unknown prior id '" + id + "'");
  return it->second;
}

std::filesystem::path ExperimentConfig::weights_for(const std::string& rule) const {
  const auto it = weights.find(rule);
  if (it != weights.end()) return it->second;
  return output_dir / (rule + ".weights");
}

ExperimentConfig default_config(const std::string& env_name) {
  ExperimentConfig cfg;
  cfg.env_name = env_name;
  cfg.env = default_settings(env_name);
  cfg.output_dir = std::filesystem::path("out") / env_name;
  if (env_name == "robot") {
    cfg.train.epochs = 500;
    cfg.train.noise.sigma = 0.25;
    cfg.train.prior = Prior::mixture({{ParamVector{1.0, -1.0}, {}, 0.5}, {ParamVector{-1.0, 1.0}, {}, 0.5}}, "train");
    cfg.episodes = 100;
  } else if (env_name == "highway") {
    cfg.train.epochs = 1000;
    cfg.train.noise.sigma = 0.1;
    cfg.train.prior =
        Prior::mixture({{ParamVector{0.0, 1.0, 1.0}, {}, 0.5}, {ParamVector{1.0, 0.0, -1.0}, {}, 0.5}}, "train");
    cfg.episodes = 250;
  } else {
    cfg.train.epochs = 100;
    cfg.train.noise.sigma = 0.25;
    cfg.train.prior = Prior::mixture({{ParamVector{1.0}, {}, 0.5}, {ParamVector{-1.0}, {}, 0.5}}, "train");
    cfg.episodes = 100;
  }
  cfg.priors["train"] = cfg.train.prior;
  return cfg;
}

ExperimentConfig parse_config(const std::string& text, const std::string& source_name) {
  toml::table root;
  try {
    root = toml::parse(text, source_name);
  } catch (const toml::parse_error& e) {
    std::ostringstream out;
    out << source_name << ":" << e.source().begin.line << ":" << e.source().begin.column << ": syntax: " << e.description();
    throw ConfigError(out.str());
  }
  const Reader r(root, source_name);
  r.check_keys(root, "config", {"env", "planner", "prior", "noise", "train", "eval", "weights", "output", "bench", "priors"});

  const toml::table* env = r.table("env");
  if (env == nullptr) r.fail(nullptr, "env", "missing [env] section");
  r.check_keys(*env, "env", {"name", "dt", "horizon", "window", "alpha", "action_bound", "theta_bound", "clamp_theta",
                             "teach_resolution"});
  const auto name = r.scalar<std::string>(env, "env", "name");
  if (!name) r.fail(env, "env.name", "missing environment name");
  if (*name != "robot" && *name != "highway" && *name != "demo2d")
    r.fail(env->get("name"), "env.name", "unknown environment '" + *name + "' (expected robot, highway, or demo2d)");

  ExperimentConfig cfg = default_config(*name);
  cfg.source = source_name;
  EnvSettings& s = cfg.env;
  assign(r.scalar<double>(env, "env", "dt"), s.dt);
  assign(r.scalar<int>(env, "env", "horizon"), s.horizon);
  assign(r.scalar<int>(env, "env", "window"), s.window);
  assign(r.scalar<double>(env, "env", "alpha"), s.alpha);
  assign(r.scalar<double>(env, "env", "action_bound"), s.action_bound);
  assign(r.scalar<double>(env, "env", "theta_bound"), s.theta_bound);
  assign(r.scalar<bool>(env, "env", "clamp_theta"), s.clamp_theta);
  assign(r.scalar<int>(env, "env", "teach_resolution"), s.teach_resolution);
  if (!(s.dt > 0.0)) r.fail(env->get("dt"), "env.dt", "must be positive");
  if (s.horizon < 1) r.fail(env->get("horizon"), "env.horizon", "must be >= 1");
  if (s.window < 0) r.fail(env->get("window"), "env.window", "must be >= 0");
  if (!(s.alpha > 0.0)) r.fail(env->get("alpha"), "env.alpha", "must be positive");
  if (!(s.action_bound > 0.0)) r.fail(env->get("action_bound"), "env.action_bound", "must be positive");
  if (!(s.theta_bound > 0.0)) r.fail(env->get("theta_bound"), "env.theta_bound", "must be positive");
  if (s.teach_resolution < 2) r.fail(env->get("teach_resolution"), "env.teach_resolution", "must be >= 2");

  if (const toml::table* p = r.table("planner")) {
    r.check_keys(*p, "planner", {"resolution", "lookahead"});
    assign(r.scalar<int>(p, "planner", "resolution"), s.planner.resolution);
    assign(r.scalar<int>(p, "planner", "lookahead"), s.planner.lookahead);
    if (s.planner.resolution < 2) r.fail(p->get("resolution"), "planner.resolution", "must be >= 2");
    if (s.planner.lookahead < 1) r.fail(p->get("lookahead"), "planner.lookahead", "must be >= 1");
  }

  const auto env_handle = make_environment(*name, s);
  const auto check_prior_dim = [&](const Prior& prior, const toml::node* node, const std::string& field) {
    if (prior.dim() != env_handle->theta_dim())
      r.fail(node, field, "prior has " + std::to_string(prior.dim()) + " components but " + *name + " has " +
                              std::to_string(env_handle->theta_dim()) + " reward features");
  };

  if (const toml::table* p = r.table("prior")) {
    r.check_keys(*p, "prior", {"kind", "modes", "lo", "hi"});
    cfg.train.prior = r.prior_of(*p, "prior", "train");
    check_prior_dim(cfg.train.prior, p, "prior");
  }
  cfg.priors["train"] = cfg.train.prior;
  if (const toml::table* ps = r.table("priors")) {
    for (const auto& [key, node] : *ps) {
      const std::string id(key.str());
      const std::string field = "priors." + id;
      if (!node.is_table()) r.fail(&node, field, "expected a table");
      if (id == "train") r.fail(&node, field, "\"train\" is reserved for [prior]");
      r.check_keys(*node.as_table(), field, {"kind", "modes", "lo", "hi"});
      cfg.priors[id] = r.prior_of(*node.as_table(), field, id);
      check_prior_dim(cfg.priors[id], &node, field);
    }
  }

  if (const toml::table* n = r.table("noise")) {
    r.check_keys(*n, "noise", {"sigma", "bias"});
    assign(r.scalar<double>(n, "noise", "sigma"), cfg.train.noise.sigma);
    if (!(cfg.train.noise.sigma >= 0.0)) r.fail(n->get("sigma"), "noise.sigma", "must be >= 0");
    if (const toml::node* b = n->get("bias")) {
      if (b->is_array()) {
        cfg.train.noise.bias = r.vector_of(b, "noise.bias");
        if (static_cast<std::size_t>(cfg.train.noise.bias.size()) != env_handle->human_action_dim())
          r.fail(b, "noise.bias", "needs one entry per human action axis");
      } else {
        cfg.train.noise = noise_with_bias(cfg.train.noise.sigma, r.scalar_of<double>(b, "noise.bias"), *env_handle);
      }
    }
  }

  if (const toml::table* t = r.table("train")) {
    r.check_keys(*t, "train", {"rules", "epochs", "samples", "minibatch", "seed", "lambda", "hidden", "step_size"});
    assign(r.list<std::string>(t, "train", "rules"), cfg.train_rules);
    for (const auto& rule : cfg.train_rules)
      if (rule != "strol" && rule != "e2e") r.fail(t->get("rules"), "train.rules", "only strol and e2e are trained");
    assign(r.scalar<int>(t, "train", "epochs"), cfg.train.epochs);
    assign(r.scalar<int>(t, "train", "samples"), cfg.train.samples_per_epoch);
    assign(r.scalar<int>(t, "train", "minibatch"), cfg.train.minibatch);
    assign(r.scalar<std::uint64_t>(t, "train", "seed"), cfg.train.seed);
    assign(r.scalar<double>(t, "train", "lambda"), cfg.train.lambda);
    assign(r.list<std::size_t>(t, "train", "hidden"), cfg.train.hidden);
    assign(r.scalar<double>(t, "train", "step_size"), cfg.train.adam.step_size);
    if (cfg.train.epochs < 0) r.fail(t->get("epochs"), "train.epochs", "must be >= 0");
    if (cfg.train.samples_per_epoch < 1) r.fail(t->get("samples"), "train.samples", "must be >= 1");
    if (cfg.train.minibatch < 1 || cfg.train.minibatch > cfg.train.samples_per_epoch)
      r.fail(t->get("minibatch"), "train.minibatch", "must lie in [1, train.samples]");
    if (!(cfg.train.lambda >= 0.0)) r.fail(t->get("lambda"), "train.lambda", "must be >= 0");
    if (cfg.train.hidden.size() != kCorrectionLayers - 1) r.fail(t->get("hidden"), "train.hidden", "needs four widths");
    for (auto w : cfg.train.hidden)
      if (w == 0) r.fail(t->get("hidden"), "train.hidden", "widths must be positive");
    if (!(cfg.train.adam.step_size > 0.0)) r.fail(t->get("step_size"), "train.step_size", "must be positive");
  }

  if (const toml::table* e = r.table("eval")) {
    r.check_keys(*e, "eval", {"episodes", "seed", "mof_beta"});
    assign(r.scalar<int>(e, "eval", "episodes"), cfg.episodes);
    assign(r.scalar<std::uint64_t>(e, "eval", "seed"), cfg.eval_seed);
    assign(r.scalar<double>(e, "eval", "mof_beta"), cfg.mof_beta);
    if (cfg.episodes < 1) r.fail(e->get("episodes"), "eval.episodes", "must be >= 1");
    if (!(cfg.mof_beta >= 0.0 && cfg.mof_beta <= 1.0)) r.fail(e->get("mof_beta"), "eval.mof_beta", "must lie in [0, 1]");
  }

  if (const toml::table* o = r.table("output")) {
    r.check_keys(*o, "output", {"dir"});
    if (auto d = r.scalar<std::string>(o, "output", "dir")) cfg.output_dir = *d;
  }

  if (const toml::table* w = r.table("weights")) {
    r.check_keys(*w, "weights", {"strol", "e2e"});
    for (const char* rule : {"strol", "e2e"})
      if (auto p = r.scalar<std::string>(w, "weights", rule)) cfg.weights[rule] = *p;
  }

  if (const toml::table* b = r.table("bench")) {
    r.check_keys(*b, "bench", {"rules", "noise", "bias", "priors", "episodes", "seed"});
    BenchSection bench;
    bench.rules = r.list<std::string>(b, "bench", "rules")
                      .value_or(std::vector<std::string>{"gradient", "one", "mof", "e2e", "strol"});
    if (bench.rules.empty()) r.fail(b->get("rules"), "bench.rules", "needs at least one rule");
    for (const auto& rule : bench.rules) {
      try {
        parse_rule_tag(rule);
      } catch (const std::invalid_argument& ex) {
        r.fail(b->get("rules"), "bench.rules", ex.what());
      }
    }
    bench.noise = r.list<double>(b, "bench", "noise").value_or(std::vector<double>{cfg.train.noise.sigma});
    bench.bias = r.list<double>(b, "bench", "bias").value_or(std::vector<double>{0.0});
    bench.priors = r.list<std::string>(b, "bench", "priors").value_or(std::vector<std::string>{"train"});
    bench.episodes = r.scalar<int>(b, "bench", "episodes").value_or(cfg.episodes);
    bench.seed = r.scalar<std::uint64_t>(b, "bench", "seed").value_or(cfg.eval_seed);
    for (double sg : bench.noise)
      if (!(sg >= 0.0)) r.fail(b->get("noise"), "bench.noise", "levels must be >= 0");
    if (bench.noise.empty()) r.fail(b->get("noise"), "bench.noise", "needs at least one level");
    if (bench.bias.empty()) r.fail(b->get("bias"), "bench.bias", "needs at least one level");
    if (bench.priors.empty()) r.fail(b->get("priors"), "bench.priors", "needs at least one prior id");
    for (const auto& id : bench.priors)
      if (!cfg.priors.count(id)) r.fail(b->get("priors"), "bench.priors", "unknown prior id '" + id + "'");
    if (bench.episodes < 1) r.fail(b->get("episodes"), "bench.episodes", "must be >= 1");
    cfg.bench = std::move(bench);
  }
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(path.string() + ": cannot read config file");
  std::ostringstream text;
  text << in.rdbuf();
  ExperimentConfig cfg = parse_config(text.str(), path.string());
  cfg.source = path;
  return cfg;
}

HumanNoise noise_with_bias(double sigma, double bias_fraction, const Environment& env) {
  HumanNoise n;
  n.sigma = sigma;
  n.bias = Vector::Constant(static_cast<Eigen::Index>(env.human_action_dim()), bias_fraction * env.settings().action_bound);
  return n;
}

}  // namespace strol
