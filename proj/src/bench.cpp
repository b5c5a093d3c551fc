#include "strol/bench.hpp"

#include "strol/version.hpp"

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <memory>
#include <set>
#include <sstream>

namespace strol {

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string join(const Vector& v) {
  std::string out;
  for (Eigen::Index i = 0; i < v.size(); ++i) out += (i ? ";" : "") + fmt(v[i]);
  return out;
}

std::string hex64(std::uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, v);
  return buf;
}

void write_header(std::ostream& out, const SweepSpec& spec) {
  out << "# strol " << kVersion << " env=" << spec.env_name << " seed=" << spec.seed
      << " config_hash=" << hex64(fnv1a64(spec_fingerprint(spec))) << "\n";
}

// Percentile with linear interpolation between order statistics.
double percentile(std::vector<double>& sorted, double p) {
  const double pos = p * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

Interval bootstrap_interval(std::span<const double> values, int resamples, std::uint64_t seed) {
  if (values.empty()) throw std::invalid_argument("bootstrap: no values");
  if (resamples < 1) throw std::invalid_argument("bootstrap: resamples must be >= 1");
  Rng rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, values.size() - 1);
  std::vector<double> means(static_cast<std::size_t>(resamples));
  for (auto& m : means) {
    double sum = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) sum += values[pick(rng)];
    m = sum / static_cast<double>(values.size());
  }
  std::sort(means.begin(), means.end());
  return {percentile(means, 0.025), percentile(means, 0.975)};
}

}  // namespace

void SweepSpec::validate() const {
  if (rules.empty()) throw std::invalid_argument("sweep needs at least one rule");
  if (noise.empty() || bias.empty() || prior_ids.empty())
    throw std::invalid_argument("sweep needs at least one noise level, bias level, and prior");
  if (episodes < 1) throw std::invalid_argument("sweep needs episodes >= 1");
  for (const auto& r : rules) parse_rule_tag(r);
  if (!priors.count("train")) throw std::invalid_argument("sweep needs the training prior (id \"train\")");
  for (const auto& id : prior_ids)
    if (!priors.count(id)) throw std::invalid_argument("sweep references unknown prior '" + id + "'");
}

std::vector<SweepCondition> SweepSpec::conditions() const {
  std::vector<SweepCondition> out;
  for (const auto& id : prior_ids)
    for (double sg : noise)
      for (double b : bias) out.push_back({id, sg, b});
  return out;
}

SweepSpec sweep_spec(const ExperimentConfig& cfg) {
  if (!cfg.bench) throw ConfigError(cfg.source.string() + ": bench: missing [bench] section");
  SweepSpec spec;
  spec.env_name = cfg.env_name;
  spec.env = cfg.env;
  spec.rules = cfg.bench->rules;
  spec.noise = cfg.bench->noise;
  spec.bias = cfg.bench->bias;
  spec.prior_ids = cfg.bench->priors;
  spec.priors = cfg.priors;
  spec.episodes = cfg.bench->episodes;
  spec.seed = cfg.bench->seed;
  spec.mof_beta = cfg.mof_beta;
  for (const char* rule : {"strol", "e2e"}) spec.weights[rule] = cfg.weights_for(rule);
  return spec;
}

const CellResult* SweepResult::find(const std::string& rule, const SweepCondition& c) const {
  for (const auto& cell : cells)
    if (cell.rule == rule && cell.condition.prior_id == c.prior_id && cell.condition.sigma == c.sigma &&
        cell.condition.bias == c.bias)
      return &cell;
  return nullptr;
}

SweepResult run_sweep(const SweepSpec& spec) {
  spec.validate();
  const auto env = make_environment(spec.env_name, spec.env);
  const Prior& train_prior = spec.priors.at("train");

  // Resolve every rule once; a failure marks all of its cells as skipped.
  std::vector<std::optional<RuleKind>> kinds;
  std::vector<std::string> reasons;
  for (const auto& name : spec.rules) {
    const RuleTag tag = parse_rule_tag(name);
    try {
      RuleKind kind;
      switch (tag) {
        case RuleTag::Gradient: kind = RuleKind::gradient(); break;
        case RuleTag::One: kind = RuleKind::one(); break;
        case RuleTag::Mof: kind = RuleKind::mof(train_prior.mode_means(), spec.mof_beta); break;
        case RuleTag::E2e:
        case RuleTag::Strol: {
          const auto it = spec.weights.find(name);
          if (it == spec.weights.end()) throw std::runtime_error("no weight file configured");
          auto net = std::make_shared<const CorrectionNet>(net_load(it->second));
          kind = tag == RuleTag::E2e ? RuleKind::e2e(net) : RuleKind::strol(net);
          break;
        }
      }
      kind.validate(*env);
      kinds.emplace_back(std::move(kind));
      reasons.emplace_back();
    } catch (const std::exception& e) {
      kinds.emplace_back(std::nullopt);
      reasons.emplace_back(e.what());
    }
  }

  SweepResult result;
  result.env_name = spec.env_name;
  result.seed = spec.seed;
  const auto conditions = spec.conditions();
  for (std::size_t ci = 0; ci < conditions.size(); ++ci) {
    const auto& c = conditions[ci];
    const std::uint64_t cell_seed = derive_seed(spec.seed, ci);
    EvalCondition condition{spec.priors.at(c.prior_id), noise_with_bias(c.sigma, c.bias, *env), train_prior.mean(), -1};
    for (std::size_t ri = 0; ri < spec.rules.size(); ++ri) {
      CellResult cell{spec.rules[ri], c, cell_seed, false, {}, {}};
      if (!kinds[ri]) {
        cell.skipped = true;
        cell.skip_reason = reasons[ri];
      } else {
        cell.evaluation = evaluate_rule(*env, *kinds[ri], condition, spec.episodes, cell_seed);
      }
      result.cells.push_back(std::move(cell));
    }
  }
  return result;
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string spec_fingerprint(const SweepSpec& spec) {
  std::ostringstream out;
  const auto& s = spec.env;
  out << "env=" << spec.env_name << " dt=" << fmt(s.dt) << " T=" << s.horizon << " W=" << s.window
      << " alpha=" << fmt(s.alpha) << " ab=" << fmt(s.action_bound) << " tb=" << fmt(s.theta_bound)
      << " clamp=" << s.clamp_theta << " q=" << s.teach_resolution << " p=" << s.planner.resolution
      << " H=" << s.planner.lookahead << "\nrules=";
  for (const auto& r : spec.rules) out << r << ",";
  out << "\nnoise=";
  for (double v : spec.noise) out << fmt(v) << ",";
  out << "\nbias=";
  for (double v : spec.bias) out << fmt(v) << ",";
  out << "\npriors=";
  for (const auto& id : spec.prior_ids) out << id << ",";
  for (const auto& [id, p] : spec.priors) {
    out << "\nprior " << id << " kind=" << (p.kind == Prior::Kind::UniformBox ? "box" : "mixture");
    if (p.kind == Prior::Kind::UniformBox) out << " lo=" << join(p.box_lo) << " hi=" << join(p.box_hi);
    for (const auto& m : p.modes) out << " mode=" << join(m.mean.values) << "/" << join(m.covariance) << "/" << fmt(m.weight);
  }
  out << "\nepisodes=" << spec.episodes << " seed=" << spec.seed << " beta=" << fmt(spec.mof_beta);
  return out.str();
}

void write_summary_csv(std::ostream& out, const SweepSpec& spec, const SweepResult& result) {
  write_header(out, spec);
  out << "env,rule,prior,sigma,bias,episodes,status,mean_error,std_error,sem_error,mean_regret,std_regret,sem_regret\n";
  for (const auto& cell : result.cells) {
    out << result.env_name << "," << cell.rule << "," << cell.condition.prior_id << "," << fmt(cell.condition.sigma) << ","
        << fmt(cell.condition.bias) << ",";
    if (cell.skipped) {
      // Commas would break the row; the reason is kept readable otherwise.
      std::string reason = cell.skip_reason;
      std::replace(reason.begin(), reason.end(), ',', ';');
      std::replace(reason.begin(), reason.end(), '\n', ' ');
      out << "0,skipped: " << reason << ",,,,,,\n";
      continue;
    }
    const auto& s = cell.evaluation.summary;
    out << s.episodes << ",ok," << fmt(s.mean_error) << "," << fmt(s.std_error) << "," << fmt(s.sem_error) << ","
        << fmt(s.mean_regret) << "," << fmt(s.std_regret) << "," << fmt(s.sem_regret) << "\n";
  }
}

void write_episodes_csv(std::ostream& out, const SweepSpec& spec, const SweepResult& result) {
  write_header(out, spec);
  out << "env,rule,prior,sigma,bias,episode,seed,error,regret,theta_star,final_theta\n";
  for (const auto& cell : result.cells) {
    if (cell.skipped) continue;
    for (std::size_t i = 0; i < cell.evaluation.episodes.size(); ++i) {
      const auto& e = cell.evaluation.episodes[i];
      out << result.env_name << "," << cell.rule << "," << cell.condition.prior_id << "," << fmt(cell.condition.sigma)
          << "," << fmt(cell.condition.bias) << "," << i << "," << e.seed << "," << fmt(e.error) << "," << fmt(e.regret)
          << "," << join(e.theta_star.values) << "," << join(e.final_theta.values) << "\n";
    }
  }
}

CellComparison compare_cells(std::span<const double> a, std::span<const double> b, int resamples,
                             std::uint64_t seed) {
  if (a.size() != b.size()) throw std::invalid_argument("compare_cells: cells have different episode counts");
  if (a.empty()) throw std::invalid_argument("compare_cells: empty cells");
  std::vector<double> diff(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) diff[i] = a[i] - b[i];
  CellComparison out;
  out.mean_difference = mean_of(diff);
  out.interval = bootstrap_interval(diff, resamples, seed);
  out.significant = !out.interval.contains(0.0);
  return out;
}

std::vector<double> metric_values(const Evaluation& evaluation, Metric metric) {
  std::vector<double> out;
  for (const auto& e : evaluation.episodes) out.push_back(metric == Metric::Error ? e.error : e.regret);
  return out;
}

CellComparison compare_cells(const CellResult& a, const CellResult& b, Metric metric, int resamples,
                             std::uint64_t seed) {
  if (a.skipped || b.skipped) throw std::invalid_argument("compare_cells: a skipped cell has no episodes");
  if (a.seed != b.seed) throw std::invalid_argument("compare_cells: cells are not paired (different seeds)");
  const auto va = metric_values(a.evaluation, metric);
  const auto vb = metric_values(b.evaluation, metric);
  return compare_cells(va, vb, resamples, seed);
}

Interval bootstrap_mean_interval(std::span<const double> values, int resamples, std::uint64_t seed) {
  return bootstrap_interval(values, resamples, seed);
}

}  // namespace strol
