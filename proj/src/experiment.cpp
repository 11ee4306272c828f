// SPDX-License-Identifier: Apache-2.0
#include "fairdiv/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <exception>
#include <filesystem>
#include <map>
#include <ostream>
#include <sstream>
#include <thread>

#include "fairdiv/adversary.hpp"

namespace fairdiv {

namespace {

constexpr const char* kKindNames[] = {"identical_iid", "independent_iid", "correlated_iid", "nonadaptive_lb",
                                      "adaptive_sm"};

// Shortest round-trip form, independent of stream state.
std::string fmt(double x) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

template <typename T>
T get_or(const Json& doc, const char* key, T fallback) {
  return doc.contains(key) ? doc.at(key).get<T>() : fallback;
}

ValueDistribution parse_marginal(const Json& doc) {
  ValueDistribution d;
  d.values = doc.at("values").get<std::vector<double>>();
  d.probs = doc.at("probs").get<std::vector<double>>();
  return d;
}

AdversaryConfig parse_adversary(const Json& doc, const std::string& base_dir) {
  if (!doc.is_object()) throw ConfigError("\"adversary\" must be an object");
  AdversaryConfig a;
  a.kind = parse_adversary_kind(doc.at("kind").get<std::string>());
  switch (a.kind) {
    case AdversaryKind::identical_iid:
      a.n = get_or<std::size_t>(doc, "n", 2);
      a.distribution = identical_iid(parse_marginal(doc.at("marginal")), a.n);
      break;
    case AdversaryKind::independent_iid: {
      std::vector<ValueDistribution> marginals;
      for (const auto& m : doc.at("marginals")) marginals.push_back(parse_marginal(m));
      a.distribution = independent_expansion(marginals);
      a.n = marginals.size();
      break;
    }
    case AdversaryKind::correlated_iid: {
      Json inst = doc;
      if (doc.contains("file")) {
        std::filesystem::path p = doc.at("file").get<std::string>();
        if (p.is_relative() && !base_dir.empty()) p = std::filesystem::path(base_dir) / p;
        inst = read_json_file(p.string());
      }
      InstanceFile f = parse_instance(inst);
      a.n = f.distribution.agents();
      a.distribution = std::move(f.distribution);
      a.budgets = std::move(f.budgets);
      break;
    }
    case AdversaryKind::nonadaptive_lb:
      a.n = get_or<std::size_t>(doc, "n", 2);
      a.epsilon = get_or<double>(doc, "epsilon", 0.1);
      a.segments = get_or<std::size_t>(doc, "segments", a.n);
      if (!(a.epsilon > 0.0 && a.epsilon < 1.0)) throw ConfigError("epsilon must lie in (0, 1)");
      if (a.segments > a.n) throw ConfigError("segments must not exceed n");
      break;
    case AdversaryKind::adaptive_sm:
      a.n = get_or<std::size_t>(doc, "n", 2);
      a.r = get_or<double>(doc, "r", 0.5);
      if (!(a.r > 0.0 && a.r < 1.0)) throw ConfigError("r must lie in (0, 1)");
      if (a.n < 2) throw ConfigError("the adaptive adversary needs at least two agents");
      break;
  }
  if (a.n < 1) throw ConfigError("n must be positive");
  return a;
}

template <typename T>
struct Pipeline {
  CisefResult<T> result;
  KktReport kkt;
};

template <typename T>
Pipeline<T> run_pipeline(const BasicOfflineInstance<T>& instance, const ExperimentConfig& config,
                         const SurgeryOptions& options, double tol) {
  Pipeline<T> p{compute_cisef<T>(instance, options), {}};
  if (config.strong_ef) {
    const auto& product = config.adversary.distribution->product();
    if (!product) throw InvalidInput("strong_ef needs an independent-agents distribution");
    p.result = strongify_independent<T>(*product, instance, std::move(p.result), options);
  }
  p.kkt = check_kkt(p.result.solution, instance, tol);
  return p;
}

PoResult po_verdict(const OnlineResult& r, std::size_t n, const Plan* plan) {
  double leaves = 1.0;
  for (std::size_t t = 0; t < r.run.T && leaves <= static_cast<double>(kBruteLeafCap); ++t)
    leaves *= static_cast<double>(n);
  if (leaves <= static_cast<double>(kBruteLeafCap)) return pareto_brute(r.allocation);
  if (plan) return pareto_certificate(r.allocation, r.run.arrivals, plan->xstar);
  return {};
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

AdversaryKind parse_adversary_kind(const std::string& name) {
  for (std::size_t k = 0; k < std::size(kKindNames); ++k)
    if (name == kKindNames[k]) return static_cast<AdversaryKind>(k);
  throw ConfigError("unknown adversary kind \"" + name + "\"");
}

const char* adversary_kind_name(AdversaryKind kind) { return kKindNames[static_cast<std::size_t>(kind)]; }

ExperimentConfig parse_config(const Json& doc, const std::string& base_dir) {
  try {
    if (!doc.is_object()) throw ConfigError("config must be a JSON object");
    if (!doc.contains("adversary")) throw ConfigError("config needs an \"adversary\" stanza");
    ExperimentConfig c;
    c.adversary = parse_adversary(doc.at("adversary"), base_dir);
    c.allocator = parse_policy(get_or<std::string>(doc, "allocator", "uniform"));
    c.T = get_or<std::size_t>(doc, "T", 0);
    c.trials = get_or<std::size_t>(doc, "trials", 1);
    c.seed = get_or<std::uint64_t>(doc, "seed", 0);
    c.checkpoints = get_or<std::vector<std::size_t>>(doc, "checkpoints", {});
    c.budgets = get_or<std::vector<double>>(doc, "budgets", c.adversary.budgets);
    c.strong_ef = get_or<bool>(doc, "strong_ef", false);
    const auto rule = get_or<std::string>(doc, "step_rule", "max_min_gap");
    if (rule == "max_min_gap")
      c.step_rule = StepRule::max_min_gap;
    else if (rule == "half_bound")
      c.step_rule = StepRule::half_bound;
    else
      throw ConfigError("unknown step_rule \"" + rule + "\"");
    if (doc.contains("outputs")) {
      const Json& o = doc.at("outputs");
      c.outputs.summary = get_or<std::string>(o, "summary", c.outputs.summary);
      c.outputs.trace = get_or<std::string>(o, "trace", c.outputs.trace);
      c.outputs.solution = get_or<std::string>(o, "solution", c.outputs.solution);
    }

    if (c.trials < 1) throw ConfigError("trials must be at least 1");
    for (std::size_t t : c.checkpoints)
      if (t < 1 || t > c.T) throw ConfigError("checkpoints must lie in [1, T]");
    if (!c.budgets.empty() && c.adversary.distribution && c.budgets.size() != c.adversary.n)
      throw ConfigError("budgets must have one entry per agent");
    if (c.adversary.kind == AdversaryKind::nonadaptive_lb && c.T % c.adversary.n != 0)
      throw ConfigError("the lower-bound instance needs T divisible by n");
    return c;
  } catch (const ConfigError&) {
    throw;
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  } catch (const InvalidInput& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

ExperimentConfig load_config(const std::string& path) {
  Json doc;
  try {
    doc = read_json_file(path);
  } catch (const InvalidInput& e) {
    throw ConfigError(e.what());
  }
  return parse_config(doc, std::filesystem::path(path).parent_path().string());
}

void check_compatible(const ExperimentConfig& config) {
  if (needs_plan(config.allocator) && !config.adversary.distribution_based())
    throw IncompatiblePolicy(std::string(policy_name(config.allocator)) + " needs a distribution-based adversary, not " +
                             adversary_kind_name(config.adversary.kind));
}

Plan Precomputed::plan() const { return make_plan(solution, instance, partition); }

Precomputed precompute(const ExperimentConfig& config, bool rational, bool keep_trace) {
  if (!config.adversary.distribution_based())
    throw IncompatiblePolicy(std::string("precompute needs a distribution-based adversary, not ") +
                             adversary_kind_name(config.adversary.kind));
  const TypeDistribution& dist = *config.adversary.distribution;
  const std::vector<double> budgets = config.budgets.empty() ? std::vector<double>(dist.agents(), 1.0) : config.budgets;

  Precomputed out{scale_values(dist, budgets), {}, {}, {}, {}, {}, {}};
  SurgeryOptions options;
  options.step_rule = config.step_rule;
  if (keep_trace) options.trace = [&out](const TraceEvent& e) { out.trace.push_back(e); };

  if (rational) {
    const ExactOfflineInstance exact = to_exact(out.instance);
    auto p = run_pipeline<Rational>(exact, config, options, 0.0);
    out.solution = to_double(p.result.solution);
    out.exact = std::move(p.result.solution);
    out.partition = std::move(p.result.partition);
    out.graph = std::move(p.result.graph);
    out.kkt = p.kkt;
  } else {
    auto p = run_pipeline<double>(out.instance, config, options, 1e-6);
    out.solution = std::move(p.result.solution);
    out.partition = std::move(p.result.partition);
    out.graph = std::move(p.result.graph);
    out.kkt = p.kkt;
  }
  if (!out.kkt.pass) throw SolverError("refined solution fails the KKT check", out.solution, out.kkt);
  return out;
}

ExperimentResult run_experiment(const ExperimentConfig& config, const Plan* plan, std::size_t jobs) {
  check_compatible(config);
  if (needs_plan(config.allocator) && !plan) throw InvalidInput("por and pocr need a precomputed plan");
  const AdversaryConfig& adv = config.adversary;

  ExperimentResult result;
  result.agents = adv.n;
  result.T = config.T;
  result.trials.resize(config.trials);
  const ItemValues sequence = adv.kind == AdversaryKind::nonadaptive_lb
                                  ? lower_bound_prefix(adv.n, config.T, adv.epsilon, adv.segments)
                                  : ItemValues();

  auto one = [&](std::size_t k) {
    RunOptions options;
    options.stream = k;
    options.checkpoints = config.checkpoints;
    OnlineResult r;
    switch (adv.kind) {
      case AdversaryKind::nonadaptive_lb:
        r = run_sequence(sequence, config.allocator, config.seed, options);
        break;
      case AdversaryKind::adaptive_sm: {
        AdaptiveStateMachine sm(adv.r, adv.n);
        r = run_adaptive(sm, adv.n, config.allocator, config.T, config.seed, options);
        break;
      }
      default:
        r = run_online(*adv.distribution, config.allocator, config.T, config.seed, plan, options);
    }
    TrialResult& slot = result.trials[k];
    slot.trial = k;
    slot.po = po_verdict(r, adv.n, adv.distribution_based() ? plan : nullptr);
    slot.run = std::move(r.run);
  };

  const std::size_t workers = std::clamp<std::size_t>(jobs, 1, config.trials);
  std::vector<std::exception_ptr> errors(config.trials);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k; (k = next.fetch_add(1)) < config.trials;) {
      try {
        one(k);
      } catch (...) {
        errors[k] = std::current_exception();
      }
    }
  };
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  return result;
}

void write_trial_summary(std::ostream& out, const ExperimentResult& result) {
  out << "trial,checkpoint_t,max_envy,ef,ef1";
  for (std::size_t i = 0; i < result.agents; ++i) out << ",u_" << i;
  out << ",po_verdict,peak_envy\n";
  for (const TrialResult& tr : result.trials)
    for (const EnvySnapshot& s : tr.run.envy_trace) {
      const EnvyReport rep = envy_report(s);
      out << tr.trial << ',' << s.t << ',' << fmt(rep.max_envy) << ',' << rep.ef << ',' << rep.ef1;
      for (double u : s.utility) out << ',' << fmt(u);
      out << ',' << (s.t == result.T ? verdict_name(tr.po.verdict) : "na") << ',' << fmt(s.peak_envy) << '\n';
    }
}

void write_run_trace(std::ostream& out, const ExperimentResult& result, bool per_round) {
  for (const TrialResult& tr : result.trials) {
    if (per_round)
      for (std::size_t t = 0; t < tr.run.assignments.size(); ++t)
        out << Json{{"trial", tr.trial}, {"round", t}, {"type", tr.run.arrivals[t]}, {"agent", tr.run.assignments[t]}}
                   .dump()
            << '\n';
    for (const EnvySnapshot& s : tr.run.envy_trace) {
      Json envy = Json::array();
      for (std::size_t i = 0; i < s.envy.rows(); ++i) {
        auto row = s.envy.row(i);
        envy.push_back(std::vector<double>(row.begin(), row.end()));
      }
      out << Json{{"trial", tr.trial}, {"t", s.t}, {"envy", std::move(envy)}, {"utility", s.utility},
                  {"peak_envy", s.peak_envy}}
                 .dump()
          << '\n';
    }
  }
}

std::vector<CheckpointSummary> aggregate_summary_csv(const std::vector<std::string>& csv_texts) {
  struct Bucket {
    std::vector<double> envy;
    std::size_t ef = 0, ef1 = 0;
  };
  std::map<std::size_t, Bucket> buckets;
  for (const std::string& text : csv_texts) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw InvalidInput("empty summary CSV");
    const auto header = split(line);
    auto column = [&](const char* name) {
      const auto it = std::find(header.begin(), header.end(), name);
      if (it == header.end()) throw InvalidInput(std::string("summary CSV lacks column ") + name);
      return static_cast<std::size_t>(it - header.begin());
    };
    const std::size_t ct = column("checkpoint_t"), ce = column("max_envy"), cf = column("ef"), cf1 = column("ef1");
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const auto cells = split(line);
      if (cells.size() != header.size()) throw InvalidInput("ragged summary CSV row: " + line);
      try {
        Bucket& b = buckets[std::stoull(cells[ct])];
        b.envy.push_back(std::stod(cells[ce]));
        b.ef += cells[cf] == "1";
        b.ef1 += cells[cf1] == "1";
      } catch (const std::logic_error&) {
        throw InvalidInput("unparsable summary CSV row: " + line);
      }
    }
  }
  std::vector<CheckpointSummary> out;
  for (auto& [t, b] : buckets) out.push_back(summarize_checkpoint(t, std::move(b.envy), b.ef, b.ef1));
  return out;
}

}  // namespace fairdiv
