// SPDX-License-Identifier: Apache-2.0
// fairdiv: precompute, run, audit and report online fair-division experiments.
//
// Exit codes: 0 success, 1 unreadable config or invalid input, 2 allocator
// incompatible with the adversary, 3 solver non-convergence or failed audit.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "fairdiv/experiment.hpp"

namespace fs = std::filesystem;
using namespace fairdiv;

namespace {

struct Args {
  std::string config;
  std::string out_dir = ".";
  std::string solution;
  std::optional<std::uint64_t> seed;
  bool rational = false;
  bool trace = false;
  std::size_t jobs = 1;
  std::vector<std::string> csvs;
};

ExperimentConfig load(const Args& a) {
  ExperimentConfig c = load_config(a.config);
  if (const char* env = std::getenv("FAIRDIV_SEED")) {
    try {
      c.seed = std::stoull(env);
    } catch (const std::logic_error&) {
      throw ConfigError(std::string("FAIRDIV_SEED is not an unsigned integer: ") + env);
    }
  }
  if (a.seed) c.seed = *a.seed;
  return c;
}

std::ofstream open_out(const Args& a, const std::string& name) {
  fs::create_directories(a.out_dir);
  const fs::path p = fs::path(a.out_dir) / name;
  std::ofstream out(p);
  if (!out) throw InvalidInput("cannot write " + p.string());
  return out;
}

std::string join(const std::vector<std::size_t>& v) {
  std::string s;
  for (std::size_t k = 0; k < v.size(); ++k) s += (k ? "," : "") + std::to_string(v[k]);
  return s;
}

void describe(const Precomputed& p) {
  std::cout << "budgets:";
  for (double e : p.solution.budgets) std::cout << ' ' << e;
  std::cout << "\ncliques:";
  for (const auto& c : p.partition.cliques) std::cout << " {" << join(c) << '}';
  std::cout << "\nindifference edges: " << p.graph.edge_count() << "\n" << p.kkt.describe() << '\n';
}

int cmd_precompute(const Args& a) {
  const ExperimentConfig c = load(a);
  const Precomputed p = precompute(c, a.rational, a.trace);
  open_out(a, c.outputs.solution) << solution_to_json(p.solution, p.instance, p.partition, p.exact ? &*p.exact : nullptr).dump(2)
                                  << '\n';
  if (a.trace) {
    auto out = open_out(a, c.outputs.trace);
    for (const auto& e : p.trace) out << trace_event_to_json(e).dump() << '\n';
  }
  describe(p);
  return 0;
}

int cmd_run(const Args& a) {
  const ExperimentConfig c = load(a);
  check_compatible(c);
  std::optional<Plan> plan;
  if (needs_plan(c.allocator)) {
    if (!a.solution.empty()) {
      const OfflineInstance inst = scale_values(
          *c.adversary.distribution,
          c.budgets.empty() ? std::vector<double>(c.adversary.n, 1.0) : c.budgets);
      const SolutionFile f = parse_solution(read_json_file(a.solution), inst);
      plan = make_plan(f.solution, inst, f.partition);
    } else {
      const Precomputed p = precompute(c, a.rational, false);
      open_out(a, c.outputs.solution) << solution_to_json(p.solution, p.instance, p.partition,
                                                          p.exact ? &*p.exact : nullptr)
                                             .dump(2)
                                      << '\n';
      plan = p.plan();
    }
  }
  const ExperimentResult r = run_experiment(c, plan ? &*plan : nullptr, a.jobs);
  {
    auto out = open_out(a, c.outputs.summary);
    write_trial_summary(out, r);
  }
  {
    auto out = open_out(a, c.outputs.trace);
    write_run_trace(out, r, a.trace);
  }
  std::vector<OnlineRun> runs;
  for (const auto& t : r.trials) runs.push_back(t.run);
  write_summary_csv(std::cout, envy_trace_summary(runs));
  return 0;
}

int cmd_audit(const Args& a) {
  const ExperimentConfig c = load(a);
  if (!c.adversary.distribution_based()) throw IncompatiblePolicy("audit needs a distribution-based adversary");
  const OfflineInstance inst =
      scale_values(*c.adversary.distribution, c.budgets.empty() ? std::vector<double>(c.adversary.n, 1.0) : c.budgets);
  const SolutionFile f = parse_solution(read_json_file(a.solution), inst);
  CisefAudit audit;
  KktReport kkt;
  if (a.rational && f.exact) {
    const ExactOfflineInstance exact = to_exact(inst).with_budgets(f.exact->budgets);
    ExactMarketSolution s = *f.exact;
    refresh_mbb(s, exact);
    kkt = check_kkt(s, exact, 0.0);
    audit = is_cisef(s, exact, f.partition);
  } else {
    const OfflineInstance budgeted = inst.with_budgets(f.solution.budgets);
    kkt = check_kkt(f.solution, budgeted, 1e-6);
    audit = is_cisef(f.solution, budgeted, f.partition);
  }
  std::cout << kkt.describe() << '\n';
  std::cout << "envy_free " << audit.envy_free << "\ncliques " << audit.cliques << "\nidentical_rows "
            << audit.identical_rows << "\nscaled_values " << audit.scaled_values << "\npartition_valid "
            << audit.partition_valid << '\n';
  for (const auto& v : audit.violations) std::cout << "violation: " << v << '\n';
  const bool ok = kkt.pass && audit.pass();
  std::cout << (ok ? "audit PASS" : "audit FAIL") << '\n';
  return ok ? 0 : 3;
}

int cmd_report(const Args& a) {
  std::vector<std::string> texts;
  for (const auto& path : a.csvs) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    texts.push_back(ss.str());
  }
  write_summary_csv(std::cout, aggregate_summary_csv(texts));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Online envy-free allocation experiments"};
  app.require_subcommand(1);
  Args a;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", a.config, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", a.seed, "override the config seed (also FAIRDIV_SEED)");
    sub->add_option("--out-dir", a.out_dir, "directory for outputs");
    sub->add_flag("--rational", a.rational, "exact rational arithmetic for the offline solve");
  };

  auto* pre = app.add_subcommand("precompute", "solve the offline market and write solution.json");
  common(pre);
  pre->add_flag("--trace", a.trace, "write surgery steps to trace.jsonl");

  auto* run = app.add_subcommand("run", "run seeded trials and write summary.csv and trace.jsonl");
  common(run);
  run->add_option("--solution", a.solution, "precomputed solution.json for por/pocr")->check(CLI::ExistingFile);
  run->add_option("--jobs", a.jobs, "worker threads")->check(CLI::PositiveNumber);
  run->add_flag("--trace", a.trace, "also log every round in trace.jsonl");

  auto* audit = app.add_subcommand("audit", "check KKT and CISEF conditions of a solution");
  common(audit);
  audit->add_option("--solution", a.solution, "solution.json")->required()->check(CLI::ExistingFile);

  auto* report = app.add_subcommand("report", "aggregate summary CSVs per checkpoint");
  report->add_option("csv", a.csvs, "summary CSV files")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*pre) return cmd_precompute(a);
    if (*run) return cmd_run(a);
    if (*audit) return cmd_audit(a);
    return cmd_report(a);
  } catch (const IncompatiblePolicy& e) {
    std::cerr << "incompatible: " << e.what() << '\n';
    return 2;
  } catch (const SolverError& e) {
    std::cerr << "solver: " << e.what() << '\n' << e.report().describe() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
