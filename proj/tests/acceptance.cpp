// Acceptance checks, one PASS/FAIL line per criterion. Thresholds are fixed
// here; exit status is nonzero when any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "fairdiv/experiment.hpp"

using namespace fairdiv;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

Grid<double> rows(std::initializer_list<std::initializer_list<double>> init) {
  Grid<double> g(init.size(), init.begin()->size());
  std::size_t r = 0;
  for (const auto& row : init) {
    std::size_t c = 0;
    for (double v : row) g(r, c++) = v;
    ++r;
  }
  return g;
}

OfflineInstance trio() { return OfflineInstance(rows({{1, 1}, {0.5, 1}, {1, 0.5}}), {1, 1, 1}); }

// 200 instances shared by criteria 2 and 3; odd ones use quarter-grid values
// so that ties and indifference edges are common.
std::vector<OfflineInstance> random_instances() {
  std::mt19937_64 rng(20240601);
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<OfflineInstance> out;
  for (int k = 0; k < 200; ++k) {
    const std::size_t n = 1 + rng() % 5, m = 1 + rng() % 10;
    for (;;) {
      Grid<double> v(n, m);
      bool ok = true;
      for (std::size_t i = 0; i < n; ++i) {
        double row = 0;
        for (std::size_t j = 0; j < m; ++j) row += v(i, j) = k % 2 ? std::floor(u(rng) * 5) / 4 : u(rng);
        ok = ok && row > 0;
      }
      if (ok) {
        out.emplace_back(v, std::vector<double>(n, 1.0));
        break;
      }
    }
  }
  for (auto& inst : out)
    for (double x : inst.values().data())
      if (x > 1.0) throw std::logic_error("value outside [0, 1]");
  return out;
}

Outcome c1() {
  const auto t0 = Clock::now();
  const auto s = solve_eg<double>(trio());
  const double sec = seconds_since(t0);
  const double x[3][2] = {{1.0 / 3, 1.0 / 3}, {0, 2.0 / 3}, {2.0 / 3, 0}};
  double err = 0;
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 2; ++j) err = std::max(err, std::fabs(s.x()(i, j) - x[i][j]));
  for (double p : s.prices) err = std::max(err, std::fabs(p - 1.5));
  return {err <= 1e-4 && sec < 1.0, fmt("max deviation %.2e (<= 1e-4), %.3f s (< 1 s)", err, sec)};
}

Outcome c2(const std::vector<OfflineInstance>& instances) {
  const auto t0 = Clock::now();
  int kkt_fail = 0, envy_fail = 0;
  for (const auto& inst : instances) {
    const auto s = solve_eg<double>(inst);
    kkt_fail += !check_kkt(s, inst, 1e-6).pass;
    const auto w = value_matrix(s.x(), inst);
    bool ef = true;
    for (std::size_t i = 0; i < inst.agents(); ++i)
      for (std::size_t j = 0; j < inst.agents(); ++j) ef = ef && w(i, j) <= w(i, i) + 1e-6;
    envy_fail += !ef;
  }
  const double sec = seconds_since(t0);
  return {kkt_fail == 0 && envy_fail == 0 && sec < 30,
          fmt("%.0f KKT failures, %.0f envy failures of 200, %.1f s (< 30 s)", kkt_fail, envy_fail, sec)};
}

Outcome c3(const std::vector<OfflineInstance>& instances) {
  const auto t0 = Clock::now();
  int audit_fail = 0, kkt_fail = 0, too_many = 0;
  for (const auto& inst : instances) {
    std::size_t removed = 0;
    SurgeryOptions opts;
    opts.trace = [&](const TraceEvent& e) { removed += e.removed_edges.size(); };
    const auto r = compute_cisef(inst, opts);
    const auto final_inst = inst.with_budgets(r.solution.budgets);
    audit_fail += !is_cisef(r.solution, final_inst, r.partition, 1e-6).pass();
    kkt_fail += !check_kkt(r.solution, final_inst, 1e-6).pass;
    const std::size_t n = inst.agents();
    too_many += removed > n * n - n;
  }
  const double sec = seconds_since(t0);
  return {audit_fail == 0 && kkt_fail == 0 && too_many == 0 && sec < 120,
          fmt("%.0f audit, %.0f KKT, %.0f edge-count failures of 200, %.1f s (< 120 s)", audit_fail, kkt_fail,
              too_many, sec)};
}

Outcome c4() {
  const OfflineInstance inst(rows({{1, 1, 1}, {0.5, 1, 1}, {0.25, 1, 1}}), {1, 1, 1});
  const auto r = compute_cisef(inst);
  const double x11 = r.solution.x()(0, 0);
  bool clique = false;
  for (const auto& c : r.partition.cliques) clique = clique || c == AgentSet{1, 2};
  double row_gap = 0;
  for (std::size_t k = 0; k < 3; ++k) row_gap = std::max(row_gap, std::fabs(r.solution.x()(1, k) - r.solution.x()(2, k)));
  const bool ok = std::fabs(x11 - 1) <= 1e-6 && clique && row_gap <= 1e-9 && r.graph.has(1, 2) && r.graph.has(2, 1);
  return {ok, fmt("x_11 = %.9f, ", x11) + (clique ? "clique {2,3} found" : "no clique {2,3}") +
                  fmt(", row gap %.1e", row_gap)};
}

Outcome c5() {
  const auto r = compute_cisef(trio());
  const auto& e = r.solution.budgets;
  const bool unequal = std::fabs(e[0] - e[1]) > 1e-9 || std::fabs(e[1] - e[2]) > 1e-9;
  const std::size_t edges = build_indifference_graph(r.solution, trio().with_budgets(e)).edge_count();
  return {unequal && edges == 0, fmt("budgets (%.4f, %.4f, %.4f), %.0f edges", e[0], e[1], e[2], edges)};
}

TypeDistribution random_correlated(Philox4x32& g, std::size_t n, std::size_t m) {
  Grid<double> v(n, m);
  std::vector<double> p(m);
  double tot = 0;
  for (auto& x : p) tot += x = 0.2 + g.uniform();
  for (auto& x : p) x /= tot;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) v(i, j) = 0.1 + 0.9 * g.uniform();
  return TypeDistribution::from_rows(p, v);
}

Outcome c6() {
  const auto t0 = Clock::now();
  Philox4x32 g(606);
  int dominated = 0, runs = 0;
  for (int d = 0; d < 50; ++d) {
    const auto dist = random_correlated(g, 3, 1 + g.below(4));
    const auto inst = scale_values(dist, {1, 1, 1});
    const auto r = compute_cisef(inst);
    const Plan plan = make_plan(r.solution, inst, r.partition);
    for (std::uint64_t s = 0; s < 20; ++s) {
      const auto run = run_online(dist, Policy::pocr, 8, 6, &plan, {s, {}});
      dominated += pareto_brute(run.allocation).verdict != PoVerdict::efficient;
      ++runs;
    }
  }
  const double sec = seconds_since(t0);
  return {dominated == 0 && sec < 300, fmt("%.0f of %.0f runs dominated, %.1f s (< 300 s)", dominated, runs, sec)};
}

// Criterion 7 distributions: n = 3, m = 3; agent 2's values are agent 1's
// scaled by a factor in [0.5, 1), so agents 1 and 2 can form a clique. Only
// distributions whose CISEF output has at least two cliques are kept.
struct C7Case {
  std::size_t draw;
  TypeDistribution dist;
  Precomputed pre;
};

std::vector<C7Case> c7_cases() {
  Philox4x32 g(2024, 7);
  std::vector<C7Case> out;
  for (std::size_t k = 0; out.size() < 20 && k < 500; ++k) {
    const std::size_t n = 3, m = 3;
    Grid<double> v(n, m);
    std::vector<double> p(m);
    double tot = 0;
    for (auto& x : p) tot += x = 0.2 + g.uniform();
    for (auto& x : p) x /= tot;
    const double fac = 0.5 + 0.5 * g.uniform();
    for (std::size_t j = 0; j < m; ++j) {
      v(0, j) = 0.1 + 0.9 * g.uniform();
      v(1, j) = 0.1 + 0.9 * g.uniform();
      v(2, j) = v(1, j) * fac;
    }
    auto dist = TypeDistribution::from_rows(p, v);
    ExperimentConfig c;
    c.adversary.distribution = dist;
    c.adversary.n = n;
    Precomputed pre = precompute(c);
    if (pre.partition.size() < 2) continue;
    out.push_back({k, std::move(dist), std::move(pre)});
  }
  return out;
}

ExperimentConfig c7_config(const C7Case& c) {
  ExperimentConfig cfg;
  cfg.adversary.kind = AdversaryKind::correlated_iid;
  cfg.adversary.distribution = c.dist;
  cfg.adversary.n = 3;
  cfg.allocator = Policy::pocr;
  cfg.T = 10000;
  cfg.trials = 100;
  cfg.seed = 99;
  cfg.checkpoints = {10000};
  return cfg;
}

std::string c7_summaries(const std::vector<C7Case>& cases, std::vector<ExperimentResult>* results) {
  std::ostringstream all;
  for (const auto& c : cases) {
    const Plan plan = c.pre.plan();
    auto r = run_experiment(c7_config(c), &plan);
    write_trial_summary(all, r);
    if (results) results->push_back(std::move(r));
  }
  return all.str();
}

Outcome c7(const std::vector<C7Case>& cases, std::string& csv) {
  std::vector<ExperimentResult> results;
  csv = c7_summaries(cases, &results);
  int ef1_fail = 0, pair_fail = 0, dist_fail = 0;
  std::string failing;
  for (std::size_t d = 0; d < cases.size(); ++d) {
    const auto& part = cases[d].pre.partition;
    Grid<int> ef(3, 3);
    for (const auto& trial : results[d].trials) {
      const auto rep = envy_report(trial.run.envy_trace.back());
      for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j) {
          if (i == j) continue;
          if (part.part_of(i) == part.part_of(j)) ef1_fail += !rep.ef1_pair(i, j);
          else ef(i, j) += rep.matrix(i, j) <= 1e-9;
        }
    }
    int worst = 100, bad_pairs = 0;
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t j = 0; j < 3; ++j)
        if (i != j && part.part_of(i) != part.part_of(j)) {
          worst = std::min(worst, ef(i, j));
          bad_pairs += ef(i, j) < 95;
        }
    pair_fail += bad_pairs;
    if (bad_pairs) {
      ++dist_fail;
      failing += " draw " + std::to_string(cases[d].draw) + " (" + std::to_string(worst) + "%)";
    }
  }
  return {cases.size() == 20 && ef1_fail == 0 && pair_fail == 0,
          fmt("%.0f distributions, %.0f within-clique EF1 violations, %.0f distributions with a cross-clique pair "
              "below 95%% EF",
              cases.size(), ef1_fail, dist_fail) +
              (failing.empty() ? "" : ":" + failing)};
}

Outcome c8() {
  const auto t0 = Clock::now();
  const auto dist = identical_iid({{0, 1}, {0.5, 0.5}}, 2);
  const std::vector<std::size_t> Ts{1000, 10000, 100000};
  std::vector<double> mean(3, 0.0);
  for (std::uint64_t s = 0; s < 200; ++s) {
    const auto r = run_online(dist, Policy::uniform, Ts.back(), 8, nullptr, {s, Ts});
    for (std::size_t k = 0; k < 3; ++k) mean[k] += envy_report(r.run.envy_trace[k]).max_envy / 200;
  }
  bool ok = true;
  std::string detail = "ratio to sqrt(T log T):";
  for (std::size_t k = 0; k < 3; ++k) {
    const double T = static_cast<double>(Ts[k]);
    const double ratio = mean[k] / std::sqrt(T * std::log(T));
    ok = ok && ratio >= 0.05 && ratio <= 5;
    if (k > 0) ok = ok && mean[k] / T < mean[k - 1] / static_cast<double>(Ts[k - 1]);
    detail += fmt(" %.3f", ratio);
  }
  const double sec = seconds_since(t0);
  detail += fmt("; envy/T %.4f %.4f %.5f; %.1f s (< 180 s)", mean[0] / 1e3, mean[1] / 1e4, mean[2] / 1e5, sec);
  return {ok && sec < 180, detail};
}

Outcome c9() {
  const std::size_t T = 10000;
  const double eps = 0.1;
  const ItemValues items = lower_bound_instance(2, T, eps);
  const int seeds = 20;
  // (a) utilitarian
  bool util_ok = true;
  double min_peak = INFINITY, worst_total_err = 0;
  for (int s = 0; s < seeds; ++s) {
    const auto r = run_sequence(items, Policy::utilitarian, 9, {static_cast<std::uint64_t>(s), {T}});
    const auto& snap = r.run.envy_trace.back();
    const double total = snap.utility[0] + snap.utility[1];
    worst_total_err = std::max(worst_total_err, std::fabs(total - T));
    min_peak = std::min(min_peak, r.run.peak_envy);
    util_ok = util_ok && std::fabs(total - T) <= 1e-9 && r.run.peak_envy >= 0.04 * T;
  }
  // (b) uniform
  double mean_envy = 0;
  std::vector<double> mean_u(2, 0.0);
  for (int s = 0; s < seeds; ++s) {
    const auto r = run_sequence(items, Policy::uniform, 9, {static_cast<std::uint64_t>(s), {T}});
    mean_envy += r.run.peak_envy / seeds;
    for (std::size_t i = 0; i < 2; ++i) mean_u[i] += r.run.envy_trace.back().utility[i] / seeds;
  }
  const double envy_cap = 5 * std::sqrt(T * std::log(static_cast<double>(T)));
  const double u_cap = (0.5 + eps) * (T / 2.0) * 1.05;
  const bool unif_ok = mean_envy <= envy_cap && mean_u[0] <= u_cap && mean_u[1] <= u_cap;
  return {util_ok && unif_ok,
          fmt("utilitarian: total error %.1e, min peak envy %.0f (>= %.0f); ", worst_total_err, min_peak, 0.04 * T) +
              fmt("uniform: mean peak envy %.1f (<= %.1f), mean utilities %.1f %.1f", mean_envy, envy_cap, mean_u[0],
                  mean_u[1]) +
              fmt(" (<= %.1f)", u_cap)};
}

template <typename T>
bool strongly_ef_kkt(const CisefResult<T>& r, const BasicOfflineInstance<T>& inst, double tol) {
  const auto fin = inst.with_budgets(r.solution.budgets);
  return build_indifference_graph(r.solution, fin).edge_count() == 0 && check_kkt(r.solution, fin, tol).pass;
}

Outcome c10() {
  const auto t0 = Clock::now();
  const auto binary =
      independent_expansion({{{0, 1}, {0.1, 0.9}}, {{0, 1}, {0.1, 0.9}}, {{1, 2}, {16.0 / 17, 1.0 / 17}}});
  const auto inst = scale_values(binary, {1, 1, 1});
  const auto t3 = strongify_independent(*binary.product(), inst, compute_cisef(inst));
  const bool table_ok = strongly_ef_kkt(t3, inst, 1e-6);

  Philox4x32 g(1010);
  int fails = 0;
  for (int k = 0; k < 50; ++k) {
    const std::size_t n = 2 + g.below(2);
    std::vector<ValueDistribution> marginals(n);
    for (auto& d : marginals) {
      // 2 or 3 distinct values from {0.05, 0.10, ..., 1}
      const std::size_t s = 2 + g.below(2);
      std::vector<int> grid(20);
      std::iota(grid.begin(), grid.end(), 1);
      double tot = 0;
      for (std::size_t j = 0; j < s; ++j) {
        std::swap(grid[j], grid[j + g.below(20 - j)]);
        d.values.push_back(grid[j] / 20.0);
        d.probs.push_back(0.1 + g.uniform());
        tot += d.probs.back();
      }
      for (auto& p : d.probs) p /= tot;
    }
    try {
      const auto dist = independent_expansion(marginals);
      const auto in = scale_values(dist, std::vector<double>(n, 1.0));
      const auto r = strongify_independent(*dist.product(), in, compute_cisef(in));
      fails += !strongly_ef_kkt(r, in, 1e-6);
    } catch (const std::exception&) {
      ++fails;
    }
  }
  const double sec = seconds_since(t0);
  return {table_ok && fails == 0 && sec < 120,
          std::string("binary trio ") + (table_ok ? "strongly EF" : "NOT strongly EF") +
              fmt(", %.0f of 50 random instances fail, %.1f s (< 120 s)", fails, sec)};
}

}  // namespace

int main() {
  int failed = 0;
  auto report = [&](int id, const char* name, const std::function<Outcome()>& f) {
    Outcome o;
    try {
      o = f();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("[%s] criterion %d %s: %s\n", o.pass ? "PASS" : "FAIL", id, name, o.detail.c_str());
    std::fflush(stdout);
  };

  const auto instances = random_instances();
  report(1, "E-G fixture", c1);
  report(2, "KKT certificate suite", [&] { return c2(instances); });
  report(3, "CISEF audit", [&] { return c3(instances); });
  report(4, "shared-pair fixture", c4);
  report(5, "unequal-budget necessity", c5);
  report(6, "ex-post Pareto efficiency", c6);
  std::vector<C7Case> cases;
  std::string first_csv;
  report(7, "cross-clique EF and within-clique EF1", [&] {
    cases = c7_cases();
    return c7(cases, first_csv);
  });
  report(8, "uniform baseline vanishing envy", c8);
  report(9, "lower-bound trade-off", c9);
  report(10, "strong EF for independent agents", c10);
  report(11, "determinism", [&] {
    if (cases.empty()) return Outcome{false, "criterion 7 produced no distributions"};
    const std::string again = c7_summaries(c7_cases(), nullptr);
    return Outcome{!first_csv.empty() && again == first_csv,
                   fmt("%.0f summary bytes, rerun ", first_csv.size()) + (again == first_csv ? "identical" : "differs")};
  });
  std::printf("%d of 11 criteria failed\n", failed);
  return failed == 0 ? 0 : 1;
}
