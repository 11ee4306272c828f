#include <random>

#include "doctest.h"
#include "fairdiv/adversary.hpp"
#include "fairdiv/cisef.hpp"
#include "fairdiv/metrics.hpp"

using namespace fairdiv;

namespace {

template <typename T>
Grid<T> grid(std::initializer_list<std::initializer_list<T>> init) {
  Grid<T> g(init.size(), init.begin()->size());
  std::size_t r = 0;
  for (const auto& row : init) {
    std::size_t c = 0;
    for (const T& v : row) g(r, c++) = v;
    ++r;
  }
  return g;
}

OfflineInstance trio() { return OfflineInstance(grid<double>({{1, 1}, {0.5, 1}, {1, 0.5}}), {1, 1, 1}); }

OfflineInstance shared_pair() {
  return OfflineInstance(grid<double>({{1, 1, 1}, {0.5, 1, 1}, {0.25, 1, 1}}), {1, 1, 1});
}

template <typename T>
std::set<Edge> edge_set(const IndifferenceGraph& g) {
  const auto e = g.edges();
  return {e.begin(), e.end()};
}

// The equal-budget equilibrium of the binary trio, in exact arithmetic.
struct BinaryTrio {
  ProductSupport support;
  ExactOfflineInstance instance;
  ExactMarketSolution solution;
};

BinaryTrio binary_trio() {
  ProductSupport ps;
  ps.values = {{0, 1}, {0, 1}, {1, 2}};
  ps.probs = {{0.1, 0.9}, {0.1, 0.9}, {16.0 / 17, 1.0 / 17}};
  Grid<Rational> v(3, 8);
  const Rational p12[2] = {Rational(1, 10), Rational(9, 10)}, p3[2] = {Rational(16, 17), Rational(1, 17)};
  for (std::size_t t = 0; t < 8; ++t) {
    const auto d = ps.digits(t);
    const Rational f = p12[d[0]] * p12[d[1]] * p3[d[2]];
    for (std::size_t i = 0; i < 3; ++i) v(i, t) = static_cast<int>(ps.values[i][d[i]]) * f;
  }
  ExactMarketSolution s;
  s.x() = Grid<Rational>(3, 8);
  for (std::size_t t = 0; t < 8; ++t) s.x()(2, t) = 1;
  s.x()(0, 6) = s.x()(1, 6) = Rational(75, 162);
  s.x()(2, 6) = Rational(12, 162);
  for (int p : {16, 2, 144, 18, 144, 18, 1296, 162}) s.prices.push_back(Rational(p, 600));
  s.budgets = {1, 1, 1};
  ExactOfflineInstance inst(v, {1, 1, 1});
  refresh_mbb(s, inst);
  return {ps, inst, s};
}

OfflineInstance random_instance(std::mt19937_64& rng, std::size_t n, std::size_t m, bool grid_values) {
  std::uniform_real_distribution<double> u(0, 1);
  for (;;) {
    Grid<double> v(n, m);
    bool ok = true;
    for (std::size_t i = 0; i < n; ++i) {
      const bool copy = i > 0 && rng() % 3 == 0;
      double row = 0;
      for (std::size_t j = 0; j < m; ++j) {
        double x = grid_values ? std::floor(u(rng) * 5) / 4 : u(rng);
        row += v(i, j) = copy ? v(i - 1, j) * 0.5 : std::min(x, 1.0);
      }
      ok = ok && row > 0;
    }
    if (ok) return OfflineInstance(v, std::vector<double>(n, 1.0));
  }
}

template <typename T>
bool envy_free(const BasicMarketSolution<T>& s, const BasicOfflineInstance<T>& inst, double tol) {
  const auto w = value_matrix(s.x(), inst);
  for (std::size_t i = 0; i < inst.agents(); ++i)
    for (std::size_t j = 0; j < inst.agents(); ++j)
      if (to_double(w(i, j)) > to_double(w(i, i)) + tol) return false;
  return true;
}

}  // namespace

TEST_CASE("indifference graph of the trio equilibrium") {
  const auto inst = trio();
  const auto s = solve_eg<double>(inst);
  const auto g = build_indifference_graph(s, inst);
  CHECK(edge_set<double>(g) == std::set<Edge>{{0, 1}, {0, 2}});
  GraphDiagnostics diag;
  (void)build_indifference_graph(s, inst, {}, nullptr, &diag);
  CHECK(diag.edge_test_mismatches.empty());

  const auto exact = to_exact(inst);
  const auto q = solve_eg<Rational>(exact);
  CHECK(edge_set<Rational>(build_indifference_graph(q, exact)) == std::set<Edge>{{0, 1}, {0, 2}});
}

TEST_CASE("indifference graph extremes") {
  const OfflineInstance disjoint(grid<double>({{1, 0}, {0, 1}}), {1, 1});
  CHECK(build_indifference_graph(solve_eg<double>(disjoint), disjoint).edge_count() == 0);

  for (std::size_t n = 2; n <= 5; ++n) {
    const OfflineInstance same(Grid<double>(n, 2, 0.7), std::vector<double>(n, 1.0));
    const auto s = solve_eg<double>(same);
    CHECK(build_indifference_graph(s, same).edge_count() == n * (n - 1));
  }
}

TEST_CASE("hysteresis keeps dropped edges out") {
  const OfflineInstance same(Grid<double>(2, 1, 1.0), {1, 1});
  const auto s = solve_eg<double>(same);
  IndifferenceGraph none(2);
  GraphDiagnostics diag;
  const auto g = build_indifference_graph(s, same, {}, &none, &diag);
  CHECK(g.edge_count() == 0);
  CHECK(diag.suppressed.size() == 2);
}

TEST_CASE("apply_transfer") {
  const auto inst = to_exact(trio());
  const auto s = solve_eg<Rational>(inst);

  SUBCASE("zero transfer is the identity") {
    BasicTransfer<Rational> zero{Grid<Rational>(3, 2), {}};
    const auto out = apply_transfer(s, zero, inst);
    CHECK(out.x() == s.x());
    CHECK(out.budgets == s.budgets);
    CHECK(out.prices == s.prices);
  }

  SUBCASE("A takes 0.1 worth from B and from C") {
    BasicTransfer<Rational> t{Grid<Rational>(3, 2), {}};
    const Rational units = Rational(1, 10) / s.prices[1];
    t.deltas(0, 1) = units, t.deltas(1, 1) = -units;
    t.deltas(0, 0) = units, t.deltas(2, 0) = -units;
    const auto out = apply_transfer(s, t, inst);
    CHECK(out.budgets == std::vector<Rational>{Rational(6, 5), Rational(9, 10), Rational(9, 10)});
    CHECK(out.prices == s.prices);
    CHECK(check_kkt(out, inst, 0.0).pass);
  }

  SUBCASE("B may not gain item 1") {
    BasicTransfer<Rational> t{Grid<Rational>(3, 2), {}};
    t.deltas(1, 0) = Rational(1, 10);
    t.deltas(2, 0) = Rational(-1, 10);
    CHECK_THROWS_AS(apply_transfer(s, t, inst), InvalidInput);
  }

  SUBCASE("unbalanced columns and infeasible shares are rejected") {
    BasicTransfer<Rational> t{Grid<Rational>(3, 2), {}};
    t.deltas(0, 1) = Rational(1, 10);
    CHECK_THROWS_AS(apply_transfer(s, t, inst), InvalidInput);
    BasicTransfer<Rational> big{Grid<Rational>(3, 2), {}};
    big.deltas(0, 1) = 1;
    big.deltas(1, 1) = -1;
    CHECK_THROWS_AS(apply_transfer(s, big, inst), InvalidInput);
  }
}

TEST_CASE("trio step-size bound") {
  const auto inst = to_exact(trio());
  const auto s = solve_eg<Rational>(inst);
  const auto g = build_indifference_graph(s, inst);
  // c = 2/3, smallest positive gap 1/6, bound (1/6)/(2c) = 1/8, halved.
  const Rational b = choose_step_size(s, g, inst, StepMode::budget_shift, {0, 1, 2}, Rational(3));
  CHECK(b == Rational(1, 16));
  CHECK(choose_step_size(s, g, inst, StepMode::budget_shift, {0, 1, 2}, Rational(1, 100)) == Rational(1, 100));

  // everyone indifferent: only the cap applies
  const ExactOfflineInstance same(Grid<Rational>(3, 1, Rational(1)), {1, 1, 1});
  const auto t = solve_eg<Rational>(same);
  CHECK(choose_step_size(t, build_indifference_graph(t, same), same, StepMode::operation1, {0, 1, 2},
                         Rational(1, 7)) == Rational(1, 7));
}

TEST_CASE("max-min-gap step is never below the half bound") {
  std::mt19937_64 rng(17);
  for (int rep = 0; rep < 40; ++rep) {
    const auto inst = random_instance(rng, 2 + rng() % 3, 1 + rng() % 4, true);
    SurgeryOptions fixed;
    fixed.step_rule = StepRule::half_bound;
    const auto a = compute_cisef(inst, fixed);
    const auto b = compute_cisef(inst, {});
    CHECK(is_cisef(a.solution, inst.with_budgets(a.solution.budgets), a.partition).pass());
    CHECK(is_cisef(b.solution, inst.with_budgets(b.solution.budgets), b.partition).pass());
  }
}

TEST_CASE("operation 1 leaves clique-only cycles alone") {
  // Agents 0,1 value items a,c; agent 2 values everything; agents 3,4 value b,c.
  // {0,1,2} and {2,3,4} are cliques that share agent 2.
  const ExactOfflineInstance inst(
      grid<Rational>({{1, 0, 1}, {1, 0, 1}, {1, 1, 1}, {0, 1, 1}, {0, 1, 1}}), std::vector<Rational>(5, Rational(1)));
  ExactMarketSolution s;
  s.x() = grid<Rational>({{Rational(1, 2), 0, Rational(1, 10)},
                          {Rational(1, 2), 0, Rational(1, 10)},
                          {0, 0, Rational(3, 5)},
                          {0, Rational(1, 2), Rational(1, 10)},
                          {0, Rational(1, 2), Rational(1, 10)}});
  s.prices = {Rational(5, 3), Rational(5, 3), Rational(5, 3)};
  s.budgets = std::vector<Rational>(5, Rational(1));
  refresh_mbb(s, inst);
  REQUIRE(check_kkt(s, inst, 0.0).pass);
  const auto g = build_indifference_graph(s, inst);
  const std::set<Edge> expect{{0, 1}, {1, 0}, {0, 2}, {2, 0}, {1, 2}, {2, 1},
                              {2, 3}, {3, 2}, {2, 4}, {4, 2}, {3, 4}, {4, 3}};
  REQUIRE(edge_set<Rational>(g) == expect);

  const AgentSet all{0, 1, 2, 3, 4};
  const auto after = operation1_eliminate_cycles<Rational>({s, g}, inst, all);
  CHECK(after.solution.x() == s.x());
  CHECK(after.graph == g);

  // Operation 2 merges {0,1,2}; agents 3 and 4 then value X_2 below their own
  // bundle and lose their edges into the merged clique.
  const auto merged = operation2_merge_rebalance<Rational>(after, inst, all);
  CHECK(merged.edges_removed);
  CHECK(merged.partition.cliques.front() == AgentSet{0, 1, 2});
  for (std::size_t k = 0; k < 3; ++k) {
    CHECK(merged.state.solution.x()(0, k) == merged.state.solution.x()(2, k));
    CHECK(merged.state.solution.x()(1, k) == merged.state.solution.x()(2, k));
  }
  for (std::size_t outside : {3, 4})
    for (std::size_t member : {0, 1, 2}) CHECK_FALSE(merged.state.graph.has(outside, member));
  CHECK(envy_free(merged.state.solution, inst, 0.0));
}

TEST_CASE("operation 2 merges two identical agents") {
  const ExactOfflineInstance inst(grid<Rational>({{1, 1}, {1, 1}}), {1, 1});
  ExactMarketSolution s;
  s.x() = grid<Rational>({{Rational(3, 4), Rational(1, 4)}, {Rational(1, 4), Rational(3, 4)}});
  s.prices = {1, 1};
  s.budgets = {1, 1};
  refresh_mbb(s, inst);
  REQUIRE(check_kkt(s, inst, 0.0).pass);
  const auto g = build_indifference_graph(s, inst);
  REQUIRE(g.edge_count() == 2);
  const auto r = operation2_merge_rebalance<Rational>({s, g}, inst, {0, 1});
  CHECK(r.partition.size() == 1);
  CHECK(r.state.solution.x()(0, 0) == Rational(1, 2));
  CHECK(r.state.solution.x()(1, 1) == Rational(1, 2));
  const auto w0 = value_matrix(s.x(), inst), w1 = value_matrix(r.state.solution.x(), inst);
  CHECK(w0(0, 0) == w1(0, 0));
  CHECK(w0(1, 1) == w1(1, 1));

  // singletons: nothing to do
  const ExactOfflineInstance apart(grid<Rational>({{1, 0}, {0, 1}}), {1, 1});
  const auto t = solve_eg<Rational>(apart);
  const auto none = operation2_merge_rebalance<Rational>({t, build_indifference_graph(t, apart)}, apart, {0, 1});
  CHECK(none.state.solution.x() == t.x());
  CHECK_FALSE(none.edges_removed);
}

TEST_CASE("operation 1 breaks a non-clique cycle") {
  // Search small grid-valued instances for an equilibrium whose indifference
  // graph has a cycle that is not a clique, then check the postconditions.
  std::mt19937_64 rng(2);
  int found = 0;
  for (int rep = 0; rep < 4000 && found < 5; ++rep) {
    const auto inst = random_instance(rng, 3 + rng() % 2, 2 + rng() % 3, true);
    const auto s = solve_eg<double>(inst);
    const auto g = build_indifference_graph(s, inst);
    bool non_clique_cycle = false;
    for (std::size_t a = 0; a < inst.agents(); ++a)
      for (std::size_t b = 0; b < inst.agents(); ++b)
        for (std::size_t c = 0; c < inst.agents(); ++c)
          if (a != b && b != c && a != c && g.has(a, b) && g.has(b, c) && g.has(c, a) &&
              !(g.has(b, a) && g.has(c, b) && g.has(a, c)))
            non_clique_cycle = true;
    if (!non_clique_cycle) continue;
    ++found;
    AgentSet all(inst.agents());
    std::iota(all.begin(), all.end(), 0);
    const auto out = operation1_eliminate_cycles<double>({s, g}, inst, all);
    CHECK(out.graph.edge_count() < g.edge_count());
    for (const auto& e : out.graph.edges()) CHECK(g.has(e.first, e.second));  // no new edges
    const auto w0 = value_matrix(s.x(), inst), w1 = value_matrix(out.solution.x(), inst);
    for (std::size_t i = 0; i < inst.agents(); ++i) CHECK(std::fabs(w0(i, i) - w1(i, i)) <= 1e-9);
    CHECK(out.solution.budgets == s.budgets);
    CHECK(envy_free(out.solution, inst, 1e-9));
    CHECK(check_kkt(out.solution, inst, 1e-6).pass);
  }
  CHECK(found > 0);
}

TEST_CASE("budget shift on the trio") {
  const auto inst = to_exact(trio());
  const auto s = solve_eg<Rational>(inst);
  const auto g = build_indifference_graph(s, inst);
  const auto out = budget_shift<Rational>({s, g}, inst, {0, 1, 2});
  CHECK(out.solution.budgets[0] > 1);
  CHECK(out.solution.budgets[1] < 1);
  CHECK(out.solution.budgets[1] == out.solution.budgets[2]);
  CHECK(out.graph.edge_count() == 0);
  CHECK(out.graph.components().size() == 3);
  CHECK(check_kkt(out.solution, inst.with_budgets(out.solution.budgets), 0.0).pass);

  SurgeryOptions bound;
  bound.step_rule = StepRule::half_bound;
  const auto half = budget_shift<Rational>({s, g}, inst, {0, 1, 2}, bound);
  CHECK(half.solution.budgets[0] == Rational(17, 16));
  CHECK(half.solution.budgets[1] == Rational(31, 32));
}

TEST_CASE("budget shift walks the binary trio to its hand solution") {
  const BinaryTrio t = binary_trio();
  REQUIRE(check_kkt(t.solution, t.instance, 0.0).pass);
  const auto g = build_indifference_graph(t.solution, t.instance);
  CHECK(edge_set<Rational>(g) == std::set<Edge>{{0, 1}, {1, 0}, {2, 0}, {2, 1}});
  const auto out = budget_shift<Rational>({t.solution, g}, t.instance, {0, 1, 2}, {}, Rational(16, 600));
  CHECK(out.solution.budgets == std::vector<Rational>{Rational(592, 600), Rational(592, 600), Rational(616, 600)});
  CHECK(out.solution.x()(0, 6) == Rational(74, 162));
  CHECK(out.solution.x()(1, 6) == Rational(74, 162));
  CHECK(out.solution.x()(2, 6) == Rational(14, 162));
  CHECK(out.solution.prices == t.solution.prices);
  CHECK(edge_set<Rational>(out.graph) == std::set<Edge>{{0, 1}, {1, 0}});
}

TEST_CASE("budget shift needs an inter-clique edge") {
  const ExactOfflineInstance same(Grid<Rational>(2, 1, Rational(1)), {1, 1});
  const auto s = solve_eg<Rational>(same);
  CHECK_THROWS_AS(budget_shift<Rational>({s, build_indifference_graph(s, same)}, same, {0, 1}), InvalidInput);
}

TEST_CASE("compute_cisef fixtures") {
  SUBCASE("trio ends with singletons and unequal budgets") {
    const auto inst = trio();
    const auto r = compute_cisef(inst);
    CHECK(r.partition.size() == 3);
    CHECK(r.graph.edge_count() == 0);
    CHECK(r.solution.budgets[0] > r.solution.budgets[1]);
    CHECK(r.solution.budgets[1] == doctest::Approx(r.solution.budgets[2]));
    CHECK(is_cisef(r.solution, inst.with_budgets(r.solution.budgets), r.partition).pass());
  }
  SUBCASE("the shared pair keeps agents 2 and 3 together") {
    const auto inst = shared_pair();
    const auto r = compute_cisef(inst);
    CHECK(r.solution.x()(0, 0) == doctest::Approx(1.0).epsilon(1e-6));
    bool clique23 = false;
    for (const auto& c : r.partition.cliques) clique23 = clique23 || c == AgentSet{1, 2};
    CHECK(clique23);
    for (std::size_t k = 0; k < 3; ++k) CHECK(r.solution.x()(1, k) == doctest::Approx(r.solution.x()(2, k)));
    CHECK(r.graph.has(1, 2));
    CHECK(r.graph.has(2, 1));
  }
  SUBCASE("identical agents and one item") {
    const OfflineInstance same(Grid<double>(4, 1, 0.3), {1, 1, 1, 1});
    const auto r = compute_cisef(same);
    REQUIRE(r.partition.size() == 1);
    for (std::size_t i = 0; i < 4; ++i) CHECK(r.solution.x()(i, 0) == doctest::Approx(0.25));
  }
  SUBCASE("unequal budgets are rejected") {
    CHECK_THROWS_AS(compute_cisef(trio().with_budgets({1, 2, 1})), InvalidInput);
  }
}

TEST_CASE("CISEF audit on random instances") {
  std::mt19937_64 rng(31);
  for (int rep = 0; rep < 200; ++rep) {
    const std::size_t n = 2 + rng() % 4;
    const auto inst = random_instance(rng, n, 1 + rng() % 6, rep % 2 == 1);
    std::size_t removed = 0;
    SurgeryOptions opts;
    opts.trace = [&](const TraceEvent& e) { removed += e.removed_edges.size(); };
    const auto r = compute_cisef(inst, opts);
    const auto final_inst = inst.with_budgets(r.solution.budgets);
    const auto audit = is_cisef(r.solution, final_inst, r.partition);
    REQUIRE_MESSAGE(audit.pass(), (audit.violations.empty() ? "" : audit.violations.front()));
    CHECK(check_kkt(r.solution, final_inst, 1e-6).pass);
    CHECK(removed <= r.initial_edges);
    CHECK(r.initial_edges <= n * (n - 1));
  }
}

TEST_CASE("every surgery step keeps KKT, envy-freeness and the edge set shrinking") {
  std::mt19937_64 rng(77);
  for (int rep = 0; rep < 60; ++rep) {
    const auto inst = to_exact(random_instance(rng, 3 + rng() % 2, 2 + rng() % 3, true));
    auto s = solve_eg<Rational>(inst);
    IndifferenceGraph g = build_indifference_graph(s, inst);
    AgentSet all(inst.agents());
    std::iota(all.begin(), all.end(), 0);
    for (const AgentSet& comp : g.components()) {
      if (comp.size() < 2) continue;
      auto state = operation1_eliminate_cycles<Rational>({s, g}, inst, comp);
      for (const auto& e : state.graph.edges()) CHECK(g.has(e.first, e.second));
      CHECK(envy_free(state.solution, inst, 0.0));
      CHECK(check_kkt(state.solution, inst, 0.0).pass);
      auto merged = operation2_merge_rebalance<Rational>(state, inst, comp);
      for (const auto& e : merged.state.graph.edges()) CHECK(state.graph.has(e.first, e.second));
      CHECK(envy_free(merged.state.solution, inst, 0.0));
      CHECK(check_kkt(merged.state.solution, inst, 0.0).pass);
    }
  }
}

TEST_CASE("rational and float surgery agree") {
  std::mt19937_64 rng(123);
  std::uniform_int_distribution<int> num(0, 20);
  int compared = 0;
  for (int rep = 0; rep < 40; ++rep) {
    const std::size_t n = 2 + rng() % 3, m = 1 + rng() % 6;
    Grid<double> v(n, m);
    bool ok = true;
    for (std::size_t i = 0; i < n; ++i) {
      double row = 0;
      for (std::size_t j = 0; j < m; ++j) row += v(i, j) = num(rng) / 20.0;
      ok = ok && row > 0;
    }
    if (!ok) continue;
    const OfflineInstance inst(v, std::vector<double>(n, 1.0));
    const auto f = compute_cisef(inst);
    const auto exact = to_exact(inst);
    const auto q = compute_cisef(exact);
    const auto final_exact = exact.with_budgets(q.solution.budgets);
    const auto k = check_kkt(q.solution, final_exact, 0.0);
    CHECK(k.max_residual() == 0.0);
    CHECK(is_cisef(q.solution, final_exact, q.partition).pass());
    REQUIRE(f.partition.cliques == q.partition.cliques);
    for (std::size_t i = 0; i < n; ++i) {
      CHECK(std::fabs(f.solution.budgets[i] - to_double(q.solution.budgets[i])) <= 1e-6);
      for (std::size_t j = 0; j < inst.items(); ++j)
        CHECK(std::fabs(f.solution.x()(i, j) - to_double(q.solution.x()(i, j))) <= 1e-6);
    }
    ++compared;
  }
  CHECK(compared > 20);
}

TEST_CASE("strong envy-freeness for independent agents") {
  SUBCASE("binary trio after the budget shift") {
    const BinaryTrio t = binary_trio();
    const auto g = build_indifference_graph(t.solution, t.instance);
    const auto shifted = budget_shift<Rational>({t.solution, g}, t.instance, {0, 1, 2}, {}, Rational(16, 600));
    CisefResult<Rational> cisef{shifted.solution, greedy_cliques(shifted.graph, {0, 1, 2}), shifted.graph, 4, 1, 1, 0};
    REQUIRE(cisef.partition.cliques.front() == AgentSet{0, 1});
    std::vector<std::string> ops;
    SurgeryOptions opts;
    opts.trace = [&](const TraceEvent& e) { ops.push_back(e.operation + ":" + e.note); };
    const auto strong = strongify_independent(t.support, t.instance, cisef, opts);
    CHECK(strong.graph.edge_count() == 0);
    CHECK(strong.partition.size() == 3);
    const auto fin = t.instance.with_budgets(strong.solution.budgets);
    CHECK(check_kkt(strong.solution, fin, 0.0).pass);
    // gamma_7 (index 6) left agents 1 and 2; gamma_5 (4) and gamma_3 (2) came back
    CHECK(strong.solution.x()(0, 6) < Rational(74, 162));
    CHECK(strong.solution.x()(1, 6) < Rational(74, 162));
    CHECK(strong.solution.x()(0, 4) > 0);
    CHECK(strong.solution.x()(1, 2) > 0);
    CHECK(strong.solution.x()(0, 2) == 0);
    CHECK(strong.solution.x()(1, 4) == 0);
  }
  SUBCASE("already strongly envy-free input is left alone") {
    const auto dist = independent_expansion({{{0, 1}, {0.5, 0.5}}, {{0, 1}, {0.9, 0.1}}});
    const auto inst = scale_values(dist, {1, 1});
    const auto r = compute_cisef(inst);
    REQUIRE(r.partition.size() == 2);
    const auto out = strongify_independent(*dist.product(), inst, r);
    CHECK(out.solution.x() == r.solution.x());
    CHECK(out.solution.budgets == r.solution.budgets);
  }
  SUBCASE("two uniform binary agents") {
    const auto dist = independent_expansion({{{0, 1}, {0.5, 0.5}}, {{0, 1}, {0.5, 0.5}}});
    const auto inst = scale_values(dist, {1, 1});
    const auto r = compute_cisef(inst);
    const auto out = strongify_independent(*dist.product(), inst, r);
    CHECK(out.graph.edge_count() == 0);
    CHECK(build_indifference_graph(out.solution, inst.with_budgets(out.solution.budgets)).edge_count() == 0);
  }
  SUBCASE("a point-mass agent is rejected") {
    const auto dist = independent_expansion({{{1}, {1.0}}, {{1}, {1.0}}});
    const auto inst = scale_values(dist, {1, 1});
    const auto r = compute_cisef(inst);
    REQUIRE(r.partition.size() == 1);
    CHECK_THROWS_AS(strongify_independent(*dist.product(), inst, r), InvalidInput);
  }
}
