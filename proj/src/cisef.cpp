// SPDX-License-Identifier: Apache-2.0
#include "fairdiv/cisef.hpp"

#include <algorithm>
#include <deque>
#include <set>
#include <sstream>
#include <tuple>

namespace fairdiv {

// Graph ---------------------------------------------------------------------

std::size_t IndifferenceGraph::edge_count() const {
  return static_cast<std::size_t>(std::count(adj_.begin(), adj_.end(), true));
}

std::vector<Edge> IndifferenceGraph::edges() const {
  std::vector<Edge> out;
  for (std::size_t i = 0; i < n_; ++i)
    for (std::size_t j = 0; j < n_; ++j)
      if (has(i, j)) out.emplace_back(i, j);
  return out;
}

bool IndifferenceGraph::is_clique(const AgentSet& agents) const {
  for (std::size_t a : agents)
    for (std::size_t b : agents)
      if (a != b && !has(a, b)) return false;
  return true;
}

std::vector<AgentSet> IndifferenceGraph::components() const {
  std::vector<int> label(n_, -1);
  std::vector<AgentSet> out;
  for (std::size_t s = 0; s < n_; ++s) {
    if (label[s] >= 0) continue;
    const int id = static_cast<int>(out.size());
    AgentSet comp;
    std::deque<std::size_t> queue{s};
    label[s] = id;
    while (!queue.empty()) {
      const std::size_t u = queue.front();
      queue.pop_front();
      comp.push_back(u);
      for (std::size_t v = 0; v < n_; ++v)
        if (label[v] < 0 && (has(u, v) || has(v, u))) {
          label[v] = id;
          queue.push_back(v);
        }
    }
    std::sort(comp.begin(), comp.end());
    out.push_back(std::move(comp));
  }
  return out;
}

std::vector<std::size_t> IndifferenceGraph::shortest_path(std::size_t from, std::size_t to,
                                                          const std::vector<bool>& allowed) const {
  if (!allowed[from] || !allowed[to]) return {};
  if (from == to) return {from};
  std::vector<std::size_t> parent(n_, n_);
  std::vector<bool> seen(n_, false);
  std::deque<std::size_t> queue{from};
  seen[from] = true;
  while (!queue.empty()) {
    const std::size_t u = queue.front();
    queue.pop_front();
    for (std::size_t v = 0; v < n_; ++v) {
      if (seen[v] || !allowed[v] || !has(u, v)) continue;
      seen[v] = true;
      parent[v] = u;
      if (v == to) {
        std::vector<std::size_t> path{to};
        while (path.back() != from) path.push_back(parent[path.back()]);
        std::reverse(path.begin(), path.end());
        return path;
      }
      queue.push_back(v);
    }
  }
  return {};
}

std::size_t CliquePartition::part_of(std::size_t agent) const {
  for (std::size_t c = 0; c < cliques.size(); ++c)
    if (std::find(cliques[c].begin(), cliques[c].end(), agent) != cliques[c].end()) return c;
  throw InvalidInput("agent " + std::to_string(agent) + " is not in the partition");
}

CliquePartition greedy_cliques(const IndifferenceGraph& graph, const AgentSet& component) {
  CliquePartition part;
  AgentSet sorted = component;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t a : sorted) part.cliques.push_back({a});
  bool merged = true;
  while (merged) {
    merged = false;
    for (std::size_t a = 0; a < part.cliques.size() && !merged; ++a)
      for (std::size_t b = a + 1; b < part.cliques.size() && !merged; ++b) {
        AgentSet joined = part.cliques[a];
        joined.insert(joined.end(), part.cliques[b].begin(), part.cliques[b].end());
        if (!graph.is_clique(joined)) continue;
        std::sort(joined.begin(), joined.end());
        part.cliques[a] = std::move(joined);
        part.cliques.erase(part.cliques.begin() + static_cast<std::ptrdiff_t>(b));
        merged = true;
      }
  }
  return part;
}

namespace {

template <typename T>
Tolerance<T> ind_tol(const SurgeryOptions& o) {
  return Tolerance<T>{o.eps_ind, o.delta_floor};
}

template <typename T>
bool positive_share(const T& x) {
  if constexpr (ScalarTraits<T>::exact) {
    return x > 0;
  } else {
    return x > 1e-12;
  }
}

template <typename T>
T spend(const Grid<T>& x, std::size_t i, const std::vector<T>& prices) {
  T total{0};
  for (std::size_t k = 0; k < x.cols(); ++k) total += prices[k] * x(i, k);
  return total;
}

template <typename T>
std::vector<double> doubles(const std::vector<T>& v) {
  std::vector<double> out;
  out.reserve(v.size());
  for (const T& x : v) out.push_back(to_double(x));
  return out;
}

void emit(const SurgeryOptions& o, TraceEvent ev) {
  if (o.trace) o.trace(ev);
}

std::string edge_list(const std::vector<Edge>& edges) {
  std::ostringstream out;
  for (std::size_t e = 0; e < edges.size(); ++e)
    out << (e ? " " : "") << '(' << edges[e].first << ',' << edges[e].second << ')';
  return out.str();
}

std::vector<Edge> lost_edges(const IndifferenceGraph& before, const IndifferenceGraph& after) {
  std::vector<Edge> out;
  for (const Edge& e : before.edges())
    if (!after.has(e.first, e.second)) out.push_back(e);
  return out;
}

template <typename T>
bool envy_free(const BasicMarketSolution<T>& sol, const BasicOfflineInstance<T>& inst, const SurgeryOptions& o) {
  const Grid<T> w = value_matrix(sol.x(), inst);
  const auto tol = ind_tol<T>(o);
  for (std::size_t i = 0; i < w.rows(); ++i)
    for (std::size_t j = 0; j < w.cols(); ++j)
      if (tol.gt(w(i, j), w(i, i), w(i, i))) return false;
  return true;
}

template <typename T>
IndifferenceGraph rebuild(const BasicMarketSolution<T>& sol, const BasicOfflineInstance<T>& inst,
                          const SurgeryOptions& o, const IndifferenceGraph& previous) {
  if (!o.trace) return build_indifference_graph(sol, inst, o, &previous);
  GraphDiagnostics diag;
  IndifferenceGraph g = build_indifference_graph(sol, inst, o, &previous, &diag);
  if (!diag.suppressed.empty()) emit(o, {"hysteresis", {}, {}, 0.0, "suppressed " + edge_list(diag.suppressed)});
  if (!diag.edge_test_mismatches.empty())
    emit(o, {"diagnostic", {}, {}, 0.0, "edge test disagrees with item-level test on " + edge_list(diag.edge_test_mismatches)});
  return g;
}

template <typename T>
T max_ratio(const BasicMarketSolution<T>& sol, const BasicOfflineInstance<T>& inst) {
  T c{0};
  for (const T& r : max_bang_per_buck(inst, sol.prices))
    if (r > c) c = r;
  return c;
}

template <typename T>
bool budgets_equal(const BasicMarketSolution<T>& sol, const AgentSet& agents) {
  const Tolerance<T> tol{1e-9, 1e-12};
  for (std::size_t a : agents)
    if (!tol.eq(sol.budgets[a], sol.budgets[agents.front()])) return false;
  return true;
}

template <typename T>
void check_equal_budgets(const BasicMarketSolution<T>& sol, const AgentSet& agents, const SurgeryOptions& o,
                         const char* op) {
  if (!budgets_equal(sol, agents))
    emit(o, {op, {}, {}, 0.0, "component budgets differ beyond 1e-9"});
}

// Moves `worth` of j's bundle, proportionally, to taker.
template <typename T>
void take_proportional(Grid<T>& delta, const Grid<T>& x, const std::vector<T>& prices, std::size_t taker,
                       std::size_t giver, const T& worth) {
  const T s = spend(x, giver, prices);
  if (!(s > 0)) return;
  for (std::size_t k = 0; k < x.cols(); ++k) {
    if (!(x(giver, k) > 0)) continue;
    const T share = x(giver, k) * worth / s;
    delta(taker, k) += share;
    delta(giver, k) -= share;
  }
}

template <typename T>
BasicTransfer<T> make_transfer(Grid<T> deltas, const std::vector<T>& prices) {
  BasicTransfer<T> t;
  t.budget_deltas.assign(deltas.rows(), T{0});
  for (std::size_t i = 0; i < deltas.rows(); ++i) t.budget_deltas[i] = spend(deltas, i, prices);
  t.deltas = std::move(deltas);
  return t;
}

constexpr int kMaxHalvings = 40;

}  // namespace

template <typename T>
IndifferenceGraph build_indifference_graph(const BasicMarketSolution<T>& solution,
                                           const BasicOfflineInstance<T>& instance, const SurgeryOptions& options,
                                           const IndifferenceGraph* previous, GraphDiagnostics* diagnostics) {
  const std::size_t n = instance.agents();
  if (solution.x().rows() != n || solution.x().cols() != instance.items())
    throw InvalidInput("solution dimensions do not match the instance");
  if (previous && previous->agents() != n) throw InvalidInput("previous graph has the wrong agent count");
  const Grid<T> w = value_matrix(solution.x(), instance);
  const auto tol = ind_tol<T>(options);
  IndifferenceGraph raw(n);
  IndifferenceGraph g(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const bool on = tol.eq(w(i, i), w(i, j), w(i, i));
      raw.set(i, j, on);
      const bool blocked = on && previous && !previous->has(i, j);
      if (blocked && diagnostics) diagnostics->suppressed.emplace_back(i, j);
      g.set(i, j, on && !blocked);
    }
  if (diagnostics) {
    const auto best = max_bang_per_buck(instance, solution.prices);
    const Tolerance<T> budget_tol{1e-9, 1e-12};
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        if (i == j || !budget_tol.eq(solution.budgets[i], solution.budgets[j])) continue;
        bool all_mbb = true;
        for (std::size_t k = 0; k < instance.items() && all_mbb; ++k)
          if (positive_share(solution.x()(j, k)))
            all_mbb = tol.eq(instance.value(i, k) / solution.prices[k], best[i], best[i]);
        if (all_mbb != raw.has(i, j)) diagnostics->edge_test_mismatches.emplace_back(i, j);
      }
  }
  return g;
}

template <typename T>
BasicMarketSolution<T> apply_transfer(const BasicMarketSolution<T>& solution, const BasicTransfer<T>& transfer,
                                      const BasicOfflineInstance<T>& instance, const SurgeryOptions& options) {
  const std::size_t n = instance.agents();
  const std::size_t m = instance.items();
  const Grid<T>& d = transfer.deltas;
  if (d.rows() != n || d.cols() != m) throw InvalidInput("transfer dimensions do not match the instance");
  if (!transfer.budget_deltas.empty() && transfer.budget_deltas.size() != n)
    throw InvalidInput("transfer budget deltas have the wrong length");
  constexpr bool exact = ScalarTraits<T>::exact;

  for (std::size_t k = 0; k < m; ++k) {
    T col{0};
    for (std::size_t i = 0; i < n; ++i) col += d(i, k);
    if (exact ? col != 0 : std::fabs(to_double(col)) > 1e-11)
      throw InvalidInput("transfer changes the supply of item " + std::to_string(k));
  }
  BasicMarketSolution<T> out = solution;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < m; ++k) {
      const T v = solution.x()(i, k) + d(i, k);
      const bool ok = exact ? (v >= 0 && v <= 1) : (to_double(v) >= -1e-12 && to_double(v) <= 1 + 1e-12);
      if (!ok)
        throw InvalidInput("transfer leaves share (" + std::to_string(i) + ", " + std::to_string(k) +
                           ") outside [0, 1]");
      out.x()(i, k) = v;
    }
  const auto best = max_bang_per_buck(instance, solution.prices);
  const auto tol = ind_tol<T>(options);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < m; ++k) {
      const bool gain = exact ? d(i, k) > 0 : to_double(d(i, k)) > 1e-15;
      if (gain && !tol.eq(instance.value(i, k) / solution.prices[k], best[i], best[i]))
        throw InvalidInput("item " + std::to_string(k) + " is not maximum bang-per-buck for agent " +
                           std::to_string(i));
    }
  for (std::size_t i = 0; i < n; ++i) {
    const T delta = spend(d, i, solution.prices);
    if (!transfer.budget_deltas.empty()) {
      const Tolerance<T> check{1e-9, 1e-12};
      if (!check.eq(delta, transfer.budget_deltas[i], std::max(abs_value(delta), solution.budgets[i])))
        throw InvalidInput("budget delta of agent " + std::to_string(i) + " does not match the share changes");
    }
    out.budgets[i] = solution.budgets[i] + delta;
    if (!(out.budgets[i] > 0)) throw InvalidInput("transfer exhausts the budget of agent " + std::to_string(i));
  }
  if constexpr (!exact) {
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = 0; k < m; ++k) {
        double& v = out.x()(i, k);
        if (std::fabs(v) < 1e-15) v = 0.0;
        v = std::clamp(v, 0.0, 1.0);
      }
  }
  refresh_mbb(out, instance);
  const KktReport report = check_kkt(out, instance, options.kkt_tol);
  if (!report.pass) throw std::logic_error("transfer broke the equilibrium conditions: " + report.describe());
  return out;
}

template <typename T>
T choose_step_size(const BasicMarketSolution<T>& solution, const IndifferenceGraph& graph,
                   const BasicOfflineInstance<T>& instance, StepMode mode, const AgentSet& moving,
                   const T& feasibility_cap, const SurgeryOptions& options) {
  const std::size_t n = instance.agents();
  if (graph.agents() != n) throw InvalidInput("graph has the wrong agent count");
  const T c = max_ratio(solution, instance);
  if (!(c > 0)) throw InvalidInput("maximum bang-per-buck is not positive");
  std::vector<bool> in(n, false);
  for (std::size_t a : moving) in.at(a) = true;
  const Grid<T> w = value_matrix(solution.x(), instance);
  const auto tol = ind_tol<T>(options);
  std::optional<T> best;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const bool counted = mode == StepMode::operation1 ? in[j] : (in[i] || in[j]);
      if (!counted || !tol.gt(w(i, i), w(i, j), w(i, i))) continue;
      const T gap = w(i, i) - w(i, j);
      const T bound = mode == StepMode::operation1 ? T(gap / c) : T(gap / (2 * c));
      if (!best || bound < *best) best = bound;
    }
  if (!best) return feasibility_cap;
  const T half = *best / 2;
  return half < feasibility_cap ? half : feasibility_cap;
}

template <typename T>
T max_min_gap_step(const BasicMarketSolution<T>& solution, const IndifferenceGraph& graph,
                   const BasicOfflineInstance<T>& instance, const Grid<T>& unit, const T& limit,
                   const SurgeryOptions& /*options*/) {
  const std::size_t n = instance.agents();
  const Grid<T> w = value_matrix(solution.x(), instance);
  const Grid<T> dw = value_matrix(unit, instance);
  // gap_ij(b) = g + s b for every pair that is, or becomes, non-indifferent.
  std::vector<std::pair<T, T>> lines;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const T g = w(i, i) - w(i, j);
      const T s = dw(i, i) - dw(i, j);
      if (graph.has(i, j) && !(s > 0)) continue;
      lines.emplace_back(graph.has(i, j) ? T{0} : g, s);
    }
  if (lines.empty() || !(limit > 0)) return limit;
  const auto value_at = [&](const T& b) {
    T low = lines.front().first + lines.front().second * b;
    for (const auto& [g, s] : lines) {
      const T v = g + s * b;
      if (v < low) low = v;
    }
    return low;
  };
  T best_b = limit;
  T best = value_at(limit);
  for (std::size_t a = 0; a < lines.size(); ++a)
    for (std::size_t c = a + 1; c < lines.size(); ++c) {
      const T ds = lines[a].second - lines[c].second;
      if (ds == 0) continue;
      const T b = (lines[c].first - lines[a].first) / ds;
      if (!(b > 0) || b > limit) continue;
      const T v = value_at(b);
      if (v > best || (v == best && b < best_b)) {
        best = v;
        best_b = b;
      }
    }
  return best > 0 ? best_b : T{0};
}

namespace {

template <typename T>
Grid<T> scaled(const Grid<T>& unit, const T& factor) {
  Grid<T> out = unit;
  for (std::size_t r = 0; r < out.rows(); ++r)
    for (T& v : out.row(r)) v *= factor;
  return out;
}

template <typename T>
T pick_step(const BasicMarketSolution<T>& sol, const IndifferenceGraph& g, const BasicOfflineInstance<T>& instance,
            StepMode mode, const AgentSet& moving, const Grid<T>& unit, const T& cap, const T& search_limit,
            const SurgeryOptions& options) {
  const T bound = choose_step_size(sol, g, instance, mode, moving, cap, options);
  if (options.step_rule == StepRule::half_bound) return bound;
  const T b = max_min_gap_step(sol, g, instance, unit, search_limit, options);
  return b > bound ? b : bound;
}

}  // namespace

template <typename T>
SurgeryState<T> operation1_eliminate_cycles(SurgeryState<T> state, const BasicOfflineInstance<T>& instance,
                                            const AgentSet& component, const SurgeryOptions& options) {
  const std::size_t n = instance.agents();
  std::vector<bool> in(n, false);
  for (std::size_t a : component) in.at(a) = true;
  check_equal_budgets(state.solution, component, options, "operation1");
  std::set<std::tuple<std::size_t, std::size_t, std::size_t>> skipped;
  const auto tol = ind_tol<T>(options);

  for (std::size_t guard = 0; guard < n * n * n + 1; ++guard) {
    // Shortest cycle a -> b -> c -> ... -> a lacking the chord a -> c.
    std::size_t best_len = n + 1;
    std::tuple<std::size_t, std::size_t, std::size_t> pick{};
    std::vector<std::size_t> pick_path;
    const IndifferenceGraph& g = state.graph;
    for (std::size_t a : component)
      for (std::size_t b : component) {
        if (!g.has(a, b)) continue;
        for (std::size_t c : component) {
          if (c == a || c == b || !g.has(b, c) || g.has(a, c) || skipped.count({a, b, c})) continue;
          std::vector<bool> allowed = in;
          allowed[b] = false;
          auto path = g.shortest_path(c, a, allowed);
          if (path.empty() || path.size() + 1 >= best_len) continue;
          best_len = path.size() + 1;
          pick = {a, b, c};
          pick_path = std::move(path);
        }
      }
    if (pick_path.empty()) break;
    const auto [a, b, c] = pick;

    std::vector<std::size_t> cycle{b};
    cycle.insert(cycle.end(), pick_path.begin(), pick_path.end());  // b, c, ..., a
    const auto succ = [&](std::size_t pos) { return cycle[(pos + 1) % cycle.size()]; };

    const BasicMarketSolution<T>& sol = state.solution;
    const T ra = max_bang_per_buck(instance, sol.prices)[a];
    std::optional<std::size_t> item;
    T item_ratio{0};
    for (std::size_t k = 0; k < instance.items(); ++k) {
      if (!positive_share(sol.x()(c, k))) continue;
      const T ratio = instance.value(a, k) / sol.prices[k];
      if (tol.eq(ratio, ra, ra)) continue;
      if (!item || ratio < item_ratio) {
        item = k;
        item_ratio = ratio;
      }
    }
    if (!item) {
      skipped.insert(pick);
      emit(options, {"operation1", {}, {}, 0.0, "no non-MBB item on " + edge_list({{a, c}}) + "; cycle skipped"});
      continue;
    }
    const std::size_t l = *item;

    T cap = sol.x()(c, l) * sol.prices[l];
    for (std::size_t pos = 0; pos < cycle.size(); ++pos) {
      const std::size_t j = succ(pos);
      if (j == c) continue;
      const T s = spend(sol.x(), j, sol.prices);
      if (s < cap) cap = s;
    }
    Grid<T> unit(n, instance.items());
    unit(b, l) += T{1} / sol.prices[l];
    unit(c, l) -= T{1} / sol.prices[l];
    for (std::size_t pos = 1; pos < cycle.size(); ++pos) take_proportional(unit, sol.x(), sol.prices, cycle[pos], succ(pos), T{1});
    T amount = pick_step(sol, g, instance, StepMode::operation1, cycle, unit, cap, cap, options);

    bool committed = false;
    for (int attempt = 0; attempt < kMaxHalvings && !committed; ++attempt, amount /= 2) {
      const auto transfer = make_transfer(scaled(unit, amount), sol.prices);
      auto next = apply_transfer(sol, transfer, instance, options);
      if (!envy_free(next, instance, options)) continue;
      auto next_graph = rebuild(next, instance, options, g);
      const auto removed = lost_edges(g, next_graph);
      if (removed.empty()) break;
      emit(options, {"operation1", removed, doubles(transfer.budget_deltas), to_double(amount), ""});
      state.solution = std::move(next);
      state.graph = std::move(next_graph);
      committed = true;
    }
    if (!committed) {
      skipped.insert(pick);
      emit(options, {"operation1", {}, {}, 0.0, "transfer on " + edge_list({{a, b}}) + " removed no edge; cycle skipped"});
    }
  }
  return state;
}

template <typename T>
RebalanceResult<T> operation2_merge_rebalance(SurgeryState<T> state, const BasicOfflineInstance<T>& instance,
                                              const AgentSet& component, const SurgeryOptions& options) {
  check_equal_budgets(state.solution, component, options, "operation2");
  CliquePartition partition = greedy_cliques(state.graph, component);
  RebalanceResult<T> result{std::move(state), std::move(partition), false};
  const BasicMarketSolution<T>& sol = result.state.solution;
  const std::size_t m = instance.items();
  Grid<T> delta(instance.agents(), m);
  bool any = false;
  for (const AgentSet& clique : result.partition.cliques) {
    if (clique.size() < 2) continue;
    for (std::size_t k = 0; k < m; ++k) {
      T avg{0};
      for (std::size_t i : clique) avg += sol.x()(i, k);
      avg /= static_cast<int>(clique.size());
      for (std::size_t i : clique) {
        delta(i, k) = avg - sol.x()(i, k);
        if (delta(i, k) != 0) any = true;
      }
    }
  }
  if (!any) return result;
  const auto transfer = make_transfer(std::move(delta), sol.prices);
  auto next = apply_transfer(sol, transfer, instance, options);
  if (!envy_free(next, instance, options)) throw std::logic_error("re-balancing created envy");
  auto next_graph = rebuild(next, instance, options, result.state.graph);
  const auto removed = lost_edges(result.state.graph, next_graph);
  result.edges_removed = !removed.empty();
  emit(options, {"operation2", removed, doubles(transfer.budget_deltas), 0.0, ""});
  result.state = {std::move(next), std::move(next_graph)};
  return result;
}

template <typename T>
SurgeryState<T> budget_shift(SurgeryState<T> state, const BasicOfflineInstance<T>& instance, const AgentSet& component,
                             const SurgeryOptions& options, std::optional<T> step) {
  const std::size_t n = instance.agents();
  const IndifferenceGraph& g = state.graph;
  const BasicMarketSolution<T>& sol = state.solution;
  check_equal_budgets(sol, component, options, "budget_shift");
  const CliquePartition part = greedy_cliques(g, component);
  const std::size_t q = part.size();

  std::vector<std::vector<bool>> dag(q, std::vector<bool>(q, false));
  bool cross = false;
  for (std::size_t x = 0; x < q; ++x)
    for (std::size_t y = 0; y < q; ++y) {
      if (x == y) continue;
      for (std::size_t u : part.cliques[x])
        for (std::size_t v : part.cliques[y])
          if (g.has(u, v)) dag[x][y] = true;
      cross = cross || dag[x][y];
    }
  if (!cross) throw InvalidInput("budget shift needs an edge between two cliques of the component");

  std::vector<std::size_t> indeg(q, 0), outdeg(q, 0);
  for (std::size_t x = 0; x < q; ++x)
    for (std::size_t y = 0; y < q; ++y)
      if (dag[x][y]) ++outdeg[x], ++indeg[y];
  {
    std::vector<std::size_t> deg = indeg;
    std::deque<std::size_t> ready;
    for (std::size_t x = 0; x < q; ++x)
      if (deg[x] == 0) ready.push_back(x);
    std::size_t seen = 0;
    while (!ready.empty()) {
      const std::size_t x = ready.front();
      ready.pop_front();
      ++seen;
      for (std::size_t y = 0; y < q; ++y)
        if (dag[x][y] && --deg[y] == 0) ready.push_back(y);
    }
    if (seen != q) throw std::logic_error("component is not clique-acyclic");
  }
  std::size_t source = q;
  for (std::size_t x = 0; x < q && source == q; ++x)
    if (indeg[x] == 0 && outdeg[x] > 0) source = x;

  std::vector<bool> reach(q, false);
  std::deque<std::size_t> queue{source};
  reach[source] = true;
  while (!queue.empty()) {
    const std::size_t x = queue.front();
    queue.pop_front();
    for (std::size_t y = 0; y < q; ++y)
      if (dag[x][y] && !reach[y]) reach[y] = true, queue.push_back(y);
  }
  std::vector<std::size_t> sinks;
  for (std::size_t x = 0; x < q; ++x)
    if (reach[x] && outdeg[x] == 0) sinks.push_back(x);

  std::vector<bool> in(n, false);
  for (std::size_t a : component) in[a] = true;
  const AgentSet& src = part.cliques[source];
  Grid<T> flow(n, n);
  for (std::size_t a : src)
    for (std::size_t z : sinks) {
      const AgentSet& sink = part.cliques[z];
      const T unit = T{1} / T(static_cast<int>(src.size() * sinks.size() * sink.size()));
      for (std::size_t y : sink) {
        const auto path = g.shortest_path(a, y, in);
        if (path.empty()) throw std::logic_error("sink agent unreachable from the source clique");
        for (std::size_t s = 0; s + 1 < path.size(); ++s) flow(path[s], path[s + 1]) += unit;
      }
    }

  T cap = sol.budgets[src.front()];
  for (std::size_t j = 0; j < n; ++j) {
    T out{0};
    for (std::size_t i = 0; i < n; ++i) out += flow(i, j);
    if (out > 0) {
      const T limit = spend(sol.x(), j, sol.prices) / out;
      if (limit < cap) cap = limit;
    }
  }
  Grid<T> unit(n, instance.items());
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (flow(i, j) > 0) take_proportional(unit, sol.x(), sol.prices, i, j, flow(i, j));
  T amount;
  if (step) {
    if (!(*step > 0) || *step > cap) throw InvalidInput("budget shift step is not in (0, cap]");
    amount = *step;
  } else {
    // Emptying a sink's bundle would zero its budget, so the search stops at half the cap.
    amount = pick_step(sol, g, instance, StepMode::budget_shift, component, unit, cap, T(cap / 2), options);
  }

  const int attempts = step ? 1 : kMaxHalvings;
  for (int attempt = 0; attempt < attempts; ++attempt, amount /= 2) {
    const auto transfer = make_transfer(scaled(unit, amount), sol.prices);
    auto next = apply_transfer(sol, transfer, instance, options);
    if (!envy_free(next, instance, options)) continue;
    auto next_graph = rebuild(next, instance, options, g);
    const auto removed = lost_edges(g, next_graph);
    if (removed.empty()) continue;
    emit(options, {"budget_shift", removed, doubles(transfer.budget_deltas), to_double(amount), ""});
    return {std::move(next), std::move(next_graph)};
  }
  emit(options, {"budget_shift", {}, {}, 0.0, "no admissible step removed an edge"});
  return state;
}

namespace {

template <typename T>
SurgeryState<T> make_clique_acyclic(SurgeryState<T> state, const BasicOfflineInstance<T>& instance,
                                    const AgentSet& component, const SurgeryOptions& options,
                                    std::size_t& eliminations) {
  for (std::size_t guard = 0; guard <= instance.agents() * instance.agents(); ++guard) {
    const std::size_t before = state.graph.edge_count();
    state = operation1_eliminate_cycles(std::move(state), instance, component, options);
    eliminations += before - state.graph.edge_count();
    auto merged = operation2_merge_rebalance(std::move(state), instance, component, options);
    state = std::move(merged.state);
    if (!merged.edges_removed) break;
  }
  return state;
}

template <typename T>
CliquePartition full_partition(const IndifferenceGraph& g) {
  CliquePartition out;
  for (const AgentSet& comp : g.components())
    for (AgentSet& c : greedy_cliques(g, comp).cliques) out.cliques.push_back(std::move(c));
  std::sort(out.cliques.begin(), out.cliques.end());
  return out;
}

}  // namespace

template <typename T>
CisefResult<T> refine_to_cisef(BasicMarketSolution<T> solution, const BasicOfflineInstance<T>& instance,
                               const SurgeryOptions& options) {
  const std::size_t n = instance.agents();
  AgentSet everyone(n);
  for (std::size_t i = 0; i < n; ++i) everyone[i] = i;
  if (!budgets_equal(solution, everyone)) throw InvalidInput("surgery needs a solution with equal budgets");
  const KktReport report = check_kkt(solution, instance, options.kkt_tol);
  if (!report.pass) throw InvalidInput("input solution fails the equilibrium check: " + report.describe());

  CisefResult<T> result;
  SurgeryState<T> state{std::move(solution), {}};
  state.graph = build_indifference_graph(state.solution, instance, options);
  result.initial_edges = state.graph.edge_count();

  for (std::size_t pass = 0; pass <= n * n; ++pass) {
    const std::size_t before = state.graph.edge_count();
    for (const AgentSet& comp : state.graph.components())
      if (comp.size() > 1) state = make_clique_acyclic(std::move(state), instance, comp, options, result.cycle_eliminations);
    for (const AgentSet& comp : state.graph.components()) {
      if (comp.size() < 2 || greedy_cliques(state.graph, comp).size() < 2) continue;
      state = budget_shift(std::move(state), instance, comp, options);
      ++result.budget_shifts;
    }
    if (state.graph.edge_count() >= before) break;
    ++result.passes;
  }
  for (const AgentSet& comp : state.graph.components())
    if (comp.size() > 1) state = operation2_merge_rebalance(std::move(state), instance, comp, options).state;

  result.partition = full_partition<T>(state.graph);
  result.solution = std::move(state.solution);
  result.graph = std::move(state.graph);
  return result;
}

template <typename T>
CisefResult<T> compute_cisef(const BasicOfflineInstance<T>& instance, const SurgeryOptions& options) {
  const auto& e = instance.budgets();
  for (const T& b : e)
    if (!Tolerance<T>{1e-12, 1e-15}.eq(b, e.front()))
      throw InvalidInput("compute_cisef needs equal budgets");
  return refine_to_cisef(solve_eg(instance, options.solver), instance, options);
}

template <typename T>
CisefResult<T> strongify_independent(const ProductSupport& support, const BasicOfflineInstance<T>& instance,
                                     CisefResult<T> cisef, const SurgeryOptions& options) {
  const std::size_t n = instance.agents();
  if (support.agents() != n) throw InvalidInput("support and instance disagree on the agent count");
  for (std::size_t i = 0; i < n; ++i)
    if (support.values[i].size() < 2)
      throw InvalidInput("agent " + std::to_string(i) + " has a point-mass value distribution");
  if (support.type_count() != instance.original_items())
    throw InvalidInput("instance is not the expansion of this support");

  std::vector<std::optional<std::size_t>> column(instance.original_items());
  for (std::size_t k = 0; k < instance.items(); ++k) column[instance.kept_types()[k]] = k;
  std::vector<std::size_t> top(n);
  for (std::size_t i = 0; i < n; ++i) top[i] = support.values[i].size() - 1;

  SurgeryState<T> state{std::move(cisef.solution), std::move(cisef.graph)};
  CliquePartition part = std::move(cisef.partition);

  for (std::size_t guard = 0; guard <= n; ++guard) {
    auto it = std::find_if(part.cliques.begin(), part.cliques.end(), [](const AgentSet& c) { return c.size() > 1; });
    if (it == part.cliques.end()) break;
    const AgentSet clique = *it;
    const BasicMarketSolution<T>& sol = state.solution;

    std::optional<std::size_t> high;
    for (std::size_t k = 0; k < instance.items() && !high; ++k) {
      if (!positive_share(sol.x()(clique.front(), k))) continue;
      const auto d = support.digits(instance.kept_types()[k]);
      if (std::all_of(clique.begin(), clique.end(), [&](std::size_t i) { return d[i] == top[i]; })) high = k;
    }
    if (!high) throw std::logic_error("clique holds no item of maximal value to all its members");
    const std::size_t j = *high;
    const auto digits = support.digits(instance.kept_types()[j]);

    struct Swap {
      std::size_t agent, item, holder;
    };
    std::vector<Swap> swaps;
    std::vector<bool> moving(n, false);
    for (std::size_t i : clique) moving[i] = true;
    T cap{-1};
    const auto lower = [&cap](const T& v) {
      if (cap < 0 || v < cap) cap = v;
    };
    for (std::size_t i : clique) {
      auto d = digits;
      for (std::size_t t : clique) d[t] = t == i ? top[t] : 0;
      const std::size_t type = support.index(d);
      if (!column[type]) throw std::logic_error("swap item is worthless to every agent");
      const std::size_t item = *column[type];
      std::optional<std::size_t> holder;
      for (std::size_t h = 0; h < n; ++h) {
        if (std::find(clique.begin(), clique.end(), h) != clique.end() || !positive_share(sol.x()(h, item))) continue;
        if (!holder || sol.x()(h, item) > sol.x()(*holder, item)) holder = h;
      }
      if (!holder) throw std::logic_error("swap item is held only inside the clique");
      const AgentSet& other = part.cliques[part.part_of(*holder)];
      for (std::size_t h : other) moving[h] = true;
      swaps.push_back({i, item, *holder});
      lower(sol.x()(i, j) * sol.prices[j]);
      lower(sol.x()(*holder, item) * sol.prices[item] * T(static_cast<int>(other.size())));
    }
    const T k_size(static_cast<int>(clique.size()));
    AgentSet movers;
    for (std::size_t a = 0; a < n; ++a)
      if (moving[a]) movers.push_back(a);
    // Unit direction for b = 1; each member swaps delta = b / k worth.
    const T delta_worth = T{1} / k_size;
    Grid<T> unit(n, instance.items());
    for (const Swap& s : swaps) {
      const AgentSet& other = part.cliques[part.part_of(s.holder)];
      const T share(static_cast<int>(other.size()));
      unit(s.agent, j) -= delta_worth / sol.prices[j];
      unit(s.agent, s.item) += delta_worth / sol.prices[s.item];
      for (std::size_t h : other) {
        unit(h, j) += delta_worth / sol.prices[j] / share;
        unit(h, s.item) -= delta_worth / sol.prices[s.item] / share;
      }
    }
    const T b_cap = cap * k_size;
    T b = pick_step(sol, state.graph, instance, StepMode::budget_shift, movers, unit, b_cap, b_cap, options);

    bool committed = false;
    for (int attempt = 0; attempt < kMaxHalvings && !committed; ++attempt, b /= 2) {
      const auto transfer = make_transfer(scaled(unit, b), sol.prices);
      auto next = apply_transfer(sol, transfer, instance, options);
      if (!envy_free(next, instance, options)) continue;
      auto next_graph = rebuild(next, instance, options, state.graph);
      bool broken = true;
      for (std::size_t a : clique)
        for (std::size_t c : clique)
          if (next_graph.has(a, c)) broken = false;
      if (!broken) continue;
      emit(options, {"strongify", lost_edges(state.graph, next_graph), doubles(transfer.budget_deltas),
                     to_double(b), ""});
      state = {std::move(next), std::move(next_graph)};
      committed = true;
    }
    if (!committed) throw std::logic_error("no admissible swap separated the clique");

    const std::size_t at = static_cast<std::size_t>(it - part.cliques.begin());
    part.cliques.erase(part.cliques.begin() + static_cast<std::ptrdiff_t>(at));
    for (std::size_t a : clique) part.cliques.push_back({a});
    std::sort(part.cliques.begin(), part.cliques.end());
  }

  cisef.solution = std::move(state.solution);
  cisef.graph = std::move(state.graph);
  cisef.partition = std::move(part);
  return cisef;
}

#define FAIRDIV_INSTANTIATE_CISEF(T)                                                                                 \
  template IndifferenceGraph build_indifference_graph<T>(const BasicMarketSolution<T>&,                             \
                                                         const BasicOfflineInstance<T>&, const SurgeryOptions&,     \
                                                         const IndifferenceGraph*, GraphDiagnostics*);              \
  template BasicMarketSolution<T> apply_transfer<T>(const BasicMarketSolution<T>&, const BasicTransfer<T>&,        \
                                                    const BasicOfflineInstance<T>&, const SurgeryOptions&);         \
  template T choose_step_size<T>(const BasicMarketSolution<T>&, const IndifferenceGraph&,                           \
                                 const BasicOfflineInstance<T>&, StepMode, const AgentSet&, const T&,               \
                                 const SurgeryOptions&);                                                            \
  template T max_min_gap_step<T>(const BasicMarketSolution<T>&, const IndifferenceGraph&,                           \
                                 const BasicOfflineInstance<T>&, const Grid<T>&, const T&, const SurgeryOptions&);  \
  template SurgeryState<T> operation1_eliminate_cycles<T>(SurgeryState<T>, const BasicOfflineInstance<T>&,          \
                                                          const AgentSet&, const SurgeryOptions&);                  \
  template RebalanceResult<T> operation2_merge_rebalance<T>(SurgeryState<T>, const BasicOfflineInstance<T>&,        \
                                                            const AgentSet&, const SurgeryOptions&);                \
  template SurgeryState<T> budget_shift<T>(SurgeryState<T>, const BasicOfflineInstance<T>&, const AgentSet&,        \
                                           const SurgeryOptions&, std::optional<T>);                                \
  template CisefResult<T> compute_cisef<T>(const BasicOfflineInstance<T>&, const SurgeryOptions&);                  \
  template CisefResult<T> refine_to_cisef<T>(BasicMarketSolution<T>, const BasicOfflineInstance<T>&,                \
                                             const SurgeryOptions&);                                                \
  template CisefResult<T> strongify_independent<T>(const ProductSupport&, const BasicOfflineInstance<T>&,           \
                                                   CisefResult<T>, const SurgeryOptions&);

FAIRDIV_INSTANTIATE_CISEF(double)
FAIRDIV_INSTANTIATE_CISEF(Rational)

}  // namespace fairdiv
