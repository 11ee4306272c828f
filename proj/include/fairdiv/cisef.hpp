// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "fairdiv/core.hpp"
#include "fairdiv/market.hpp"

namespace fairdiv {

using AgentSet = std::vector<std::size_t>;
using Edge = std::pair<std::size_t, std::size_t>;

/// Directed graph with an edge i -> j when agent i values j's bundle as much
/// as her own.
class IndifferenceGraph {
 public:
  IndifferenceGraph() = default;
  explicit IndifferenceGraph(std::size_t n) : n_(n), adj_(n * n, false) {}

  std::size_t agents() const { return n_; }
  bool has(std::size_t i, std::size_t j) const { return adj_[i * n_ + j]; }
  void set(std::size_t i, std::size_t j, bool on) { adj_[i * n_ + j] = on && i != j; }
  std::size_t edge_count() const;
  std::vector<Edge> edges() const;
  bool is_clique(const AgentSet& agents) const;
  /// Weakly connected components in ascending order of their lowest agent.
  std::vector<AgentSet> components() const;
  /// Shortest directed path from -> to inside `allowed` (both endpoints
  /// included); empty if none.
  std::vector<std::size_t> shortest_path(std::size_t from, std::size_t to, const std::vector<bool>& allowed) const;

  friend bool operator==(const IndifferenceGraph&, const IndifferenceGraph&) = default;

 private:
  std::size_t n_ = 0;
  std::vector<bool> adj_;
};

/// Disjoint agent sets covering all agents.
struct CliquePartition {
  std::vector<AgentSet> cliques;

  std::size_t part_of(std::size_t agent) const;
  std::size_t size() const { return cliques.size(); }
};

/// Share changes and the budget changes they induce (delta_i = sum_k p_k D_ik).
template <typename T>
struct BasicTransfer {
  Grid<T> deltas;
  std::vector<T> budget_deltas;
};

using Transfer = BasicTransfer<double>;

/// One step of the surgery, emitted when a trace sink is installed.
struct TraceEvent {
  std::string operation;
  std::vector<Edge> removed_edges;
  std::vector<double> budget_deltas;
  double step = 0.0;
  std::string note;
};

/// half_bound: half of the safe bound from choose_step_size.
/// max_min_gap: the step along the transfer direction that maximizes the
/// smallest resulting envy gap (gaps are linear in the step), never below
/// the half bound.
enum class StepRule { half_bound, max_min_gap };

struct SurgeryOptions {
  /// Relative indifference tolerance (ignored by exact scalars).
  double eps_ind = 1e-7;
  double delta_floor = 1e-12;
  /// Working tolerance for the KKT check after every transfer.
  double kkt_tol = 1e-6;
  StepRule step_rule = StepRule::max_min_gap;
  SolverOptions solver;
  std::function<void(const TraceEvent&)> trace;
};

struct GraphDiagnostics {
  /// Pairs where the value-level edge test and the item-level MBB test
  /// disagree (equal-budget pairs only).
  std::vector<Edge> edge_test_mismatches;
  /// Edges the tolerance rule would add back but hysteresis suppressed.
  std::vector<Edge> suppressed;
};

/// Indifference graph of the solution. When `previous` is given, edges absent
/// from it are never added back (hysteresis).
template <typename T>
IndifferenceGraph build_indifference_graph(const BasicMarketSolution<T>& solution,
                                           const BasicOfflineInstance<T>& instance, const SurgeryOptions& options = {},
                                           const IndifferenceGraph* previous = nullptr,
                                           GraphDiagnostics* diagnostics = nullptr);

/// Applies an optimal transfer, returning (X + D, p, e + delta). Rejects
/// infeasible shares, unbalanced columns, and shares added on items that
/// are not maximum bang-per-buck for the recipient; the input is untouched.
template <typename T>
BasicMarketSolution<T> apply_transfer(const BasicMarketSolution<T>& solution, const BasicTransfer<T>& transfer,
                                      const BasicOfflineInstance<T>& instance, const SurgeryOptions& options = {});

enum class StepMode { operation1, budget_shift };

/// Safe transfer size: half of min gap / c (Operation 1) or min gap / 2c
/// (budget shifts) over the non-indifferent pairs that can move, capped by
/// `feasibility_cap`.
template <typename T>
T choose_step_size(const BasicMarketSolution<T>& solution, const IndifferenceGraph& graph,
                   const BasicOfflineInstance<T>& instance, StepMode mode, const AgentSet& moving,
                   const T& feasibility_cap, const SurgeryOptions& options = {});

/// argmax over b in (0, limit] of min_{i != j} gap_ij(b) for X + b * unit,
/// over pairs that are non-indifferent now or become so. Returns 0 if no
/// step keeps every such gap positive.
template <typename T>
T max_min_gap_step(const BasicMarketSolution<T>& solution, const IndifferenceGraph& graph,
                   const BasicOfflineInstance<T>& instance, const Grid<T>& unit, const T& limit,
                   const SurgeryOptions& options = {});

template <typename T>
struct SurgeryState {
  BasicMarketSolution<T> solution;
  IndifferenceGraph graph;
};

/// Removes every cycle whose vertex set is not a clique inside `component`,
/// shortest first. Utilities v_i(X_i) and budgets are unchanged.
template <typename T>
SurgeryState<T> operation1_eliminate_cycles(SurgeryState<T> state, const BasicOfflineInstance<T>& instance,
                                            const AgentSet& component, const SurgeryOptions& options = {});

template <typename T>
struct RebalanceResult {
  SurgeryState<T> state;
  CliquePartition partition;  // of the component only
  bool edges_removed = false;
};

/// Greedy clique merging (lowest index first) followed by averaging rows
/// within each clique.
template <typename T>
RebalanceResult<T> operation2_merge_rebalance(SurgeryState<T> state, const BasicOfflineInstance<T>& instance,
                                              const AgentSet& component, const SurgeryOptions& options = {});

/// Deterministic greedy clique partition of `component` without touching X.
CliquePartition greedy_cliques(const IndifferenceGraph& graph, const AgentSet& component);

/// Shifts budget from the sink cliques to a source clique of the clique DAG
/// along indifference edges. `step` overrides the automatic step size.
/// Throws InvalidInput if the component has no inter-clique edge.
template <typename T>
SurgeryState<T> budget_shift(SurgeryState<T> state, const BasicOfflineInstance<T>& instance, const AgentSet& component,
                             const SurgeryOptions& options = {}, std::optional<T> step = std::nullopt);

template <typename T>
struct CisefResult {
  BasicMarketSolution<T> solution;
  CliquePartition partition;
  IndifferenceGraph graph;
  std::size_t initial_edges = 0;
  std::size_t passes = 0;  // outer passes that removed at least one edge
  std::size_t budget_shifts = 0;
  std::size_t cycle_eliminations = 0;
};

/// Equal-budget equilibrium refined into a clique-identical strongly
/// envy-free equilibrium (possibly with unequal budgets).
template <typename T>
CisefResult<T> compute_cisef(const BasicOfflineInstance<T>& instance, const SurgeryOptions& options = {});

/// Same refinement starting from a given equal-budget solution.
template <typename T>
CisefResult<T> refine_to_cisef(BasicMarketSolution<T> solution, const BasicOfflineInstance<T>& instance,
                               const SurgeryOptions& options = {});

/// Breaks every clique of a CISEF solution of an independent-agents instance
/// by swapping high-value items with holders outside the clique. The
/// returned partition is all singletons.
template <typename T>
CisefResult<T> strongify_independent(const ProductSupport& support, const BasicOfflineInstance<T>& instance,
                                     CisefResult<T> cisef, const SurgeryOptions& options = {});

}  // namespace fairdiv
