// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fairdiv/adversary.hpp"
#include "fairdiv/cisef.hpp"
#include "fairdiv/core.hpp"
#include "fairdiv/rng.hpp"

namespace fairdiv {

enum class Policy { utilitarian, por, pocr, uniform, round_robin };

Policy parse_policy(std::string_view name);
const char* policy_name(Policy policy);
/// por and pocr need a precomputed fractional allocation.
bool needs_plan(Policy policy);

/// Raised when an allocator cannot run against the chosen adversary.
class IncompatiblePolicy : public InvalidInput {
 public:
  using InvalidInput::InvalidInput;
};

/// Fractional allocation over the full type list of a distribution.
struct Plan {
  Grid<double> xstar;  // n x (original types)
  CliquePartition cliques;
  std::vector<double> budgets;
};

/// Expands a solution of scale_values(dist, ...) back to every type.
Plan make_plan(const MarketSolution& solution, const OfflineInstance& instance, CliquePartition cliques);

/// Per-run allocator state. running()(i, j) is v_i(A_j) so far.
class AllocatorState {
 public:
  /// Throws InvalidInput if a por/pocr plan is missing or has a column
  /// (or clique mass) not summing to 1 within 1e-9.
  AllocatorState(Policy policy, std::size_t n, Philox4x32 rng, const Plan* plan = nullptr, bool point_mass = false);

  Policy policy() const { return policy_; }
  std::size_t agents() const { return n_; }
  bool point_mass() const { return point_mass_; }
  const Plan* plan() const { return plan_; }
  Philox4x32& rng() { return rng_; }
  std::size_t rounds() const { return rounds_; }

  const Grid<double>& running() const { return running_; }
  const Grid<double>& max_item() const { return max_item_; }

  /// Adds an item with the given per-agent values to `agent`'s bundle.
  void record(std::size_t agent, std::span<const double> values);

 private:
  Policy policy_;
  std::size_t n_;
  Philox4x32 rng_;
  const Plan* plan_;
  bool point_mass_;
  std::size_t rounds_ = 0;
  Grid<double> running_;
  Grid<double> max_item_;
};

/// Argmax of values with uniform tie-breaking; cyclic in point-mass mode.
std::size_t utilitarian_step(AllocatorState& state, std::span<const double> values);
/// Agent i with probability X*_ij.
std::size_t por_step(AllocatorState& state, std::size_t type);
/// Clique with probability sum_{k in C} X*_kj, then its member with the
/// least value so far under the lowest-index member's valuation (ties to the
/// lowest index).
std::size_t pocr_step(AllocatorState& state, std::size_t type);
std::size_t uniform_step(AllocatorState& state);
std::size_t round_robin_step(AllocatorState& state);

/// Dispatches on the state's policy.
std::size_t allocate(AllocatorState& state, std::size_t type, std::span<const double> values);

struct RunOptions {
  /// Trial substream of the seed.
  std::uint64_t stream = 0;
  /// Rounds after which envy is recorded; empty means powers of two and T.
  std::vector<std::size_t> checkpoints;
};

/// Powers of two below T, then T.
std::vector<std::size_t> default_checkpoints(std::size_t T);

struct OnlineResult {
  IntegralAllocation allocation;
  OnlineRun run;
};

/// T i.i.d. arrivals from dist allocated by `policy`; deterministic given
/// (dist, policy, plan, T, seed, stream).
OnlineResult run_online(const TypeDistribution& dist, Policy policy, std::size_t T, std::uint64_t seed,
                        const Plan* plan = nullptr, const RunOptions& options = {});

/// Fixed value sequence (rows are rounds). por/pocr are rejected.
OnlineResult run_sequence(const ItemValues& items, Policy policy, std::uint64_t seed, const RunOptions& options = {});

/// Interactive run against the adaptive adversary. por/pocr are rejected.
OnlineResult run_adaptive(AdaptiveStateMachine& adversary, std::size_t n, Policy policy, std::size_t T,
                          std::uint64_t seed, const RunOptions& options = {});

}  // namespace fairdiv
