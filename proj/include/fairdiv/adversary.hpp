// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "fairdiv/core.hpp"

namespace fairdiv {

/// Finite value distribution of a single agent.
struct ValueDistribution {
  std::vector<double> values;
  std::vector<double> probs;
};

inline constexpr std::size_t kDefaultTypeCap = 100'000;

/// n independent draws from the same marginal, one type per value profile.
TypeDistribution identical_iid(const ValueDistribution& marginal, std::size_t n, std::size_t cap = kDefaultTypeCap);

/// Product of per-agent marginals. Supports are sorted and merged, so the
/// result carries a ProductSupport whose mixed-radix index equals the type
/// column (agent 0 most significant). v_i((a_1, ..., a_n)) = a_i.
TypeDistribution independent_expansion(const std::vector<ValueDistribution>& marginals,
                                       std::size_t cap = kDefaultTypeCap);

/// Explicit correlated types; `values` is agent-major (n x m).
TypeDistribution correlated_iid(std::vector<int> type_ids, std::vector<double> probs, Grid<double> values);

/// Segmented instance: rows (T/n)(i-1) .. (T/n)i - 1 are worth 1 to agent i
/// and eps to everyone else.
ItemValues lower_bound_instance(std::size_t n, std::size_t T, double eps);

/// I_i: the first (T/n) i rows follow the segmented instance, the rest are
/// worth 0 to everyone. `segments` ranges over 0..n.
ItemValues lower_bound_prefix(std::size_t n, std::size_t T, double eps, std::size_t segments);

/// Adaptive adversary for two value-bearing agents.
///
/// States are integers: 0 emits (1, 1), -i (L_i) emits (1, nu_i) and +i
/// (R_i) emits (nu_i, 1), with nu_i = (i + 1)^r - i^r. Giving the item to
/// agent 0 moves one state right, giving it to agent 1 moves one state left;
/// any other agent leaves the state unchanged. Agents beyond the first two
/// always get value 0.
class AdaptiveStateMachine {
 public:
  AdaptiveStateMachine(double r, std::size_t n = 2);

  static double nu(double r, std::size_t i);

  /// Values of the next item. Throws InvalidInput if the previous item's
  /// allocation has not been reported.
  std::vector<double> next();
  void feedback(std::size_t agent);

  long state() const { return state_; }
  std::size_t rounds() const { return rounds_; }

 private:
  double r_;
  std::size_t n_;
  long state_ = 0;
  std::size_t rounds_ = 0;
  bool awaiting_ = false;
};

}  // namespace fairdiv
