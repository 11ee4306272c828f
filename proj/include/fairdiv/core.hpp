// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "fairdiv/scalar.hpp"

namespace fairdiv {

/// Raised when an input violates a documented invariant.
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Dense row-major matrix. Rows are agents unless stated otherwise.
template <typename T>
class Grid {
 public:
  Grid() = default;
  Grid(std::size_t rows, std::size_t cols, const T& fill = T{})
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool empty() const { return data_.empty(); }

  T& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  const T& operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<T> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const T> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  const std::vector<T>& data() const { return data_; }


  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<T> data_;
};

/// Per-agent value supports of an independent-agents distribution.
///
/// Types are the cartesian product S_1 x ... x S_n, indexed in mixed radix
/// with agent 0 most significant and the last agent least significant:
/// index = ((k_0 * |S_1| + k_1) * |S_2| + k_2) ... where k_i indexes the
/// ascending support S_i.
struct ProductSupport {
  std::vector<std::vector<double>> values;  // ascending per agent
  std::vector<std::vector<double>> probs;

  std::size_t agents() const { return values.size(); }
  std::size_t type_count() const;
  std::vector<std::size_t> digits(std::size_t type_index) const;
  std::size_t index(std::span<const std::size_t> digits) const;
};

/// Finite-support distribution over item types with per-agent values.
class TypeDistribution {
 public:
  /// Validates: probabilities strictly positive and summing to 1 within
  /// 1e-12; values finite and nonnegative. Throws InvalidInput.
  TypeDistribution(std::vector<int> type_ids, std::vector<double> probs, Grid<double> values,
                   std::optional<ProductSupport> product = std::nullopt);

  /// Convenience: type ids 0..m-1. `values` is agent-major (n rows, m cols).
  static TypeDistribution from_rows(std::vector<double> probs, Grid<double> values);

  std::size_t agents() const { return values_.rows(); }
  std::size_t types() const { return probs_.size(); }
  const std::vector<int>& type_ids() const { return type_ids_; }
  const std::vector<double>& probs() const { return probs_; }
  const Grid<double>& values() const { return values_; }
  double value(std::size_t agent, std::size_t type) const { return values_(agent, type); }
  const std::optional<ProductSupport>& product() const { return product_; }

  /// True when every value lies in [0, 1].
  bool unit_valued() const;

  /// True when all (agent, type) values coincide within 1e-12.
  bool is_point_mass() const;

 private:
  std::vector<int> type_ids_;
  std::vector<double> probs_;
  Grid<double> values_;
  std::optional<ProductSupport> product_;
};

/// Divisible-goods instance for the Eisenberg-Gale program.
///
/// Items valued zero by every agent are removed at construction;
/// `kept_types()[k]` is the original column of instance item k.
template <typename T>
class BasicOfflineInstance {
 public:
  BasicOfflineInstance(Grid<T> values, std::vector<T> budgets);

  std::size_t agents() const { return values_.rows(); }
  std::size_t items() const { return values_.cols(); }
  const Grid<T>& values() const { return values_; }
  const T& value(std::size_t i, std::size_t j) const { return values_(i, j); }
  const std::vector<T>& budgets() const { return budgets_; }
  const std::vector<std::size_t>& kept_types() const { return kept_; }
  std::size_t original_items() const { return original_items_; }

  BasicOfflineInstance with_budgets(std::vector<T> budgets) const;

  /// Full-type view of an allocation over the kept items. Dropped columns
  /// are split equally (they are worthless to everyone).
  Grid<T> expand(const Grid<T>& shares) const;
  /// Inverse of expand on the surviving columns.
  Grid<T> restrict(const Grid<T>& full_shares) const;

 private:
  BasicOfflineInstance() = default;

  Grid<T> values_;
  std::vector<T> budgets_;
  std::vector<std::size_t> kept_;
  std::size_t original_items_ = 0;
};

using OfflineInstance = BasicOfflineInstance<double>;
using ExactOfflineInstance = BasicOfflineInstance<Rational>;

/// n x m share matrix.
template <typename T>
struct BasicFractionalAllocation {
  Grid<T> shares;

  std::size_t agents() const { return shares.rows(); }
  std::size_t items() const { return shares.cols(); }

  /// Throws InvalidInput unless entries lie in [-1e-12, 1 + 1e-12] and column
  /// sums are at most 1 + 1e-9 (exact bounds for rationals).
  void validate() const;
  /// Clamps entries into [0, 1].
  void clamp();
};

using FractionalAllocation = BasicFractionalAllocation<double>;

/// An Eisenberg-Gale solution with its prices and budgets.
template <typename T>
struct BasicMarketSolution {
  BasicFractionalAllocation<T> allocation;
  std::vector<T> prices;
  std::vector<T> budgets;
  std::vector<T> mbb;  // r_i = v_i(X_i) / e_i

  const Grid<T>& x() const { return allocation.shares; }
  Grid<T>& x() { return allocation.shares; }
};

using MarketSolution = BasicMarketSolution<double>;
using ExactMarketSolution = BasicMarketSolution<Rational>;

/// Realized values of the arrived items: row t holds (v_1t, ..., v_nt).
using ItemValues = Grid<double>;

/// Integral allocation of arrived items; bundles hold round indices.
struct IntegralAllocation {
  std::vector<std::vector<std::size_t>> bundles;
  ItemValues item_values;

  std::size_t agents() const { return bundles.size(); }
  std::size_t items() const { return item_values.rows(); }
  /// Throws InvalidInput unless bundles partition 0..items()-1.
  void validate() const;
};

struct EnvySnapshot {
  std::size_t t = 0;  // rounds completed
  Grid<double> envy;      // max(v_i(A_j) - v_i(A_i), 0)
  Grid<double> max_item;  // max over items in A_j of v_i(item), 0 if empty
  std::vector<double> utility;
  double peak_envy = 0.0;  // max over rounds <= t of the largest envy
};

/// Per-round record of one online run.
struct OnlineRun {
  std::size_t T = 0;
  std::uint64_t seed = 0;
  std::vector<std::size_t> arrivals;     // type index per round
  std::vector<std::size_t> assignments;  // agent per round
  std::vector<EnvySnapshot> envy_trace;
  double peak_envy = 0.0;  // max over t of ENVY(A^t)
};

// Operations ----------------------------------------------------------------

/// v'_i(type) = v_i(type) * f(type), dropping types worthless to everyone.
template <typename T>
BasicOfflineInstance<T> scale_values(const TypeDistribution& dist, const std::vector<double>& budgets);

OfflineInstance scale_values(const TypeDistribution& dist, const std::vector<double>& budgets);

/// Additive value of `bundle` (round indices) for `agent`.
double bundle_value(std::size_t agent, std::span<const std::size_t> bundle, const ItemValues& values);

/// Linear value sum_k v_ik x_k of a share row.
template <typename T>
T fractional_value(std::size_t agent, std::span<const T> row, const BasicOfflineInstance<T>& instance) {
  T total{0};
  for (std::size_t k = 0; k < row.size(); ++k) total += instance.value(agent, k) * row[k];
  return total;
}

/// Matrix W with W(i, j) = v_i(X_j).
template <typename T>
Grid<T> value_matrix(const Grid<T>& shares, const BasicOfflineInstance<T>& instance) {
  const std::size_t n = instance.agents();
  Grid<T> w(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) w(i, j) = fractional_value<T>(i, shares.row(j), instance);
  return w;
}

/// Lift a double instance or solution to exact rationals.
ExactOfflineInstance to_exact(const OfflineInstance& instance);
ExactMarketSolution to_exact(const MarketSolution& solution);
MarketSolution to_double(const ExactMarketSolution& solution);

}  // namespace fairdiv
