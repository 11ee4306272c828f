// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "fairdiv/core.hpp"

namespace fairdiv {

/// Residuals of the three equilibrium conditions of the Eisenberg-Gale
/// program. Residuals are stored as doubles in both scalar modes.
struct KktReport {
  double max_residual_market_clearing = 0.0;  // |1 - sum_i x_ij| over priced items
  double max_residual_mbb_bound = 0.0;        // max(0, v_ij/p_j - r_i) / r_i
  double max_residual_mbb_tight = 0.0;        // |v_ij/p_j - r_i| / r_i where x_ij > tol
  double tolerance = 0.0;
  bool pass = false;

  double max_residual() const;
  std::string describe() const;
};

/// Thrown when the solver fails to certify a solution within its budget.
class SolverError : public std::runtime_error {
 public:
  SolverError(const std::string& what, MarketSolution best, KktReport report)
      : std::runtime_error(what), best_(std::move(best)), report_(report) {}
  const MarketSolution& best_iterate() const { return best_; }
  const KktReport& report() const { return report_; }

 private:
  MarketSolution best_;
  KktReport report_;
};

struct SolverOptions {
  double tol = 1e-8;
  std::size_t max_iters = 2'000'000;
  /// First proportional-response iteration at which support recovery is
  /// attempted; the interval doubles after each failed attempt.
  std::size_t first_polish = 32;
};

/// Equilibrium of the linear Fisher market (Eisenberg-Gale optimum) for the
/// instance's budgets. Proportional-response dynamics locate the equilibrium
/// support; prices and shares are then recovered from the support exactly
/// (in the scalar type T) and certified with check_kkt.
template <typename T>
BasicMarketSolution<T> solve_eg(const BasicOfflineInstance<T>& instance, const SolverOptions& options = {});

inline MarketSolution solve_eg(const OfflineInstance& instance, double tol, std::size_t max_iters) {
  SolverOptions options;
  options.tol = tol;
  options.max_iters = max_iters;
  return solve_eg<double>(instance, options);
}

/// Evaluates the equilibrium conditions. Throws InvalidInput on a
/// nonpositive price or budget, or on inconsistent dimensions.
template <typename T>
KktReport check_kkt(const BasicMarketSolution<T>& solution, const BasicOfflineInstance<T>& instance, double tol);

/// r_i = v_i(X_i) / e_i. When the solution passes check_kkt at 1e-6 this
/// also verifies r_i = max_j v_ij / p_j and throws std::logic_error if not.
template <typename T>
std::vector<T> mbb_ratios(const BasicMarketSolution<T>& solution, const BasicOfflineInstance<T>& instance);

/// max_j v_ij / p_j for every agent.
template <typename T>
std::vector<T> max_bang_per_buck(const BasicOfflineInstance<T>& instance, const std::vector<T>& prices);

/// Recomputes mbb from the current shares and budgets.
template <typename T>
void refresh_mbb(BasicMarketSolution<T>& solution, const BasicOfflineInstance<T>& instance);

/// Eisenberg-Gale objective sum_i e_i log v_i(X_i) (in double).
template <typename T>
double eg_objective(const Grid<T>& shares, const BasicOfflineInstance<T>& instance);

}  // namespace fairdiv
