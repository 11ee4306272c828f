// SPDX-License-Identifier: Apache-2.0
#include "fairdiv/market.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <queue>
#include <sstream>

#include "fairdiv/detail/maxflow.hpp"

namespace fairdiv {

double KktReport::max_residual() const {
  return std::max({max_residual_market_clearing, max_residual_mbb_bound, max_residual_mbb_tight});
}

std::string KktReport::describe() const {
  std::ostringstream out;
  out.precision(3);
  out << std::scientific << "clearing=" << max_residual_market_clearing << " mbb_bound=" << max_residual_mbb_bound
      << " mbb_tight=" << max_residual_mbb_tight << " tol=" << tolerance << (pass ? " PASS" : " FAIL");
  return out.str();
}

template <typename T>
std::vector<T> max_bang_per_buck(const BasicOfflineInstance<T>& instance, const std::vector<T>& prices) {
  std::vector<T> best(instance.agents(), T{0});
  for (std::size_t i = 0; i < instance.agents(); ++i)
    for (std::size_t j = 0; j < instance.items(); ++j) {
      T ratio = instance.value(i, j) / prices[j];
      if (ratio > best[i]) best[i] = ratio;
    }
  return best;
}

template <typename T>
void refresh_mbb(BasicMarketSolution<T>& solution, const BasicOfflineInstance<T>& instance) {
  solution.mbb.assign(instance.agents(), T{0});
  for (std::size_t i = 0; i < instance.agents(); ++i)
    solution.mbb[i] = fractional_value<T>(i, solution.x().row(i), instance) / solution.budgets[i];
}

template <typename T>
KktReport check_kkt(const BasicMarketSolution<T>& solution, const BasicOfflineInstance<T>& instance, double tol) {
  const std::size_t n = instance.agents();
  const std::size_t m = instance.items();
  if (solution.x().rows() != n || solution.x().cols() != m || solution.prices.size() != m ||
      solution.budgets.size() != n)
    throw InvalidInput("solution dimensions do not match the instance");
  for (std::size_t j = 0; j < m; ++j)
    if (!(solution.prices[j] > 0)) throw InvalidInput("price of item " + std::to_string(j) + " is not positive");
  for (std::size_t i = 0; i < n; ++i)
    if (!(solution.budgets[i] > 0)) throw InvalidInput("budget of agent " + std::to_string(i) + " is not positive");

  KktReport report;
  report.tolerance = tol;
  for (std::size_t j = 0; j < m; ++j) {
    T col{0};
    for (std::size_t i = 0; i < n; ++i) col += solution.x()(i, j);
    report.max_residual_market_clearing =
        std::max(report.max_residual_market_clearing, std::fabs(1.0 - to_double(col)));
  }
  for (std::size_t i = 0; i < n; ++i) {
    const T r = fractional_value<T>(i, solution.x().row(i), instance) / solution.budgets[i];
    for (std::size_t j = 0; j < m; ++j) {
      const T ratio = instance.value(i, j) / solution.prices[j];
      double bound = 0.0;
      double tight = 0.0;
      if (r > 0) {
        const T excess = (ratio - r) / r;
        bound = std::max(0.0, to_double(excess));
        tight = std::fabs(to_double(excess));
      } else if (ratio > 0) {
        bound = std::numeric_limits<double>::infinity();
        tight = bound;
      }
      report.max_residual_mbb_bound = std::max(report.max_residual_mbb_bound, bound);
      if (to_double(solution.x()(i, j)) > tol) report.max_residual_mbb_tight = std::max(report.max_residual_mbb_tight, tight);
    }
  }
  report.pass = report.max_residual() <= tol;
  return report;
}

template <typename T>
std::vector<T> mbb_ratios(const BasicMarketSolution<T>& solution, const BasicOfflineInstance<T>& instance) {
  std::vector<T> r(instance.agents());
  for (std::size_t i = 0; i < instance.agents(); ++i) {
    if (!(solution.budgets[i] > 0)) throw InvalidInput("agent " + std::to_string(i) + " has a nonpositive budget");
    r[i] = fractional_value<T>(i, solution.x().row(i), instance) / solution.budgets[i];
  }
  bool priced = std::all_of(solution.prices.begin(), solution.prices.end(), [](const T& p) { return p > 0; });
  if (priced && check_kkt(solution, instance, 1e-6).pass) {
    const auto best = max_bang_per_buck(instance, solution.prices);
    for (std::size_t i = 0; i < r.size(); ++i) {
      const double a = to_double(r[i]);
      const double b = to_double(best[i]);
      if (std::fabs(a - b) > 1e-6 * std::max(a, b)) throw std::logic_error("mbb ratio disagrees with max bang-per-buck");
    }
  }
  return r;
}

template <typename T>
double eg_objective(const Grid<T>& shares, const BasicOfflineInstance<T>& instance) {
  double total = 0.0;
  for (std::size_t i = 0; i < instance.agents(); ++i) {
    const double u = to_double(fractional_value<T>(i, shares.row(i), instance));
    total += to_double(instance.budgets()[i]) * std::log(u);
  }
  return total;
}

namespace {

struct PrdState {
  Grid<double> values;
  std::vector<double> budgets;
  Grid<double> bids;
  std::vector<double> prices;

  std::size_t n() const { return values.rows(); }
  std::size_t m() const { return values.cols(); }

  void init() {
    bids = Grid<double>(n(), m(), 0.0);
    for (std::size_t i = 0; i < n(); ++i) {
      double total = 0.0;
      for (std::size_t j = 0; j < m(); ++j) total += values(i, j);
      for (std::size_t j = 0; j < m(); ++j)
        if (values(i, j) > 0) bids(i, j) = budgets[i] * values(i, j) / total;
    }
    update_prices();
  }

  void update_prices() {
    prices.assign(m(), 0.0);
    for (std::size_t i = 0; i < n(); ++i)
      for (std::size_t j = 0; j < m(); ++j) prices[j] += bids(i, j);
  }

  void step() {
    for (std::size_t i = 0; i < n(); ++i) {
      double utility = 0.0;
      for (std::size_t j = 0; j < m(); ++j)
        if (bids(i, j) > 0) utility += values(i, j) * bids(i, j) / prices[j];
      for (std::size_t j = 0; j < m(); ++j)
        if (bids(i, j) > 0) bids(i, j) = budgets[i] * values(i, j) * (bids(i, j) / prices[j]) / utility;
    }
    update_prices();
  }

  Grid<double> shares() const {
    Grid<double> x(n(), m(), 0.0);
    for (std::size_t i = 0; i < n(); ++i)
      for (std::size_t j = 0; j < m(); ++j)
        if (prices[j] > 0) x(i, j) = bids(i, j) / prices[j];
    return x;
  }
};

/// Candidate equilibrium support: agent i may buy item j.
using Support = std::vector<std::vector<bool>>;

Support near_mbb_support(const PrdState& prd, double eta) {
  Support s(prd.n(), std::vector<bool>(prd.m(), false));
  for (std::size_t i = 0; i < prd.n(); ++i) {
    double best = 0.0;
    for (std::size_t j = 0; j < prd.m(); ++j) best = std::max(best, prd.values(i, j) / prd.prices[j]);
    for (std::size_t j = 0; j < prd.m(); ++j) {
      const double ratio = prd.values(i, j) / prd.prices[j];
      s[i][j] = prd.values(i, j) > 0 && ratio >= best * (1.0 - eta);
    }
  }
  return s;
}

/// Recovers exact prices and a market-clearing allocation on a fixed
/// support: prices follow p_j = v_ij / r_i along support edges, each
/// connected component's prices sum to its budgets, and spending is routed
/// by max-flow. Returns nullopt if the support is inconsistent.
template <typename T>
std::optional<BasicMarketSolution<T>> solve_on_support(const BasicOfflineInstance<T>& instance,
                                                       const Support& support) {
  const std::size_t n = instance.agents();
  const std::size_t m = instance.items();
  const Tolerance<T> tol{1e-10, 1e-300};

  // Nodes 0..n-1 agents, n..n+m-1 items.
  std::vector<std::size_t> comp(n + m, std::numeric_limits<std::size_t>::max());
  std::vector<T> rate(n, T{0});
  std::vector<T> price(m, T{0});
  std::size_t comps = 0;
  for (std::size_t root = 0; root < n; ++root) {
    if (comp[root] != std::numeric_limits<std::size_t>::max()) continue;
    comp[root] = comps;
    rate[root] = T{1};
    std::queue<std::size_t> q;
    q.push(root);
    while (!q.empty()) {
      const std::size_t u = q.front();
      q.pop();
      if (u < n) {
        for (std::size_t j = 0; j < m; ++j) {
          if (!support[u][j]) continue;
          const T p = instance.value(u, j) / rate[u];
          if (comp[n + j] == std::numeric_limits<std::size_t>::max()) {
            comp[n + j] = comps;
            price[j] = p;
            q.push(n + j);
          } else if (!tol.eq(price[j], p)) {
            return std::nullopt;
          }
        }
      } else {
        const std::size_t j = u - n;
        for (std::size_t i = 0; i < n; ++i) {
          if (!support[i][j]) continue;
          const T r = instance.value(i, j) / price[j];
          if (comp[i] == std::numeric_limits<std::size_t>::max()) {
            comp[i] = comps;
            rate[i] = r;
            q.push(i);
          } else if (!tol.eq(rate[i], r)) {
            return std::nullopt;
          }
        }
      }
    }
    ++comps;
  }
  for (std::size_t j = 0; j < m; ++j)
    if (comp[n + j] == std::numeric_limits<std::size_t>::max()) return std::nullopt;

  std::vector<T> price_sum(comps, T{0});
  std::vector<T> budget_sum(comps, T{0});
  for (std::size_t j = 0; j < m; ++j) price_sum[comp[n + j]] += price[j];
  for (std::size_t i = 0; i < n; ++i) budget_sum[comp[i]] += instance.budgets()[i];
  for (std::size_t c = 0; c < comps; ++c)
    if (!(price_sum[c] > 0)) return std::nullopt;
  for (std::size_t j = 0; j < m; ++j) price[j] = price[j] * budget_sum[comp[n + j]] / price_sum[comp[n + j]];
  for (std::size_t i = 0; i < n; ++i) rate[i] = rate[i] * price_sum[comp[i]] / budget_sum[comp[i]];

  // No agent may find a strictly better deal anywhere.
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j)
      if (tol.gt(instance.value(i, j) / price[j], rate[i], rate[i])) return std::nullopt;

  T total_budget{0};
  for (const T& e : instance.budgets()) total_budget += e;
  const T eps = ScalarTraits<T>::exact ? T{0} : T(1e-15 * to_double(total_budget));
  detail::MaxFlow<T> flow(n + m + 2, eps);
  const std::size_t source = n + m;
  const std::size_t sink = n + m + 1;
  for (std::size_t i = 0; i < n; ++i) flow.add_edge(source, i, instance.budgets()[i]);
  for (std::size_t j = 0; j < m; ++j) flow.add_edge(n + j, sink, price[j]);
  std::vector<std::vector<std::pair<std::size_t, std::size_t>>> handle(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j)
      handle[i].push_back(support[i][j] ? flow.add_edge(i, n + j, total_budget)
                                        : std::pair<std::size_t, std::size_t>{0, 0});
  const T routed = flow.run(source, sink);
  if (!tol.eq(routed, total_budget, total_budget)) return std::nullopt;

  BasicMarketSolution<T> sol;
  sol.prices = price;
  sol.budgets = instance.budgets();
  sol.allocation.shares = Grid<T>(n, m, T{0});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j)
      if (support[i][j]) {
        T x = flow.flow_on(handle[i][j]) / price[j];
        if constexpr (!ScalarTraits<T>::exact) {
          if (x < 1e-14) x = 0.0;
          if (x > 1.0) x = 1.0;
        }
        sol.x()(i, j) = x;
      }
  refresh_mbb(sol, instance);
  return sol;
}

}  // namespace

template <typename T>
BasicMarketSolution<T> solve_eg(const BasicOfflineInstance<T>& instance, const SolverOptions& options) {
  if (!(options.tol > 0.0) || options.tol > 1e-3) throw InvalidInput("solver tolerance must lie in (0, 1e-3]");
  if (options.max_iters == 0) throw InvalidInput("max_iters must be positive");

  PrdState prd;
  prd.values = Grid<double>(instance.agents(), instance.items());
  for (std::size_t i = 0; i < instance.agents(); ++i)
    for (std::size_t j = 0; j < instance.items(); ++j) prd.values(i, j) = to_double(instance.value(i, j));
  for (const T& e : instance.budgets()) prd.budgets.push_back(to_double(e));
  prd.init();

  static constexpr double kEtas[] = {1e-1, 3e-2, 1e-2, 3e-3, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7, 1e-8, 1e-9};
  std::size_t next_polish = options.first_polish;
  std::size_t iter = 0;
  for (;;) {
    if (iter >= next_polish || iter >= options.max_iters) {
      Support last;
      for (double eta : kEtas) {
        Support s = near_mbb_support(prd, eta);
        if (s == last) continue;
        last = s;
        auto candidate = solve_on_support<T>(instance, s);
        if (!candidate) continue;
        KktReport report = check_kkt(*candidate, instance, options.tol);
        if (report.pass) return *candidate;
      }
      next_polish *= 2;
    }
    if (iter >= options.max_iters) break;
    prd.step();
    ++iter;
  }

  MarketSolution best;
  best.allocation.shares = prd.shares();
  best.prices = prd.prices;
  best.budgets = prd.budgets;
  OfflineInstance as_double(prd.values, prd.budgets);
  refresh_mbb(best, as_double);
  KktReport report = check_kkt(best, as_double, options.tol);
  throw SolverError("Eisenberg-Gale solver did not converge within " + std::to_string(options.max_iters) +
                        " iterations (" + report.describe() + ")",
                    std::move(best), report);
}

#define FAIRDIV_INSTANTIATE_MARKET(T)                                                                    \
  template BasicMarketSolution<T> solve_eg<T>(const BasicOfflineInstance<T>&, const SolverOptions&);      \
  template KktReport check_kkt<T>(const BasicMarketSolution<T>&, const BasicOfflineInstance<T>&, double); \
  template std::vector<T> mbb_ratios<T>(const BasicMarketSolution<T>&, const BasicOfflineInstance<T>&);   \
  template std::vector<T> max_bang_per_buck<T>(const BasicOfflineInstance<T>&, const std::vector<T>&);    \
  template void refresh_mbb<T>(BasicMarketSolution<T>&, const BasicOfflineInstance<T>&);                  \
  template double eg_objective<T>(const Grid<T>&, const BasicOfflineInstance<T>&);

FAIRDIV_INSTANTIATE_MARKET(double)
FAIRDIV_INSTANTIATE_MARKET(Rational)

#undef FAIRDIV_INSTANTIATE_MARKET

}  // namespace fairdiv
