// SPDX-License-Identifier: Apache-2.0
#include "fairdiv/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>

#include "fairdiv/market.hpp"
#include "json.hpp"

namespace fairdiv {
namespace {

EnvyReport from_running(const Grid<double>& running, const Grid<double>& max_item) {
  const std::size_t n = running.rows();
  EnvyReport r{Grid<double>(n, n), Grid<char>(n, n, 1), 0.0, true, true};
  double scale = 1.0;
  for (double v : running.data()) scale = std::max(scale, std::fabs(v));
  const double slack = 1e-9 * scale;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const double e = std::max(running(i, j) - running(i, i), 0.0);
      r.matrix(i, j) = e;
      r.max_envy = std::max(r.max_envy, e);
      if (e > slack) r.ef = false;
      if (e > max_item(i, j) + slack) {
        r.ef1_pair(i, j) = 0;
        r.ef1 = false;
      }
    }
  return r;
}

std::vector<double> suffix_totals(const ItemValues& items, std::size_t agent) {
  std::vector<double> rem(items.rows() + 1, 0.0);
  for (std::size_t t = items.rows(); t-- > 0;) rem[t] = rem[t + 1] + items(t, agent);
  return rem;
}

void check_cap(std::size_t n, std::size_t T, std::size_t cap) {
  double leaves = 1.0;
  for (std::size_t t = 0; t < T; ++t) {
    leaves *= static_cast<double>(n);
    if (leaves > static_cast<double>(cap))
      throw InvalidInput("brute-force search over " + std::to_string(n) + "^" + std::to_string(T) +
                         " assignments exceeds the cap; use certificate mode");
  }
}

// Depth-first search over assignments; `accept` sees complete utility
// vectors, `viable` prunes partial ones given the remaining totals.
template <typename Viable, typename Accept>
bool search(const ItemValues& items, std::vector<double>& partial, std::vector<std::size_t>& owner, std::size_t t,
            const std::vector<std::vector<double>>& rem, Viable viable, Accept accept) {
  const std::size_t n = items.cols();
  for (std::size_t i = 0; i < n; ++i)
    if (!viable(i, partial[i] + rem[i][t])) return false;
  if (t == items.rows()) return accept(partial);
  for (std::size_t a = 0; a < n; ++a) {
    partial[a] += items(t, a);
    owner[t] = a;
    const bool found = search(items, partial, owner, t + 1, rem, viable, accept);
    partial[a] -= items(t, a);
    if (found) return true;
  }
  return false;
}

}  // namespace

EnvyReport envy_report(const IntegralAllocation& allocation) {
  allocation.validate();
  const std::size_t n = allocation.agents();
  Grid<double> running(n, n), max_item(n, n);
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t t : allocation.bundles[j])
      for (std::size_t i = 0; i < n; ++i) {
        running(i, j) += allocation.item_values(t, i);
        max_item(i, j) = std::max(max_item(i, j), allocation.item_values(t, i));
      }
  return from_running(running, max_item);
}

EnvyReport envy_report(const EnvySnapshot& s) {
  const std::size_t n = s.envy.rows();
  Grid<double> running(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) running(i, j) = s.utility[i] + (i == j ? 0.0 : s.envy(i, j));
  return from_running(running, s.max_item);
}

const char* verdict_name(PoVerdict verdict) {
  switch (verdict) {
    case PoVerdict::efficient: return "efficient";
    case PoVerdict::dominated: return "dominated";
    case PoVerdict::unknown: return "unknown";
  }
  return "?";
}

PoResult pareto_brute(const IntegralAllocation& allocation, std::size_t leaf_cap) {
  allocation.validate();
  const ItemValues& items = allocation.item_values;
  const std::size_t n = allocation.agents();
  check_cap(n, items.rows(), leaf_cap);
  std::vector<double> u(n);
  double scale = 1.0;
  for (std::size_t i = 0; i < n; ++i) {
    u[i] = bundle_value(i, allocation.bundles[i], items);
    scale = std::max(scale, u[i]);
  }
  const double tol = 1e-9 * scale;
  std::vector<std::vector<double>> rem(n);
  for (std::size_t i = 0; i < n; ++i) rem[i] = suffix_totals(items, i);
  std::vector<double> partial(n, 0.0);
  std::vector<std::size_t> owner(items.rows(), 0);
  const bool found = search(
      items, partial, owner, 0, rem, [&](std::size_t i, double reach) { return reach >= u[i] - tol; },
      [&](const std::vector<double>& v) {
        bool strict = false;
        for (std::size_t i = 0; i < n; ++i) strict = strict || v[i] > u[i] + tol;
        return strict;
      });
  PoResult r;
  r.verdict = found ? PoVerdict::dominated : PoVerdict::efficient;
  if (found) r.dominating = owner;
  return r;
}

PoResult pareto_certificate(const IntegralAllocation& allocation, std::span<const std::size_t> arrivals,
                            const Grid<double>& xstar) {
  allocation.validate();
  if (arrivals.size() != allocation.items()) throw InvalidInput("arrivals do not match the allocation");
  if (xstar.rows() != allocation.agents()) throw InvalidInput("plan does not match the allocation");
  PoResult r;
  r.verdict = PoVerdict::efficient;
  for (std::size_t i = 0; i < allocation.agents(); ++i)
    for (std::size_t t : allocation.bundles[i]) {
      if (arrivals[t] >= xstar.cols()) throw InvalidInput("arrival type outside the plan");
      if (!(xstar(i, arrivals[t]) > 0.0)) r.verdict = PoVerdict::unknown;
    }
  return r;
}

bool alpha_pareto_improvable(std::span<const double> utilities, const ItemValues& items, double alpha,
                             std::size_t leaf_cap) {
  const std::size_t n = items.cols();
  if (utilities.size() != n) throw InvalidInput("utility vector does not match the agents");
  if (!(alpha >= 1.0)) throw InvalidInput("alpha must be at least 1");
  check_cap(n, items.rows(), leaf_cap);
  double scale = 1.0;
  for (double u : utilities) scale = std::max(scale, u);
  const double tol = 1e-12 * scale;
  std::vector<double> target(n);
  for (std::size_t i = 0; i < n; ++i) target[i] = utilities[i] / alpha + tol;
  std::vector<std::vector<double>> rem(n);
  for (std::size_t i = 0; i < n; ++i) rem[i] = suffix_totals(items, i);
  std::vector<double> partial(n, 0.0);
  std::vector<std::size_t> owner(items.rows(), 0);
  return search(
      items, partial, owner, 0, rem, [&](std::size_t i, double reach) { return reach > target[i]; },
      [](const std::vector<double>&) { return true; });
}

template <typename T>
CisefAudit is_cisef(const BasicMarketSolution<T>& solution, const BasicOfflineInstance<T>& instance,
                    const CliquePartition& partition, double eps) {
  CisefAudit a;
  const std::size_t n = instance.agents();
  const std::size_t m = instance.items();
  if (solution.x().rows() != n || solution.x().cols() != m || solution.budgets.size() != n)
    throw InvalidInput("solution dimensions do not match the instance");
  auto fail = [&a](bool& flag, std::string msg) {
    flag = false;
    a.violations.push_back(std::move(msg));
  };

  std::vector<int> seen(n, 0);
  for (const AgentSet& c : partition.cliques)
    for (std::size_t i : c) {
      if (i >= n) {
        fail(a.partition_valid, "partition names agent " + std::to_string(i));
        continue;
      }
      ++seen[i];
    }
  for (std::size_t i = 0; i < n; ++i)
    if (seen[i] != 1) fail(a.partition_valid, "agent " + std::to_string(i) + " is not covered exactly once");
  if (!a.partition_valid) return a;

  Grid<double> w(n, n);
  const Grid<T> wt = value_matrix(solution.x(), instance);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) w(i, j) = to_double(wt(i, j));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (w(i, j) - w(i, i) > eps * std::max(w(i, i), 1e-12))
        fail(a.envy_free, "agent " + std::to_string(i) + " envies agent " + std::to_string(j));

  SurgeryOptions graph_options;
  graph_options.eps_ind = eps;
  const IndifferenceGraph g = build_indifference_graph(solution, instance, graph_options);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const bool same = partition.part_of(i) == partition.part_of(j);
      if (same && !g.has(i, j))
        fail(a.cliques, "agents " + std::to_string(i) + " and " + std::to_string(j) + " share a clique but " +
                            std::to_string(i) + " is not indifferent");
      if (!same && g.has(i, j))
        fail(a.cliques, "indifference edge (" + std::to_string(i) + ", " + std::to_string(j) + ") crosses cliques");
    }

  std::vector<double> r(n);
  for (std::size_t i = 0; i < n; ++i) r[i] = w(i, i) / to_double(solution.budgets[i]);
  for (const AgentSet& c : partition.cliques)
    for (std::size_t j : c)
      for (std::size_t k : c) {
        if (j >= k) continue;
        for (std::size_t l = 0; l < m; ++l) {
          const double xj = to_double(solution.x()(j, l));
          const double xk = to_double(solution.x()(k, l));
          if (std::fabs(xj - xk) > 1e-9)
            fail(a.identical_rows, "rows of agents " + std::to_string(j) + " and " + std::to_string(k) + " differ on item " + std::to_string(l));
          if (xj <= 1e-9) continue;
          const double lhs = to_double(instance.value(j, l)) * r[k];
          const double rhs = to_double(instance.value(k, l)) * r[j];
          if (std::fabs(lhs - rhs) > eps * std::max({std::fabs(lhs), std::fabs(rhs), 1e-12}))
            fail(a.scaled_values, "agents " + std::to_string(j) + " and " + std::to_string(k) +
                                      " value item " + std::to_string(l) + " differently after scaling");
        }
      }
  return a;
}

template CisefAudit is_cisef<double>(const MarketSolution&, const OfflineInstance&, const CliquePartition&, double);
template CisefAudit is_cisef<Rational>(const ExactMarketSolution&, const ExactOfflineInstance&, const CliquePartition&,
                                       double);

CheckpointSummary summarize_checkpoint(std::size_t t, std::vector<double> max_envy, std::size_t envy_free,
                                       std::size_t ef1) {
  if (max_envy.empty()) throw InvalidInput("a checkpoint summary needs at least one run");
  CheckpointSummary s;
  s.t = t;
  std::sort(max_envy.begin(), max_envy.end());
  const double count = static_cast<double>(max_envy.size());
  s.runs = max_envy.size();
  for (double e : max_envy) s.mean_max_envy += e / count;
  auto rank = [&](double q) {
    const auto k = static_cast<std::size_t>(std::ceil(q * count));
    return max_envy[std::min(max_envy.size(), std::max<std::size_t>(k, 1)) - 1];
  };
  s.median_max_envy = rank(0.5);
  s.q90_max_envy = rank(0.9);
  s.worst_max_envy = max_envy.back();
  s.p_envy_free = static_cast<double>(envy_free) / count;
  s.p_ef1 = static_cast<double>(ef1) / count;
  const double td = static_cast<double>(t);
  s.ratio_sqrt = t >= 2 ? s.mean_max_envy / std::sqrt(td * std::log(td)) : 0.0;
  s.ratio_linear = t >= 1 ? s.mean_max_envy / td : 0.0;
  return s;
}

std::vector<CheckpointSummary> envy_trace_summary(const std::vector<OnlineRun>& runs) {
  if (runs.empty()) throw InvalidInput("envy_trace_summary needs at least one run");
  const auto& first = runs.front().envy_trace;
  std::vector<CheckpointSummary> out;
  for (std::size_t c = 0; c < first.size(); ++c) {
    std::vector<double> envy;
    std::size_t ef = 0, ef1 = 0;
    for (const OnlineRun& run : runs) {
      if (run.envy_trace.size() != first.size() || run.envy_trace[c].t != first[c].t)
        throw InvalidInput("runs do not share checkpoints");
      const EnvyReport rep = envy_report(run.envy_trace[c]);
      envy.push_back(rep.max_envy);
      ef += rep.ef;
      ef1 += rep.ef1;
    }
    out.push_back(summarize_checkpoint(first[c].t, std::move(envy), ef, ef1));
  }
  return out;
}

void write_envy_csv(std::ostream& out, const EnvyReport& report) {
  out << "i,j,envy,ef1\n";
  out << std::setprecision(17);
  for (std::size_t i = 0; i < report.matrix.rows(); ++i)
    for (std::size_t j = 0; j < report.matrix.cols(); ++j)
      out << i << ',' << j << ',' << report.matrix(i, j) << ',' << (report.ef1_pair(i, j) ? 1 : 0) << '\n';
}

void write_summary_csv(std::ostream& out, const std::vector<CheckpointSummary>& rows) {
  out << "t,runs,mean_max_envy,median_max_envy,q90_max_envy,worst_max_envy,p_envy_free,p_ef1,ratio_sqrt_tlogt,ratio_t\n";
  out << std::setprecision(10);
  for (const auto& s : rows)
    out << s.t << ',' << s.runs << ',' << s.mean_max_envy << ',' << s.median_max_envy << ',' << s.q90_max_envy << ','
        << s.worst_max_envy << ',' << s.p_envy_free << ',' << s.p_ef1 << ',' << s.ratio_sqrt << ',' << s.ratio_linear
        << '\n';
}

std::string summary_json(const std::vector<CheckpointSummary>& rows) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& s : rows)
    out.push_back({{"t", s.t},
                   {"runs", s.runs},
                   {"mean_max_envy", s.mean_max_envy},
                   {"median_max_envy", s.median_max_envy},
                   {"q90_max_envy", s.q90_max_envy},
                   {"worst_max_envy", s.worst_max_envy},
                   {"p_envy_free", s.p_envy_free},
                   {"p_ef1", s.p_ef1},
                   {"ratio_sqrt_tlogt", s.ratio_sqrt},
                   {"ratio_t", s.ratio_linear}});
  return out.dump();
}

}  // namespace fairdiv
