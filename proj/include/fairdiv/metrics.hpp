// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "fairdiv/cisef.hpp"
#include "fairdiv/core.hpp"

namespace fairdiv {

struct EnvyReport {
  Grid<double> matrix;  // max(v_i(A_j) - v_i(A_i), 0)
  Grid<char> ef1_pair;  // envy(i, j) <= max_{t in A_j} v_it
  double max_envy = 0.0;
  bool ef = true;
  bool ef1 = true;
};

/// Comparisons allow 1e-9 slack relative to the largest bundle value.
EnvyReport envy_report(const IntegralAllocation& allocation);
EnvyReport envy_report(const EnvySnapshot& snapshot);

enum class PoVerdict { efficient, dominated, unknown };
const char* verdict_name(PoVerdict verdict);

struct PoResult {
  PoVerdict verdict = PoVerdict::unknown;
  std::vector<std::size_t> dominating;  // owner per item when dominated
};

inline constexpr std::size_t kBruteLeafCap = 1'000'000;

/// Exhaustive search for a Pareto-dominating assignment. Throws InvalidInput
/// when n^T exceeds `leaf_cap` (use the certificate mode instead).
PoResult pareto_brute(const IntegralAllocation& allocation, std::size_t leaf_cap = kBruteLeafCap);

/// Efficient when every item went to an agent with a positive share of its
/// type in the Pareto-efficient plan `xstar` (n x types); unknown otherwise.
PoResult pareto_certificate(const IntegralAllocation& allocation, std::span<const std::size_t> arrivals,
                            const Grid<double>& xstar);

/// True iff some assignment of the items gives every agent strictly more
/// than u_i / alpha.
bool alpha_pareto_improvable(std::span<const double> utilities, const ItemValues& items, double alpha,
                             std::size_t leaf_cap = kBruteLeafCap);

struct CisefAudit {
  bool envy_free = true;
  bool cliques = true;         // parts are cliques, no edges between parts
  bool identical_rows = true;  // within 1e-9
  bool scaled_values = true;   // v_jl r_k = v_kl r_j on allocated items
  bool partition_valid = true;
  std::vector<std::string> violations;

  bool pass() const { return envy_free && cliques && identical_rows && scaled_values && partition_valid; }
};

/// Audits the four clique-identical strongly envy-free conditions; the
/// graph uses `eps` as its indifference tolerance.
template <typename T>
CisefAudit is_cisef(const BasicMarketSolution<T>& solution, const BasicOfflineInstance<T>& instance,
                    const CliquePartition& partition, double eps = 1e-6);

struct CheckpointSummary {
  std::size_t t = 0;
  std::size_t runs = 0;
  double mean_max_envy = 0.0;
  double median_max_envy = 0.0;
  double q90_max_envy = 0.0;
  double worst_max_envy = 0.0;
  double p_envy_free = 0.0;
  double p_ef1 = 0.0;
  double ratio_sqrt = 0.0;  // mean max envy / sqrt(t log t); 0 when t < 2
  double ratio_linear = 0.0;
};

/// Statistics of one checkpoint from per-run max envy and EF/EF1 counts.
CheckpointSummary summarize_checkpoint(std::size_t t, std::vector<double> max_envy, std::size_t envy_free,
                                       std::size_t ef1);

/// Statistics per checkpoint common to every run. Throws on empty input.
std::vector<CheckpointSummary> envy_trace_summary(const std::vector<OnlineRun>& runs);

void write_envy_csv(std::ostream& out, const EnvyReport& report);
void write_summary_csv(std::ostream& out, const std::vector<CheckpointSummary>& rows);
std::string summary_json(const std::vector<CheckpointSummary>& rows);

}  // namespace fairdiv
