// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "fairdiv/cisef.hpp"
#include "fairdiv/json_io.hpp"
#include "fairdiv/market.hpp"
#include "fairdiv/metrics.hpp"
#include "fairdiv/online.hpp"

namespace fairdiv {

enum class AdversaryKind { identical_iid, independent_iid, correlated_iid, nonadaptive_lb, adaptive_sm };

AdversaryKind parse_adversary_kind(const std::string& name);
const char* adversary_kind_name(AdversaryKind kind);

/// The "adversary" stanza of an experiment config:
///   {"kind": "identical_iid", "n": 2, "marginal": {"values": [0, 1], "probs": [0.5, 0.5]}}
///   {"kind": "independent_iid", "marginals": [{"values": ..., "probs": ...}, ...]}
///   {"kind": "correlated_iid", "n": 3, "types": [...]}   (or "file": "inst.json")
///   {"kind": "nonadaptive_lb", "n": 2, "epsilon": 0.1, "segments": 2}
///   {"kind": "adaptive_sm", "r": 0.5, "n": 2}
struct AdversaryConfig {
  AdversaryKind kind = AdversaryKind::correlated_iid;
  std::optional<TypeDistribution> distribution;  // distribution-based kinds
  std::vector<double> budgets;                   // from an instance, if given
  std::size_t n = 2;
  double epsilon = 0.1;
  std::size_t segments = 0;  // nonadaptive_lb prefix length in segments
  double r = 0.5;

  bool distribution_based() const { return distribution.has_value(); }
};

struct OutputPaths {
  std::string summary = "summary.csv";
  std::string trace = "trace.jsonl";
  std::string solution = "solution.json";
};

struct ExperimentConfig {
  AdversaryConfig adversary;
  Policy allocator = Policy::uniform;
  std::size_t T = 0;
  std::size_t trials = 1;
  std::uint64_t seed = 0;
  std::vector<std::size_t> checkpoints;  // empty: powers of two and T
  std::vector<double> budgets;           // empty: all 1
  bool strong_ef = false;
  StepRule step_rule = StepRule::max_min_gap;
  OutputPaths outputs;
};

/// Malformed or unreadable configuration (CLI exit code 1).
class ConfigError : public InvalidInput {
 public:
  using InvalidInput::InvalidInput;
};

/// Relative "file" entries are resolved against `base_dir`.
ExperimentConfig parse_config(const Json& doc, const std::string& base_dir = "");
ExperimentConfig load_config(const std::string& path);

/// Throws IncompatiblePolicy when the allocator cannot face the adversary.
void check_compatible(const ExperimentConfig& config);

struct Precomputed {
  OfflineInstance instance;
  MarketSolution solution;
  CliquePartition partition;
  IndifferenceGraph graph;
  std::optional<ExactMarketSolution> exact;
  KktReport kkt;
  std::vector<TraceEvent> trace;

  Plan plan() const;
};

/// Equilibrium, CISEF refinement and, with strong_ef on an independent
/// distribution, the strong-EF swaps. Rational mode runs the whole pipeline
/// in exact arithmetic. Throws SolverError on non-convergence.
Precomputed precompute(const ExperimentConfig& config, bool rational = false, bool keep_trace = false);

struct TrialResult {
  std::size_t trial = 0;
  OnlineRun run;
  PoResult po;  // for the allocation at T
};

struct ExperimentResult {
  std::size_t agents = 0;
  std::size_t T = 0;
  std::vector<TrialResult> trials;  // ordered by trial index
};

/// Runs every trial; trial k draws from Philox(seed, stream k), so its
/// outcome does not depend on the other trials or on `jobs`.
ExperimentResult run_experiment(const ExperimentConfig& config, const Plan* plan = nullptr, std::size_t jobs = 1);

/// Columns: trial, checkpoint_t, max_envy, ef, ef1, u_0..u_{n-1},
/// po_verdict (at t = T, "na" before), peak_envy.
void write_trial_summary(std::ostream& out, const ExperimentResult& result);

/// One JSON line per trial and checkpoint with the envy matrix and
/// utilities; with `per_round`, also one line per round (type, agent).
void write_run_trace(std::ostream& out, const ExperimentResult& result, bool per_round);

/// Aggregates the contents of one or more summary CSVs written by
/// write_trial_summary into per-checkpoint statistics.
std::vector<CheckpointSummary> aggregate_summary_csv(const std::vector<std::string>& csv_texts);

}  // namespace fairdiv
