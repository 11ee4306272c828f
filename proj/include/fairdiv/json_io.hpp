// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <string>
#include <vector>

#include "fairdiv/cisef.hpp"
#include "fairdiv/core.hpp"
#include "json.hpp"

namespace fairdiv {

using Json = nlohmann::json;

/// Distribution file:
///   {"n": 3, "types": [{"prob": 0.5, "values": [1, 0.2, 0.4], "id": 7}, ...],
///    "budgets": [1, 1, 1]}
/// "values" lists one value per agent for that type; "id" defaults to the
/// position and "budgets" to all 1.
struct InstanceFile {
  TypeDistribution distribution;
  std::vector<double> budgets;
};

InstanceFile parse_instance(const Json& doc);
Json instance_to_json(const TypeDistribution& dist, const std::vector<double>& budgets);

/// Reads a whole JSON file. Throws InvalidInput when unreadable or malformed.
Json read_json_file(const std::string& path);

/// Solution file companion of the instance format:
///   {"x": [[...]], "p": [...], "e": [...], "kept": [...], "types": m,
///    "partition": [[0], [1, 2]], "exact": {"x": [["1/3", ...]], ...}}
/// x and p cover the kept item types only; "exact" is present in rational
/// mode and holds the same numbers as strings.
Json solution_to_json(const MarketSolution& solution, const OfflineInstance& instance,
                      const CliquePartition& partition, const ExactMarketSolution* exact = nullptr);

struct SolutionFile {
  MarketSolution solution;
  CliquePartition partition;
  std::optional<ExactMarketSolution> exact;
};

/// Parses a solution written by solution_to_json against the matching
/// instance (dimensions and kept types are checked).
SolutionFile parse_solution(const Json& doc, const OfflineInstance& instance);

Json trace_event_to_json(const TraceEvent& event);

}  // namespace fairdiv
