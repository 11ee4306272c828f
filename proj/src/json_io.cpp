// SPDX-License-Identifier: Apache-2.0
#include "fairdiv/json_io.hpp"

#include <fstream>
#include <sstream>

#include "fairdiv/market.hpp"

namespace fairdiv {

namespace {

double number(const Json& v, const char* what) {
  if (!v.is_number()) throw InvalidInput(std::string(what) + " must be a number");
  return v.get<double>();
}

std::vector<double> numbers(const Json& v, const char* what) {
  if (!v.is_array()) throw InvalidInput(std::string(what) + " must be an array");
  std::vector<double> out;
  out.reserve(v.size());
  for (const auto& x : v) out.push_back(number(x, what));
  return out;
}

template <typename T>
Json grid_json(const Grid<T>& g) {
  Json rows = Json::array();
  for (std::size_t r = 0; r < g.rows(); ++r) {
    Json row = Json::array();
    for (std::size_t c = 0; c < g.cols(); ++c) {
      if constexpr (std::is_same_v<T, double>)
        row.push_back(g(r, c));
      else
        row.push_back(to_string(g(r, c)));
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

Json exact_vector(const std::vector<Rational>& v) {
  Json out = Json::array();
  for (const auto& q : v) out.push_back(to_string(q));
  return out;
}

Rational parse_rational(const Json& v) {
  if (!v.is_string()) throw InvalidInput("exact entries must be strings like \"1/3\"");
  try {
    return Rational(v.get<std::string>());
  } catch (const std::exception&) {
    throw InvalidInput("bad rational \"" + v.get<std::string>() + "\"");
  }
}

template <typename T, typename Get>
Grid<T> parse_grid(const Json& v, std::size_t rows, std::size_t cols, const char* what, Get get) {
  if (!v.is_array() || v.size() != rows) throw InvalidInput(std::string(what) + " has the wrong number of rows");
  Grid<T> g(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    if (!v[r].is_array() || v[r].size() != cols) throw InvalidInput(std::string(what) + " has a ragged row");
    for (std::size_t c = 0; c < cols; ++c) g(r, c) = get(v[r][c]);
  }
  return g;
}

}  // namespace

InstanceFile parse_instance(const Json& doc) {
  if (!doc.is_object()) throw InvalidInput("instance must be a JSON object");
  if (!doc.contains("n") || !doc.contains("types")) throw InvalidInput("instance needs \"n\" and \"types\"");
  const auto n_signed = doc.at("n").is_number_integer() ? doc.at("n").get<long long>() : -1;
  if (n_signed < 1) throw InvalidInput("\"n\" must be a positive integer");
  const auto n = static_cast<std::size_t>(n_signed);
  const Json& types = doc.at("types");
  if (!types.is_array() || types.empty()) throw InvalidInput("\"types\" must be a nonempty array");

  std::vector<int> ids;
  std::vector<double> probs;
  Grid<double> values(n, types.size());
  for (std::size_t k = 0; k < types.size(); ++k) {
    const Json& t = types[k];
    if (!t.is_object() || !t.contains("prob") || !t.contains("values"))
      throw InvalidInput("each type needs \"prob\" and \"values\"");
    probs.push_back(number(t.at("prob"), "prob"));
    const auto v = numbers(t.at("values"), "values");
    if (v.size() != n) throw InvalidInput("type " + std::to_string(k) + " must list one value per agent");
    for (std::size_t i = 0; i < n; ++i) values(i, k) = v[i];
    ids.push_back(t.contains("id") ? t.at("id").get<int>() : static_cast<int>(k));
  }
  std::vector<double> budgets(n, 1.0);
  if (doc.contains("budgets")) {
    budgets = numbers(doc.at("budgets"), "budgets");
    if (budgets.size() != n) throw InvalidInput("\"budgets\" must have n entries");
  }
  return {TypeDistribution(std::move(ids), std::move(probs), std::move(values)), std::move(budgets)};
}

Json instance_to_json(const TypeDistribution& dist, const std::vector<double>& budgets) {
  Json types = Json::array();
  for (std::size_t k = 0; k < dist.types(); ++k) {
    Json v = Json::array();
    for (std::size_t i = 0; i < dist.agents(); ++i) v.push_back(dist.value(i, k));
    types.push_back({{"id", dist.type_ids()[k]}, {"prob", dist.probs()[k]}, {"values", std::move(v)}});
  }
  return {{"n", dist.agents()}, {"types", std::move(types)}, {"budgets", budgets}};
}

Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot read " + path);
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw InvalidInput(path + ": " + e.what());
  }
}

Json solution_to_json(const MarketSolution& solution, const OfflineInstance& instance,
                      const CliquePartition& partition, const ExactMarketSolution* exact) {
  Json doc;
  doc["types"] = instance.original_items();
  doc["kept"] = instance.kept_types();
  doc["x"] = grid_json(solution.x());
  doc["p"] = solution.prices;
  doc["e"] = solution.budgets;
  doc["partition"] = partition.cliques;
  if (exact) {
    doc["exact"] = {{"x", grid_json(exact->x())}, {"p", exact_vector(exact->prices)}, {"e", exact_vector(exact->budgets)}};
  }
  return doc;
}

SolutionFile parse_solution(const Json& doc, const OfflineInstance& instance) {
  if (!doc.is_object()) throw InvalidInput("solution must be a JSON object");
  for (const char* key : {"x", "p", "e", "partition"})
    if (!doc.contains(key)) throw InvalidInput(std::string("solution is missing \"") + key + "\"");
  if (doc.contains("kept") && doc.at("kept").get<std::vector<std::size_t>>() != instance.kept_types())
    throw InvalidInput("solution was computed for a different instance");

  const std::size_t n = instance.agents(), m = instance.items();
  SolutionFile out;
  out.solution.x() = parse_grid<double>(doc.at("x"), n, m, "x", [](const Json& v) { return number(v, "x"); });
  out.solution.prices = numbers(doc.at("p"), "p");
  out.solution.budgets = numbers(doc.at("e"), "e");
  if (out.solution.prices.size() != m || out.solution.budgets.size() != n)
    throw InvalidInput("solution dimensions do not match the instance");
  refresh_mbb(out.solution, instance);

  out.partition.cliques = doc.at("partition").get<std::vector<AgentSet>>();
  std::vector<int> seen(n, 0);
  for (const auto& c : out.partition.cliques)
    for (std::size_t a : c) {
      if (a >= n) throw InvalidInput("partition names an unknown agent");
      ++seen[a];
    }
  for (int s : seen)
    if (s != 1) throw InvalidInput("partition must cover every agent exactly once");

  if (doc.contains("exact")) {
    const Json& ex = doc.at("exact");
    ExactMarketSolution q;
    q.x() = parse_grid<Rational>(ex.at("x"), n, m, "exact x", parse_rational);
    for (const auto& v : ex.at("p")) q.prices.push_back(parse_rational(v));
    for (const auto& v : ex.at("e")) q.budgets.push_back(parse_rational(v));
    if (q.prices.size() != m || q.budgets.size() != n) throw InvalidInput("exact solution dimensions do not match");
    out.exact = std::move(q);
  }
  return out;
}

Json trace_event_to_json(const TraceEvent& event) {
  Json edges = Json::array();
  for (const auto& [a, b] : event.removed_edges) edges.push_back({a, b});
  Json doc{{"operation", event.operation}, {"removed_edges", std::move(edges)},
           {"budget_deltas", event.budget_deltas}, {"step", event.step}};
  if (!event.note.empty()) doc["note"] = event.note;
  return doc;
}

}  // namespace fairdiv
