// SPDX-License-Identifier: Apache-2.0
#include "fairdiv/online.hpp"

#include <algorithm>
#include <cmath>

namespace fairdiv {

Policy parse_policy(std::string_view name) {
  if (name == "utilitarian") return Policy::utilitarian;
  if (name == "por") return Policy::por;
  if (name == "pocr") return Policy::pocr;
  if (name == "uniform") return Policy::uniform;
  if (name == "round_robin") return Policy::round_robin;
  throw InvalidInput("unknown allocator '" + std::string(name) + "'");
}

const char* policy_name(Policy policy) {
  switch (policy) {
    case Policy::utilitarian: return "utilitarian";
    case Policy::por: return "por";
    case Policy::pocr: return "pocr";
    case Policy::uniform: return "uniform";
    case Policy::round_robin: return "round_robin";
  }
  return "?";
}

bool needs_plan(Policy policy) { return policy == Policy::por || policy == Policy::pocr; }

Plan make_plan(const MarketSolution& solution, const OfflineInstance& instance, CliquePartition cliques) {
  return {instance.expand(solution.x()), std::move(cliques), solution.budgets};
}

AllocatorState::AllocatorState(Policy policy, std::size_t n, Philox4x32 rng, const Plan* plan, bool point_mass)
    : policy_(policy), n_(n), rng_(rng), plan_(plan), point_mass_(point_mass), running_(n, n), max_item_(n, n) {
  if (n == 0) throw InvalidInput("allocator needs at least one agent");
  if (!needs_plan(policy)) return;
  if (!plan) throw InvalidInput(std::string(policy_name(policy)) + " needs a precomputed fractional allocation");
  const Grid<double>& x = plan->xstar;
  if (x.rows() != n) throw InvalidInput("plan has the wrong number of agents");
  for (std::size_t j = 0; j < x.cols(); ++j) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) total += x(i, j);
    if (std::fabs(total - 1.0) > 1e-9)
      throw InvalidInput("plan column " + std::to_string(j) + " sums to " + std::to_string(total));
  }
  if (policy == Policy::pocr) {
    std::vector<int> seen(n, 0);
    for (const AgentSet& c : plan->cliques.cliques)
      for (std::size_t a : c) {
        if (a >= n) throw InvalidInput("clique names an unknown agent");
        ++seen[a];
      }
    if (std::any_of(seen.begin(), seen.end(), [](int s) { return s != 1; }))
      throw InvalidInput("cliques do not partition the agents");
  }
}

void AllocatorState::record(std::size_t agent, std::span<const double> values) {
  for (std::size_t i = 0; i < n_; ++i) {
    running_(i, agent) += values[i];
    max_item_(i, agent) = std::max(max_item_(i, agent), values[i]);
  }
  ++rounds_;
}

std::size_t utilitarian_step(AllocatorState& state, std::span<const double> values) {
  const std::size_t n = state.agents();
  if (state.point_mass()) return state.rounds() % n;
  const double best = *std::max_element(values.begin(), values.end());
  std::vector<std::size_t> ties;
  for (std::size_t i = 0; i < n; ++i)
    if (values[i] >= best - 1e-12) ties.push_back(i);
  return ties.size() == 1 ? ties.front() : ties[state.rng().below(ties.size())];
}

namespace {

// Index k with probability weight(k) / total; never a zero-weight index.
template <typename Weight>
std::size_t sample(Philox4x32& rng, std::size_t count, Weight weight) {
  double total = 0.0;
  for (std::size_t k = 0; k < count; ++k) total += weight(k);
  const double u = rng.uniform() * total;
  double acc = 0.0;
  std::size_t last = count;
  for (std::size_t k = 0; k < count; ++k) {
    const double w = weight(k);
    if (w <= 0.0) continue;
    last = k;
    acc += w;
    if (u < acc) return k;
  }
  return last;
}

}  // namespace

std::size_t por_step(AllocatorState& state, std::size_t type) {
  const Grid<double>& x = state.plan()->xstar;
  if (type >= x.cols()) throw InvalidInput("unknown item type");
  return sample(state.rng(), state.agents(), [&](std::size_t i) { return x(i, type); });
}

std::size_t pocr_step(AllocatorState& state, std::size_t type) {
  const Plan& plan = *state.plan();
  if (type >= plan.xstar.cols()) throw InvalidInput("unknown item type");
  const auto& cliques = plan.cliques.cliques;
  const std::size_t c = sample(state.rng(), cliques.size(), [&](std::size_t k) {
    double mass = 0.0;
    for (std::size_t a : cliques[k]) mass += plan.xstar(a, type);
    return mass;
  });
  const AgentSet& members = cliques[c];
  const std::size_t judge = *std::min_element(members.begin(), members.end());
  std::size_t pick = members.front();
  for (std::size_t a : members) {
    const double va = state.running()(judge, a);
    const double vp = state.running()(judge, pick);
    if (va < vp || (va == vp && a < pick)) pick = a;
  }
  return pick;
}

std::size_t uniform_step(AllocatorState& state) { return state.rng().below(state.agents()); }

std::size_t round_robin_step(AllocatorState& state) { return state.rounds() % state.agents(); }

std::size_t allocate(AllocatorState& state, std::size_t type, std::span<const double> values) {
  switch (state.policy()) {
    case Policy::utilitarian: return utilitarian_step(state, values);
    case Policy::por: return por_step(state, type);
    case Policy::pocr: return pocr_step(state, type);
    case Policy::uniform: return uniform_step(state);
    case Policy::round_robin: return round_robin_step(state);
  }
  throw InvalidInput("unknown policy");
}

std::vector<std::size_t> default_checkpoints(std::size_t T) {
  std::vector<std::size_t> out;
  for (std::size_t t = 1; t < T; t *= 2) out.push_back(t);
  out.push_back(T);
  return out;
}

namespace {

EnvySnapshot snapshot(const AllocatorState& state, double peak) {
  const std::size_t n = state.agents();
  EnvySnapshot s{state.rounds(), Grid<double>(n, n), state.max_item(), std::vector<double>(n), peak};
  for (std::size_t i = 0; i < n; ++i) {
    s.utility[i] = state.running()(i, i);
    for (std::size_t j = 0; j < n; ++j) s.envy(i, j) = std::max(state.running()(i, j) - state.running()(i, i), 0.0);
  }
  return s;
}

// Drives one run; `source(t, values)` fills the round's values and returns
// its type, `sink(agent)` receives the decision.
template <typename Source, typename Sink>
OnlineResult drive(std::size_t n, std::size_t T, std::uint64_t seed, Policy policy, const Plan* plan,
                   bool point_mass, const RunOptions& options, Source source, Sink sink) {
  std::vector<std::size_t> checkpoints = options.checkpoints.empty() ? default_checkpoints(T) : options.checkpoints;
  std::sort(checkpoints.begin(), checkpoints.end());
  checkpoints.erase(std::unique(checkpoints.begin(), checkpoints.end()), checkpoints.end());
  for (std::size_t c : checkpoints)
    if (c > T) throw InvalidInput("checkpoint " + std::to_string(c) + " exceeds T");

  AllocatorState state(policy, n, Philox4x32(seed, options.stream), plan, point_mass);
  OnlineResult out;
  out.run.T = T;
  out.run.seed = seed;
  out.run.arrivals.reserve(T);
  out.run.assignments.reserve(T);
  out.allocation.bundles.assign(n, {});
  out.allocation.item_values = ItemValues(T, n);
  std::vector<double> values(n);
  std::size_t next_cp = 0;
  while (next_cp < checkpoints.size() && checkpoints[next_cp] == 0) out.run.envy_trace.push_back(snapshot(state, out.run.peak_envy)), ++next_cp;
  for (std::size_t t = 0; t < T; ++t) {
    const std::size_t type = source(t, state.rng(), values);
    const std::size_t agent = allocate(state, type, values);
    sink(agent);
    state.record(agent, values);
    for (std::size_t i = 0; i < n; ++i) {
      out.allocation.item_values(t, i) = values[i];
      out.run.peak_envy = std::max(out.run.peak_envy, state.running()(i, agent) - state.running()(i, i));
    }
    out.allocation.bundles[agent].push_back(t);
    out.run.arrivals.push_back(type);
    out.run.assignments.push_back(agent);
    while (next_cp < checkpoints.size() && checkpoints[next_cp] == t + 1) out.run.envy_trace.push_back(snapshot(state, out.run.peak_envy)), ++next_cp;
  }
  return out;
}

void reject_plan_policies(Policy policy, const char* adversary) {
  if (needs_plan(policy))
    throw IncompatiblePolicy(std::string(policy_name(policy)) + " needs a distribution-based adversary, not " +
                             adversary);
}

}  // namespace

OnlineResult run_online(const TypeDistribution& dist, Policy policy, std::size_t T, std::uint64_t seed,
                        const Plan* plan, const RunOptions& options) {
  const std::size_t n = dist.agents();
  if (plan && plan->xstar.cols() != dist.types()) throw InvalidInput("plan does not match the distribution");
  std::vector<double> cdf(dist.types());
  double acc = 0.0;
  for (std::size_t k = 0; k < cdf.size(); ++k) cdf[k] = acc += dist.probs()[k];
  auto source = [&](std::size_t, Philox4x32& rng, std::vector<double>& values) {
    const double u = rng.uniform() * acc;
    std::size_t type = static_cast<std::size_t>(std::upper_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
    type = std::min(type, cdf.size() - 1);
    for (std::size_t i = 0; i < n; ++i) values[i] = dist.value(i, type);
    return type;
  };
  return drive(n, T, seed, policy, plan, dist.is_point_mass(), options, source, [](std::size_t) {});
}

OnlineResult run_sequence(const ItemValues& items, Policy policy, std::uint64_t seed, const RunOptions& options) {
  reject_plan_policies(policy, "a fixed value sequence");
  const std::size_t n = items.cols();
  auto source = [&](std::size_t t, Philox4x32&, std::vector<double>& values) {
    for (std::size_t i = 0; i < n; ++i) values[i] = items(t, i);
    return t;
  };
  return drive(n, items.rows(), seed, policy, nullptr, false, options, source, [](std::size_t) {});
}

OnlineResult run_adaptive(AdaptiveStateMachine& adversary, std::size_t n, Policy policy, std::size_t T,
                          std::uint64_t seed, const RunOptions& options) {
  reject_plan_policies(policy, "the adaptive adversary");
  auto source = [&](std::size_t, Philox4x32&, std::vector<double>& values) {
    const auto v = adversary.next();
    if (v.size() != n) throw InvalidInput("adversary agent count does not match");
    std::copy(v.begin(), v.end(), values.begin());
    return static_cast<std::size_t>(adversary.state() + static_cast<long>(T));
  };
  return drive(n, T, seed, policy, nullptr, false, options, source,
               [&](std::size_t agent) { adversary.feedback(agent); });
}

}  // namespace fairdiv
