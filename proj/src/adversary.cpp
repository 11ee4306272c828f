// SPDX-License-Identifier: Apache-2.0
#include "fairdiv/adversary.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <string>

namespace fairdiv {
namespace {

// Sorted support with merged duplicates and zero-probability values removed.
ValueDistribution normalize(const ValueDistribution& d, std::size_t agent) {
  if (d.values.empty()) throw InvalidInput("agent " + std::to_string(agent) + " has an empty value support");
  if (d.values.size() != d.probs.size())
    throw InvalidInput("agent " + std::to_string(agent) + " has mismatched values and probabilities");
  std::map<double, double> merged;
  for (std::size_t k = 0; k < d.values.size(); ++k) {
    if (!std::isfinite(d.probs[k]) || d.probs[k] < 0)
      throw InvalidInput("agent " + std::to_string(agent) + " has a negative probability");
    if (d.probs[k] > 0) merged[d.values[k]] += d.probs[k];
  }
  const double total = std::accumulate(d.probs.begin(), d.probs.end(), 0.0);
  if (std::fabs(total - 1.0) > 1e-12)
    throw InvalidInput("agent " + std::to_string(agent) + " probabilities sum to " + std::to_string(total));
  ValueDistribution out;
  for (const auto& [v, p] : merged) {
    out.values.push_back(v);
    out.probs.push_back(p);
  }
  return out;
}

}  // namespace

TypeDistribution identical_iid(const ValueDistribution& marginal, std::size_t n, std::size_t cap) {
  if (n == 0) throw InvalidInput("identical_iid needs at least one agent");
  return independent_expansion(std::vector<ValueDistribution>(n, marginal), cap);
}

TypeDistribution independent_expansion(const std::vector<ValueDistribution>& marginals, std::size_t cap) {
  const std::size_t n = marginals.size();
  if (n == 0) throw InvalidInput("independent_expansion needs at least one agent");
  ProductSupport support;
  std::size_t m = 1;
  for (std::size_t i = 0; i < n; ++i) {
    ValueDistribution d = normalize(marginals[i], i);
    if (m > cap / d.values.size())
      throw InvalidInput("product support exceeds " + std::to_string(cap) + " types; use smaller supports or fewer agents");
    m *= d.values.size();
    support.values.push_back(std::move(d.values));
    support.probs.push_back(std::move(d.probs));
  }
  Grid<double> values(n, m);
  std::vector<double> probs(m, 1.0);
  std::vector<int> ids(m);
  for (std::size_t t = 0; t < m; ++t) {
    ids[t] = static_cast<int>(t);
    const auto digits = support.digits(t);
    for (std::size_t i = 0; i < n; ++i) {
      values(i, t) = support.values[i][digits[i]];
      probs[t] *= support.probs[i][digits[i]];
    }
  }
  // Absorb the product's rounding so the total is 1 within the validation bound.
  const double total = std::accumulate(probs.begin(), probs.end(), 0.0);
  for (double& p : probs) p /= total;
  return TypeDistribution(std::move(ids), std::move(probs), std::move(values), std::move(support));
}

TypeDistribution correlated_iid(std::vector<int> type_ids, std::vector<double> probs, Grid<double> values) {
  return TypeDistribution(std::move(type_ids), std::move(probs), std::move(values));
}

ItemValues lower_bound_prefix(std::size_t n, std::size_t T, double eps, std::size_t segments) {
  if (n == 0) throw InvalidInput("lower bound instance needs at least one agent");
  if (T % n != 0) throw InvalidInput("T = " + std::to_string(T) + " is not divisible by n = " + std::to_string(n));
  if (!(eps > 0.0 && eps < 1.0)) throw InvalidInput("eps must lie in (0, 1)");
  if (segments > n) throw InvalidInput("prefix has more segments than agents");
  const std::size_t len = T / n;
  ItemValues out(T, n, 0.0);
  for (std::size_t t = 0; t < len * segments; ++t)
    for (std::size_t i = 0; i < n; ++i) out(t, i) = t / len == i ? 1.0 : eps;
  return out;
}

ItemValues lower_bound_instance(std::size_t n, std::size_t T, double eps) {
  return lower_bound_prefix(n, T, eps, n);
}

AdaptiveStateMachine::AdaptiveStateMachine(double r, std::size_t n) : r_(r), n_(n) {
  if (!(r > 0.0 && r < 1.0)) throw InvalidInput("exponent r must lie in (0, 1)");
  if (n < 2) throw InvalidInput("the adaptive adversary needs two value-bearing agents");
}

double AdaptiveStateMachine::nu(double r, std::size_t i) {
  const double x = static_cast<double>(i);
  return std::pow(x + 1.0, r) - std::pow(x, r);
}

std::vector<double> AdaptiveStateMachine::next() {
  if (awaiting_) throw InvalidInput("allocation of the previous item was not reported");
  std::vector<double> v(n_, 0.0);
  const std::size_t depth = static_cast<std::size_t>(std::labs(state_));
  v[0] = state_ > 0 ? nu(r_, depth) : 1.0;
  v[1] = state_ < 0 ? nu(r_, depth) : 1.0;
  awaiting_ = true;
  ++rounds_;
  return v;
}

void AdaptiveStateMachine::feedback(std::size_t agent) {
  if (!awaiting_) throw InvalidInput("feedback without a pending item");
  if (agent >= n_) throw InvalidInput("feedback names an unknown agent");
  if (agent == 0) ++state_;
  if (agent == 1) --state_;
  awaiting_ = false;
}

}  // namespace fairdiv
