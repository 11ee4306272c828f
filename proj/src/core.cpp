// SPDX-License-Identifier: Apache-2.0
#include "fairdiv/core.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace fairdiv {

Rational rational_from_double(double x, std::int64_t max_den) {
  if (!std::isfinite(x)) throw InvalidInput("cannot lift a non-finite value to a rational");
  const bool negative = x < 0;
  const double target = std::fabs(x);
  // Continued-fraction convergents h/k.
  std::int64_t h0 = 0, h1 = 1, k0 = 1, k1 = 0;
  double rest = target;
  for (int iter = 0; iter < 64; ++iter) {
    const double a_real = std::floor(rest);
    if (a_real > 9e15) break;
    const auto a = static_cast<std::int64_t>(a_real);
    const std::int64_t h2 = a * h1 + h0;
    const std::int64_t k2 = a * k1 + k0;
    if (k2 > max_den) break;
    h0 = h1;
    h1 = h2;
    k0 = k1;
    k1 = k2;
    const double frac = rest - a_real;
    if (frac < 1e-15 || std::fabs(static_cast<double>(h1) / static_cast<double>(k1) - target) <=
                            1e-15 * std::max(1.0, target))
      break;
    rest = 1.0 / frac;
  }
  if (k1 == 0) throw InvalidInput("rational lift failed for " + std::to_string(x));
  Rational q(h1, k1);
  const double back = q.convert_to<double>();
  if (std::fabs(back - target) > 1e-14 * std::max(1.0, target)) {
    std::ostringstream msg;
    msg << "value " << x << " is not a rational with denominator <= " << max_den;
    throw InvalidInput(msg.str());
  }
  return negative ? Rational(-q) : q;
}

std::string to_string(const Rational& q) {
  std::ostringstream out;
  out << q;
  return out.str();
}

// ProductSupport --------------------------------------------------------------

std::size_t ProductSupport::type_count() const {
  std::size_t count = 1;
  for (const auto& s : values) count *= s.size();
  return count;
}

std::vector<std::size_t> ProductSupport::digits(std::size_t type_index) const {
  std::vector<std::size_t> out(values.size());
  for (std::size_t a = values.size(); a-- > 0;) {
    out[a] = type_index % values[a].size();
    type_index /= values[a].size();
  }
  return out;
}

std::size_t ProductSupport::index(std::span<const std::size_t> digits) const {
  std::size_t idx = 0;
  for (std::size_t a = 0; a < values.size(); ++a) idx = idx * values[a].size() + digits[a];
  return idx;
}

// TypeDistribution ------------------------------------------------------------

TypeDistribution::TypeDistribution(std::vector<int> type_ids, std::vector<double> probs, Grid<double> values,
                                   std::optional<ProductSupport> product)
    : type_ids_(std::move(type_ids)),
      probs_(std::move(probs)),
      values_(std::move(values)),
      product_(std::move(product)) {
  if (probs_.empty()) throw InvalidInput("distribution has an empty support");
  if (type_ids_.size() != probs_.size()) throw InvalidInput("type id count does not match probability count");
  if (values_.cols() != probs_.size())
    throw InvalidInput("value grid has " + std::to_string(values_.cols()) + " columns for " +
                       std::to_string(probs_.size()) + " types");
  if (values_.rows() == 0) throw InvalidInput("distribution has no agents");
  double total = 0.0;
  for (std::size_t j = 0; j < probs_.size(); ++j) {
    const double p = probs_[j];
    if (!(p > 0.0) || p > 1.0 || !std::isfinite(p))
      throw InvalidInput("type " + std::to_string(j) + " has probability outside (0,1]");
    total += p;
  }
  if (std::fabs(total - 1.0) > 1e-12) {
    std::ostringstream msg;
    msg.precision(17);
    msg << "probabilities sum to " << total << ", not 1";
    throw InvalidInput(msg.str());
  }
  for (double v : values_.data())
    if (!std::isfinite(v) || v < 0.0) throw InvalidInput("values must be finite and nonnegative");
  if (product_ && product_->type_count() != probs_.size())
    throw InvalidInput("product support does not match the number of types");
}

TypeDistribution TypeDistribution::from_rows(std::vector<double> probs, Grid<double> values) {
  std::vector<int> ids(probs.size());
  std::iota(ids.begin(), ids.end(), 0);
  return TypeDistribution(std::move(ids), std::move(probs), std::move(values));
}

bool TypeDistribution::unit_valued() const {
  return std::all_of(values_.data().begin(), values_.data().end(), [](double v) { return v >= 0.0 && v <= 1.0; });
}

bool TypeDistribution::is_point_mass() const {
  const auto& d = values_.data();
  const double first = d.front();
  return std::all_of(d.begin(), d.end(), [first](double v) { return std::fabs(v - first) <= 1e-12; });
}

// BasicOfflineInstance --------------------------------------------------------

template <typename T>
BasicOfflineInstance<T>::BasicOfflineInstance(Grid<T> values, std::vector<T> budgets) {
  const std::size_t n = values.rows();
  const std::size_t m = values.cols();
  if (n == 0) throw InvalidInput("instance has no agents");
  if (budgets.size() != n) throw InvalidInput("budget vector length does not match agent count");
  for (std::size_t i = 0; i < n; ++i)
    if (!(budgets[i] > 0)) throw InvalidInput("budget of agent " + std::to_string(i) + " is not positive");
  for (const T& v : values.data())
    if (v < 0) throw InvalidInput("instance values must be nonnegative");

  original_items_ = m;
  for (std::size_t j = 0; j < m; ++j) {
    bool valued = false;
    for (std::size_t i = 0; i < n && !valued; ++i) valued = values(i, j) > 0;
    if (valued) kept_.push_back(j);
  }
  if (kept_.empty()) throw InvalidInput("every agent values every item at zero");

  values_ = Grid<T>(n, kept_.size());
  for (std::size_t i = 0; i < n; ++i) {
    bool any = false;
    for (std::size_t k = 0; k < kept_.size(); ++k) {
      values_(i, k) = values(i, kept_[k]);
      any = any || values_(i, k) > 0;
    }
    if (!any) throw InvalidInput("agent " + std::to_string(i) + " values every item at zero");
  }
  budgets_ = std::move(budgets);
}

template <typename T>
BasicOfflineInstance<T> BasicOfflineInstance<T>::with_budgets(std::vector<T> budgets) const {
  if (budgets.size() != agents()) throw InvalidInput("budget vector length does not match agent count");
  for (const T& e : budgets)
    if (!(e > 0)) throw InvalidInput("budgets must be positive");
  BasicOfflineInstance copy = *this;
  copy.budgets_ = std::move(budgets);
  return copy;
}

template <typename T>
Grid<T> BasicOfflineInstance<T>::expand(const Grid<T>& shares) const {
  const std::size_t n = agents();
  Grid<T> full(n, original_items_, T{0});
  std::vector<bool> kept(original_items_, false);
  for (std::size_t k = 0; k < kept_.size(); ++k) {
    kept[kept_[k]] = true;
    for (std::size_t i = 0; i < n; ++i) full(i, kept_[k]) = shares(i, k);
  }
  const T equal_share = T{1} / T(static_cast<long>(n));
  for (std::size_t j = 0; j < original_items_; ++j)
    if (!kept[j])
      for (std::size_t i = 0; i < n; ++i) full(i, j) = equal_share;
  return full;
}

template <typename T>
Grid<T> BasicOfflineInstance<T>::restrict(const Grid<T>& full_shares) const {
  Grid<T> out(agents(), kept_.size());
  for (std::size_t k = 0; k < kept_.size(); ++k)
    for (std::size_t i = 0; i < agents(); ++i) out(i, k) = full_shares(i, kept_[k]);
  return out;
}

template class BasicOfflineInstance<double>;
template class BasicOfflineInstance<Rational>;

// BasicFractionalAllocation ---------------------------------------------------

template <typename T>
void BasicFractionalAllocation<T>::validate() const {
  const T lo = ScalarTraits<T>::exact ? T{0} : T(-1e-12);
  const T hi = ScalarTraits<T>::exact ? T{1} : T(1 + 1e-12);
  const T col_hi = ScalarTraits<T>::exact ? T{1} : T(1 + 1e-9);
  for (std::size_t j = 0; j < items(); ++j) {
    T col{0};
    for (std::size_t i = 0; i < agents(); ++i) {
      const T& x = shares(i, j);
      if (x < lo || x > hi) throw InvalidInput("share outside [0,1] at agent " + std::to_string(i));
      col += x;
    }
    if (col > col_hi) throw InvalidInput("column sum of item " + std::to_string(j) + " exceeds 1");
  }
}

template <typename T>
void BasicFractionalAllocation<T>::clamp() {
  for (std::size_t i = 0; i < agents(); ++i)
    for (std::size_t j = 0; j < items(); ++j) {
      T& x = shares(i, j);
      if (x < 0) x = T{0};
      if (x > 1) x = T{1};
    }
}

template struct BasicFractionalAllocation<double>;
template struct BasicFractionalAllocation<Rational>;

// IntegralAllocation ----------------------------------------------------------

void IntegralAllocation::validate() const {
  std::vector<int> seen(items(), 0);
  for (const auto& bundle : bundles)
    for (std::size_t t : bundle) {
      if (t >= items()) throw InvalidInput("bundle references item " + std::to_string(t) + " out of range");
      ++seen[t];
    }
  for (std::size_t t = 0; t < seen.size(); ++t)
    if (seen[t] != 1) throw InvalidInput("item " + std::to_string(t) + " is not in exactly one bundle");
}

// Operations --------------------------------------------------------------------

template <typename T>
BasicOfflineInstance<T> scale_values(const TypeDistribution& dist, const std::vector<double>& budgets) {
  const std::size_t n = dist.agents();
  const std::size_t m = dist.types();
  Grid<T> scaled(n, m);
  for (std::size_t j = 0; j < m; ++j) {
    const T f = from_double<T>(dist.probs()[j]);
    for (std::size_t i = 0; i < n; ++i) scaled(i, j) = from_double<T>(dist.value(i, j)) * f;
  }
  std::vector<T> e;
  e.reserve(budgets.size());
  for (double b : budgets) e.push_back(from_double<T>(b));
  return BasicOfflineInstance<T>(std::move(scaled), std::move(e));
}

template BasicOfflineInstance<double> scale_values<double>(const TypeDistribution&, const std::vector<double>&);
template BasicOfflineInstance<Rational> scale_values<Rational>(const TypeDistribution&, const std::vector<double>&);

OfflineInstance scale_values(const TypeDistribution& dist, const std::vector<double>& budgets) {
  return scale_values<double>(dist, budgets);
}

double bundle_value(std::size_t agent, std::span<const std::size_t> bundle, const ItemValues& values) {
  double total = 0.0;
  for (std::size_t t : bundle) total += values(t, agent);
  return total;
}

ExactOfflineInstance to_exact(const OfflineInstance& instance) {
  // Rebuild from the kept columns; dropped columns cannot reappear.
  Grid<Rational> values(instance.agents(), instance.items());
  for (std::size_t i = 0; i < instance.agents(); ++i)
    for (std::size_t j = 0; j < instance.items(); ++j) values(i, j) = rational_from_double(instance.value(i, j));
  std::vector<Rational> budgets;
  for (double e : instance.budgets()) budgets.push_back(rational_from_double(e));
  return ExactOfflineInstance(std::move(values), std::move(budgets));
}

namespace {
template <typename To, typename From, typename Fn>
std::vector<To> map_vec(const std::vector<From>& in, Fn fn) {
  std::vector<To> out;
  out.reserve(in.size());
  for (const auto& v : in) out.push_back(fn(v));
  return out;
}
}  // namespace

ExactMarketSolution to_exact(const MarketSolution& s) {
  ExactMarketSolution out;
  const auto lift = [](double v) { return rational_from_double(v); };
  out.allocation.shares = Grid<Rational>(s.x().rows(), s.x().cols());
  for (std::size_t i = 0; i < s.x().rows(); ++i)
    for (std::size_t j = 0; j < s.x().cols(); ++j) out.x()(i, j) = lift(s.x()(i, j));
  out.prices = map_vec<Rational>(s.prices, lift);
  out.budgets = map_vec<Rational>(s.budgets, lift);
  out.mbb = map_vec<Rational>(s.mbb, lift);
  return out;
}

MarketSolution to_double(const ExactMarketSolution& s) {
  MarketSolution out;
  const auto down = [](const Rational& v) { return v.convert_to<double>(); };
  out.allocation.shares = Grid<double>(s.x().rows(), s.x().cols());
  for (std::size_t i = 0; i < s.x().rows(); ++i)
    for (std::size_t j = 0; j < s.x().cols(); ++j) out.x()(i, j) = down(s.x()(i, j));
  out.prices = map_vec<double>(s.prices, down);
  out.budgets = map_vec<double>(s.budgets, down);
  out.mbb = map_vec<double>(s.mbb, down);
  return out;
}

}  // namespace fairdiv
