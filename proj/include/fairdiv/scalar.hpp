// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

#include <boost/multiprecision/cpp_int.hpp>

namespace fairdiv {

/// Exact rational number used by the rational-arithmetic mode.
using Rational = boost::multiprecision::cpp_rational;

/// Largest denominator accepted when lifting a double to a Rational.
inline constexpr std::int64_t kMaxRationalDenominator = 1'000'000;

/// Best rational approximation of `x` with denominator at most `max_den`
/// (continued fractions). Throws if the approximation is off by more than
/// 1e-9 relative, which means `x` was not a short rational to begin with.
Rational rational_from_double(double x, std::int64_t max_den = kMaxRationalDenominator);

std::string to_string(const Rational& q);

/// Numeric policy for the two supported scalar types.
///
/// `exact` scalars compare with zero tolerance; floating scalars compare with
/// the relative tolerance handed to each predicate.
template <typename T>
struct ScalarTraits;

template <>
struct ScalarTraits<double> {
  static constexpr bool exact = false;
  static double from_double(double x) { return x; }
  static double to_double(double x) { return x; }
  static double abs(double x) { return std::fabs(x); }
};

template <>
struct ScalarTraits<Rational> {
  static constexpr bool exact = true;
  static Rational from_double(double x) { return rational_from_double(x); }
  static double to_double(const Rational& x) { return x.convert_to<double>(); }
  static Rational abs(const Rational& x) { return x < 0 ? Rational(-x) : x; }
};

template <typename T>
T from_double(double x) {
  return ScalarTraits<T>::from_double(x);
}

template <typename T>
double to_double(const T& x) {
  return ScalarTraits<T>::to_double(x);
}

template <typename T>
T abs_value(const T& x) {
  return ScalarTraits<T>::abs(x);
}

/// Comparison helper carrying a relative tolerance and an absolute floor.
/// For exact scalars both are ignored and comparisons are exact.
template <typename T>
struct Tolerance {
  double rel = 1e-9;
  double floor = 1e-12;

  /// |a - b| <= rel * max(|scale|, floor)
  bool eq(const T& a, const T& b, const T& scale) const {
    if constexpr (ScalarTraits<T>::exact) {
      return a == b;
    } else {
      return std::fabs(a - b) <= rel * std::max(std::fabs(scale), floor);
    }
  }
  bool eq(const T& a, const T& b) const {
    if constexpr (ScalarTraits<T>::exact) {
      return a == b;
    } else {
      return eq(a, b, std::max(std::fabs(a), std::fabs(b)));
    }
  }
  /// a > b by more than the tolerance.
  bool gt(const T& a, const T& b, const T& scale) const {
    if constexpr (ScalarTraits<T>::exact) {
      return a > b;
    } else {
      return a - b > rel * std::max(std::fabs(scale), floor);
    }
  }
  bool gt(const T& a, const T& b) const {
    if constexpr (ScalarTraits<T>::exact) {
      return a > b;
    } else {
      return gt(a, b, std::max(std::fabs(a), std::fabs(b)));
    }
  }
  bool positive(const T& a) const {
    if constexpr (ScalarTraits<T>::exact) {
      return a > 0;
    } else {
      return a > floor;
    }
  }
};

}  // namespace fairdiv
