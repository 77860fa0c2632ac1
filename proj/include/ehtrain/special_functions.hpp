#ifndef EHTRAIN_SPECIAL_FUNCTIONS_HPP
#define EHTRAIN_SPECIAL_FUNCTIONS_HPP

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace ehtrain {

namespace special {

inline constexpr double kEulerGamma = 0.57721566490153286061;
inline constexpr double kTermTolerance = 1e-16;
inline constexpr int kMaxIterations = 500;

namespace detail {

inline void require_positive(double x, const char* fn) {
  if (!(x > 0.0)) {
    throw std::domain_error(std::string(fn) + ": argument must be > 0, got " + std::to_string(x));
  }
}

// E1(x) for 0 < x <= 1:
//   E1(x) = -gamma - ln(x) + sum_{k>=1} (-1)^{k+1} x^k / (k * k!)
inline double e1_series(double x) {
  double term = 1.0;  // (-1)^{k+1} x^k / k!, built up incrementally
  double sum = 0.0;
  for (int k = 1; k <= kMaxIterations; ++k) {
    term *= (k == 1) ? x : -x / k;
    const double contrib = term / k;
    sum += contrib;
    if (std::abs(contrib) < kTermTolerance * std::abs(sum)) {
      return -kEulerGamma - std::log(x) + sum;
    }
  }
  throw std::runtime_error("e1: power series did not converge");
}

// exp(x) * E1(x) for x > 1 via the modified Lentz evaluation of
//   1 / (x + 1 - 1 / (x + 3 - 4 / (x + 5 - ...)))
inline double scaled_e1_continued_fraction(double x) {
  constexpr double tiny = 1e-300;
  double b = x + 1.0;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i <= kMaxIterations; ++i) {
    const double an = -static_cast<double>(i) * i;
    b += 2.0;
    d = 1.0 / (an * d + b);
    c = b + an / c;
    const double del = c * d;
    h *= del;
    if (std::abs(del - 1.0) <= kTermTolerance) {
      return h;
    }
  }
  throw std::runtime_error("exp_e1: continued fraction did not converge");
}

}  // namespace detail

}  // namespace special

/// Exponential integral E1(x) = int_x^inf e^{-t}/t dt for x > 0.
///
/// Throws std::domain_error for x <= 0 (or NaN). For x beyond roughly 745 the
/// true value is below the smallest subnormal double and 0 is returned.
inline double e1(double x) {
  special::detail::require_positive(x, "e1");
  if (x <= 1.0) {
    return special::detail::e1_series(x);
  }
  if (std::isinf(x)) {
    return 0.0;
  }
  return std::exp(-x) * special::detail::scaled_e1_continued_fraction(x);
}

/// exp(x) * E1(x), computed without forming exp(x) for x > 1.
///
/// Lies in [1/(x+1), 1/x]; tends to 1/x for large x and to -gamma - ln(x)
/// as x -> 0+.
inline double exp_e1(double x) {
  special::detail::require_positive(x, "exp_e1");
  if (x <= 1.0) {
    return std::exp(x) * special::detail::e1_series(x);
  }
  if (std::isinf(x)) {
    return 0.0;
  }
  return special::detail::scaled_e1_continued_fraction(x);
}

}  // namespace ehtrain

#endif  // EHTRAIN_SPECIAL_FUNCTIONS_HPP
