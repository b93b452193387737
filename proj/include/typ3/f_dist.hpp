#pragma once

#include <cmath>
#include <limits>

#include "typ3/matrix.hpp"

namespace typ3 {

namespace detail {

// Continued fraction for the incomplete beta function, modified Lentz method.
inline double beta_continued_fraction(double a, double b, double x) {
  constexpr double tiny = 1e-300;
  constexpr double eps = 1e-16;
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < tiny) d = tiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= 10000; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < eps) return h;
  }
  throw numerical_error("incomplete beta continued fraction did not converge");
}

}  // namespace detail

/// Regularized incomplete beta I_x(a, b), with y = 1 − x supplied separately
/// so callers can avoid cancellation when x is close to 1.
inline double regularized_beta(double a, double b, double x, double y) {
  if (!(a > 0.0) || !(b > 0.0)) throw input_error("regularized_beta: a, b must be positive");
  if (!(x >= 0.0 && x <= 1.0) || !(y >= 0.0 && y <= 1.0))
    throw input_error("regularized_beta: x outside [0,1]");
  if (x == 0.0) return 0.0;
  if (y == 0.0) return 1.0;
  const double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                           a * std::log(x) + b * std::log(y);
  const double front = std::exp(log_front);
  if (x < (a + 1.0) / (a + b + 2.0)) {
    return front * detail::beta_continued_fraction(a, b, x) / a;
  }
  return 1.0 - front * detail::beta_continued_fraction(b, a, y) / b;
}

inline double regularized_beta(double a, double b, double x) {
  return regularized_beta(a, b, x, 1.0 - x);
}

/// P(F > f_value) for F ~ F(df1, df2).
inline double f_tail(double f_value, std::size_t df1, std::size_t df2) {
  if (df1 < 1 || df2 < 1) throw input_error("f_tail: degrees of freedom must be >= 1");
  if (std::isnan(f_value) || f_value < 0.0) throw input_error("f_tail: negative F value");
  if (f_value == 0.0) return 1.0;
  if (std::isinf(f_value)) return 0.0;
  const double d1 = static_cast<double>(df1), d2 = static_cast<double>(df2);
  // P(F > f) = I_{d2/(d2 + d1 f)}(d2/2, d1/2)
  const double denom = d2 + d1 * f_value;
  return regularized_beta(0.5 * d2, 0.5 * d1, d2 / denom, d1 * f_value / denom);
}

}  // namespace typ3
