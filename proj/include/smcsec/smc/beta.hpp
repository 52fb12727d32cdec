#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

namespace smcsec::smc {

namespace detail {

inline double log_gamma(double x) {
#if defined(__GLIBC__)
  // lgamma() writes the global signgam; the reentrant variant keeps this pure.
  int sign = 0;
  return ::lgamma_r(x, &sign);
#else
  return std::lgamma(x);
#endif
}

// Modified Lentz evaluation of the continued fraction for I_x(a, b).
// Converges quickly for x < (a + 1) / (a + b + 2); callers use the
// symmetry I_x(a, b) = 1 - I_{1-x}(b, a) outside that region.
inline double beta_continued_fraction(double x, double a, double b) {
  constexpr int kMaxIterations = 10000;
  constexpr double kEpsilon = 1e-16;
  constexpr double kTiny = 1e-300;

  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;

  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;

  for (int m = 1; m <= kMaxIterations; ++m) {
    const double m2 = 2.0 * m;

    // even step
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;

    // odd step
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;

    if (std::abs(delta - 1.0) < kEpsilon) return h;
  }
  throw std::runtime_error("incomplete beta continued fraction did not converge");
}

}  // namespace detail

/// Regularized incomplete beta function I_x(s1, s2), i.e. the CDF of a
/// Beta(s1, s2) distribution evaluated at x.
///
/// For integer shapes this equals the binomial upper tail
/// P(Binom(s1 + s2 - 1, x) >= s1). Throws std::domain_error when x lies
/// outside [0, 1] or a shape is not a positive finite number.
inline double regularized_incomplete_beta(double x, double s1, double s2) {
  if (!(x >= 0.0 && x <= 1.0)) {
    throw std::domain_error("incomplete beta: x must lie in [0, 1], got " + std::to_string(x));
  }
  if (!(std::isfinite(s1) && s1 > 0.0) || !(std::isfinite(s2) && s2 > 0.0)) {
    throw std::domain_error("incomplete beta: shape parameters must be positive and finite");
  }
  if (x == 0.0) return 0.0;
  if (x == 1.0) return 1.0;

  const double log_front = detail::log_gamma(s1 + s2) - detail::log_gamma(s1) - detail::log_gamma(s2) +
                           s1 * std::log(x) + s2 * std::log1p(-x);
  const double front = std::exp(log_front);

  double value;
  if (x < (s1 + 1.0) / (s1 + s2 + 2.0)) {
    value = front * detail::beta_continued_fraction(x, s1, s2) / s1;
  } else {
    value = 1.0 - front * detail::beta_continued_fraction(1.0 - x, s2, s1) / s2;
  }
  if (value < 0.0) return 0.0;
  if (value > 1.0) return 1.0;
  return value;
}

}  // namespace smcsec::smc
