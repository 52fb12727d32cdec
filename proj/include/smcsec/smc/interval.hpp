#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>

#include "smcsec/smc/clopper_pearson.hpp"

namespace smcsec::smc {

/// Confidence interval for the satisfaction probability of a property.
/// Endpoints are grid points in [0, 1].
struct ProportionInterval {
  double lo = 0.0;
  double hi = 1.0;
  double confidence = 0.0;
  double grid_step = 0.01;

  bool contains(double p) const { return lo <= p && p <= hi; }
  friend bool operator==(const ProportionInterval&, const ProportionInterval&) = default;
};

/// Confidence interval (lo, hi] for the F-quantile of a real-valued metric,
/// obtained by sweeping `metric <= t` over a threshold grid.
struct QuantileInterval {
  double lo = 0.0;
  double hi = 1.0;
  double confidence = 0.0;
  double grid_step = 0.01;
  double proportion = 0.5;

  friend bool operator==(const QuantileInterval&, const QuantileInterval&) = default;
};

/// Returns k * step. When 1/step is an integer K the value is computed as
/// k / K so grid points compare exactly against ratios such as M/N.
inline double grid_point(std::int64_t k, double step) {
  const double inverse = 1.0 / step;
  const double rounded = std::round(inverse);
  if (std::abs(inverse - rounded) < 1e-9 * rounded) return static_cast<double>(k) / rounded;
  return static_cast<double>(k) * step;
}

/// Sweeps F over {step, 2 step, ..., < 1}. lo is the largest F asserted
/// positive (M/N >= F) with confidence >= target; hi is the smallest F
/// asserted negative with confidence >= target. Defaults are 0 and 1.
inline ProportionInterval proportion_interval(const BernoulliSummary& summary, double target_confidence,
                                              double grid_step = 0.01) {
  detail::require_trials(summary);
  detail::require_confidence(target_confidence);
  if (!(grid_step > 0.0 && grid_step <= 0.5)) {
    throw std::domain_error("grid_step must lie in (0, 0.5], got " + std::to_string(grid_step));
  }

  ProportionInterval out{0.0, 1.0, target_confidence, grid_step};
  for (std::int64_t k = 1;; ++k) {
    const double f = grid_point(k, grid_step);
    if (f >= 1.0 - 1e-12) break;
    const Assertion a = assert_property(summary, f);
    if (a.confidence < target_confidence) continue;
    if (a.verdict == Verdict::positive) {
      out.lo = std::max(out.lo, f);
    } else {
      out.hi = std::min(out.hi, f);
    }
  }
  return out;
}

/// Interval for the `proportion`-quantile q of a metric, from samples.
/// Thresholds t = y_min, y_min + step, ..., <= y_max. A confident negative
/// assertion of P(metric <= t) >= F gives q > t (raises lo); a confident
/// positive one gives q <= t (lowers hi). Defaults are y_min and y_max.
inline QuantileInterval quantile_interval(std::span<const double> values, double proportion,
                                          double target_confidence, double grid_step, double y_min,
                                          double y_max) {
  if (values.empty()) throw std::domain_error("quantile_interval: no samples");
  detail::require_proportion(proportion);
  detail::require_confidence(target_confidence);
  if (!(grid_step > 0.0)) throw std::domain_error("quantile_interval: grid_step must be positive");
  if (!(y_max >= y_min)) throw std::domain_error("quantile_interval: y_max must not be below y_min");

  QuantileInterval out{y_min, y_max, target_confidence, grid_step, proportion};
  for (std::int64_t k = 0;; ++k) {
    const double t = y_min + grid_point(k, grid_step);
    if (t > y_max + 1e-9 * std::max(1.0, std::abs(y_max))) break;
    BernoulliSummary summary;
    for (double v : values) summary.add(v <= t);
    const Assertion a = assert_property(summary, proportion);
    if (a.confidence < target_confidence) continue;
    if (a.verdict == Verdict::negative) {
      out.lo = std::max(out.lo, t);
    } else {
      out.hi = std::min(out.hi, t);
    }
  }
  return out;
}

}  // namespace smcsec::smc
