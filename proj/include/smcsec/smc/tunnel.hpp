#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "smcsec/record.hpp"
#include "smcsec/smc/interval.hpp"
#include "smcsec/smc/property.hpp"

namespace smcsec::smc {

/// Selects records whose x value lies in the open window (A - B, A + B),
/// or, in exact mode, within one x grid step of A.
struct WindowFilter {
  enum class Mode { window, exact };

  double center = 0.0;
  double half_width = 0.0;
  Mode mode = Mode::window;

  bool accepts(double x, double x_grid_step) const {
    if (mode == Mode::exact) return std::abs(x - center) < x_grid_step;
    return x > center - half_width && x < center + half_width;
  }

  friend bool operator==(const WindowFilter&, const WindowFilter&) = default;
};

template <typename Interval>
struct TunnelBin {
  WindowFilter filter;
  std::uint64_t n_samples = 0;
  Interval interval;
};

/// Ordered x-bins, each with a y-axis confidence interval at a common
/// confidence level.
template <typename Interval>
struct TunnelGraph {
  std::vector<TunnelBin<Interval>> bins;
  double confidence = 0.0;
  double x_grid_step = 1.0;
  double y_grid_step = 0.01;
};

/// x-axis construction shared by both tunnel flavours.
struct TunnelAxis {
  std::string x_metric;
  WindowFilter::Mode mode = WindowFilter::Mode::window;
  double half_width = 0.0;
  std::vector<double> centers;
  double x_grid_step = 1.0;
};

namespace detail {

inline void validate_axis(const TunnelAxis& axis) {
  if (axis.centers.empty()) throw std::invalid_argument("tunnel graph: x_centers must not be empty");
  if (!std::is_sorted(axis.centers.begin(), axis.centers.end())) {
    throw std::invalid_argument("tunnel graph: x_centers must be sorted ascending");
  }
  if (axis.half_width < 0.0) throw std::invalid_argument("tunnel graph: half_width must be non-negative");
  if (!(axis.x_grid_step > 0.0)) throw std::invalid_argument("tunnel graph: x_grid_step must be positive");
}

inline std::vector<ExecutionRecord> filter_records(std::span<const ExecutionRecord> records,
                                                   const std::string& x_metric, const WindowFilter& filter,
                                                   double x_grid_step) {
  std::vector<ExecutionRecord> out;
  for (const auto& r : records) {
    if (filter.accepts(r.metric(x_metric), x_grid_step)) out.push_back(r);
  }
  return out;
}

// Every record must carry both axes, even those outside every window.
inline void require_metrics(std::span<const ExecutionRecord> records, const std::string& x_metric,
                            const std::string& y_metric) {
  for (const auto& r : records) {
    r.metric(x_metric);
    r.metric(y_metric);
  }
}

}  // namespace detail

/// Window records, applying `filter` on `x_metric`.
inline std::vector<ExecutionRecord> select_window(std::span<const ExecutionRecord> records,
                                                  const std::string& x_metric, const WindowFilter& filter,
                                                  double x_grid_step) {
  return detail::filter_records(records, x_metric, filter, x_grid_step);
}

/// Tunnel of proportion intervals for `y_property`. Empty bins carry the
/// vacuous interval [0, 1].
inline TunnelGraph<ProportionInterval> tunnel_graph(std::span<const ExecutionRecord> records,
                                                    const TunnelAxis& axis, const PropertySpec& y_property,
                                                    double target_confidence, double y_grid_step) {
  detail::validate_axis(axis);
  detail::require_metrics(records, axis.x_metric, y_property.metric);

  TunnelGraph<ProportionInterval> graph{{}, target_confidence, axis.x_grid_step, y_grid_step};
  for (double center : axis.centers) {
    const WindowFilter filter{center, axis.half_width, axis.mode};
    const auto selected = detail::filter_records(records, axis.x_metric, filter, axis.x_grid_step);
    TunnelBin<ProportionInterval> bin{filter, selected.size(),
                                      ProportionInterval{0.0, 1.0, target_confidence, y_grid_step}};
    if (!selected.empty()) {
      bin.interval = proportion_interval(summarize(selected, y_property), target_confidence, y_grid_step);
    }
    graph.bins.push_back(bin);
  }
  return graph;
}

/// Tunnel of F-quantile intervals of `y_metric` on the grid [y_min, y_max].
inline TunnelGraph<QuantileInterval> quantile_tunnel_graph(std::span<const ExecutionRecord> records,
                                                           const TunnelAxis& axis, const std::string& y_metric,
                                                           double proportion, double target_confidence,
                                                           double y_grid_step, double y_min, double y_max) {
  detail::validate_axis(axis);
  detail::require_metrics(records, axis.x_metric, y_metric);

  TunnelGraph<QuantileInterval> graph{{}, target_confidence, axis.x_grid_step, y_grid_step};
  for (double center : axis.centers) {
    const WindowFilter filter{center, axis.half_width, axis.mode};
    const auto selected = detail::filter_records(records, axis.x_metric, filter, axis.x_grid_step);
    TunnelBin<QuantileInterval> bin{filter, selected.size(),
                                    QuantileInterval{y_min, y_max, target_confidence, y_grid_step, proportion}};
    if (!selected.empty()) {
      std::vector<double> ys;
      ys.reserve(selected.size());
      for (const auto& r : selected) ys.push_back(r.metric(y_metric));
      bin.interval = quantile_interval(ys, proportion, target_confidence, y_grid_step, y_min, y_max);
    }
    graph.bins.push_back(bin);
  }
  return graph;
}

}  // namespace smcsec::smc
