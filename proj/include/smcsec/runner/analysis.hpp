#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "smcsec/runner/config.hpp"
#include "smcsec/runner/experiments.hpp"
#include "smcsec/runner/report.hpp"
#include "smcsec/runner/run.hpp"
#include "smcsec/runner/store.hpp"
#include "smcsec/smc/clopper_pearson.hpp"
#include "smcsec/smc/interval.hpp"
#include "smcsec/smc/property.hpp"
#include "smcsec/smc/tunnel.hpp"

namespace smcsec::runner {

class AnalysisError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

using Records = std::vector<ExecutionRecord>;

struct AnalysisInput {
  const ExperimentConfig& config;
  std::vector<ExperimentPoint> points;
  std::vector<Records> records;  // per point, ascending seed
};

inline Records concat(const std::vector<Records>& parts) {
  Records out;
  for (const auto& p : parts) out.insert(out.end(), p.begin(), p.end());
  return out;
}

inline ReportRow proportion_row(const ExperimentPoint& point, const Records& records, const smc::PropertySpec& prop,
                                double confidence, double y_step) {
  ReportRow row{point.x, 0.0, 1.0, confidence, records.size(), point.label, std::nullopt};
  if (!records.empty()) {
    const auto iv = smc::proportion_interval(smc::summarize(records, prop), confidence, y_step);
    row.lo = iv.lo;
    row.hi = iv.hi;
  }
  return row;
}

// Threshold grid for quantile analyses. Metrics already in [0, 1] use the
// unit range; anything else spans the observed values rounded out to the grid.
inline std::pair<double, double> quantile_range(const Records& all, const std::string& metric, double step) {
  double lo = 0.0;
  double hi = 0.0;
  bool first = true;
  for (const auto& r : all) {
    const double v = r.metric(metric);
    lo = first ? v : std::min(lo, v);
    hi = first ? v : std::max(hi, v);
    first = false;
  }
  if (lo >= 0.0 && hi <= 1.0) return {0.0, 1.0};
  return {std::min(0.0, std::floor(lo / step) * step), std::ceil(hi / step) * step};
}

inline ReportRow quantile_row(double x, const std::string& label, const Records& records, const std::string& metric,
                              double proportion, double confidence, double step, std::pair<double, double> range) {
  ReportRow row{x, range.first, range.second, confidence, records.size(), label, std::nullopt};
  if (!records.empty()) {
    std::vector<double> ys;
    for (const auto& r : records) ys.push_back(r.metric(metric));
    const auto iv = smc::quantile_interval(ys, proportion, confidence, step, range.first, range.second);
    row.lo = iv.lo;
    row.hi = iv.hi;
  }
  return row;
}

inline std::string quantile_name(const std::string& metric, double f) { return metric + "_q" + format_number(f); }

template <typename Interval>
ReportSeries tunnel_series(const std::string& name, const std::string& kind, const std::string& y,
                           double proportion, const smc::TunnelGraph<Interval>& graph, const std::string& x_metric) {
  ReportSeries s{name, kind, x_metric, y, proportion, {}};
  for (const auto& bin : graph.bins) {
    s.rows.push_back({bin.filter.center, bin.interval.lo, bin.interval.hi, graph.confidence, bin.n_samples,
                      "A=" + format_number(bin.filter.center), bin.filter});
  }
  return s;
}

// Bin centers: configured, or the mean x of each point's records on the grid.
inline std::vector<double> tunnel_centers(const AnalysisInput& in, const std::string& x_metric) {
  const auto& a = in.config.analysis;
  if (!a.x_centers.empty()) {
    auto centers = a.x_centers;
    std::sort(centers.begin(), centers.end());
    return centers;
  }
  std::vector<double> centers;
  for (const auto& recs : in.records) {
    if (recs.empty()) continue;
    double sum = 0.0;
    for (const auto& r : recs) sum += r.metric(x_metric);
    const double mean = sum / static_cast<double>(recs.size());
    centers.push_back(std::round(mean / a.x_grid_step) * a.x_grid_step);
  }
  std::sort(centers.begin(), centers.end());
  centers.erase(std::unique(centers.begin(), centers.end()), centers.end());
  if (centers.empty()) throw AnalysisError("tunnel analysis has no records to place bins");
  return centers;
}

inline void add_assertions(AnalysisReport& report, const AnalysisInput& in, const smc::PropertySpec& prop,
                           const std::vector<double>& proportions) {
  for (std::size_t i = 0; i < in.points.size(); ++i) {
    if (in.records[i].empty()) continue;
    const auto summary = smc::summarize(in.records[i], prop);
    for (double f : proportions) {
      const auto a = smc::assert_property(summary, f);
      report.assertions.push_back({i, in.points[i].label, in.config.analysis.property, f,
                                   std::string(smc::to_string(a.verdict)), a.confidence, summary.successes(),
                                   summary.trials()});
    }
  }
}

inline ReportSeries point_proportion_series(const std::string& name, const AnalysisInput& in,
                                            const smc::PropertySpec& prop, const std::string& series_filter,
                                            const std::string& x_metric) {
  const auto& a = in.config.analysis;
  ReportSeries s{name, "proportion", x_metric, a.property, 0.0, {}};
  for (std::size_t i = 0; i < in.points.size(); ++i) {
    if (!series_filter.empty() && in.points[i].series != series_filter) continue;
    s.rows.push_back(proportion_row(in.points[i], in.records[i], prop, a.confidence, a.proportion_grid_step));
  }
  return s;
}

inline ReportSeries point_quantile_series(const std::string& name, const AnalysisInput& in, const std::string& metric,
                                          double f, std::pair<double, double> range, const std::string& x_metric) {
  const auto& a = in.config.analysis;
  ReportSeries s{name, "quantile", x_metric, metric, f, {}};
  for (std::size_t i = 0; i < in.points.size(); ++i) {
    s.rows.push_back(quantile_row(in.points[i].x, in.points[i].label, in.records[i], metric, f, a.confidence,
                                  a.y_grid_step, range));
  }
  return s;
}

inline void confidence_curves(AnalysisReport& report, const ExperimentConfig& c) {
  const auto& a = c.analysis;
  for (double f : a.proportions) {
    ReportSeries s{"confidence_F" + format_number(f), "confidence_curve", "failed_samples", "confidence", f, {}};
    for (std::uint64_t n = 1; n <= a.curve_max_samples; ++n) {
      const double conf = smc::clopper_pearson_confidence(smc::BernoulliSummary{0, n}, f);
      s.rows.push_back({static_cast<double>(n), conf, conf, a.confidence, n, "N=" + std::to_string(n), std::nullopt});
    }
    report.series.push_back(std::move(s));
    report.min_samples.push_back({f, a.confidence, smc::min_samples_all_failures(f, a.confidence)});
  }
}

}  // namespace detail

/// Applies the configured analysis to a sample store. A pure function of
/// the store's contents: record order and worker sharding do not matter.
inline AnalysisReport analyze(const SampleStore& store, const ExperimentConfig& config) {
  config.validate();
  if (store.digest() != config.digest()) {
    throw AnalysisError("sample store digest " + store.digest() + " does not match configuration digest " +
                        config.digest());
  }
  const auto& a = config.analysis;
  detail::AnalysisInput in{config, experiment_points(config), {}};
  in.records.resize(in.points.size());

  if (config.id != "conf_vs_samples" && store.size() == 0) throw AnalysisError("sample store is empty");

  std::vector<std::string> digests;
  for (const auto& p : in.points) digests.push_back(point_digest(p));
  for (const auto& [key, rec] : store.records()) {
    const auto [point, seed] = key;
    if (point >= in.points.size()) {
      throw AnalysisError("record for unknown experiment point " + std::to_string(point));
    }
    if (rec.record.config_digest() != digests[point]) {
      throw AnalysisError("record (point " + std::to_string(point) + ", seed " + std::to_string(seed) +
                          ") has config digest " + rec.record.config_digest() + ", expected " + digests[point]);
    }
    // Only the configured seed ladder is analysed; a store may hold more.
    if (seed >= config.base_seed && seed - config.base_seed < config.n_samples) {
      in.records[point].push_back(rec.record);
    }
  }

  AnalysisReport report;
  report.experiment = config.id;
  report.digest = config.digest();
  report.confidence = a.confidence;

  const bool binary = config.id == "exp1_1a" || config.id == "exp1_1b" || config.id == "exp1_2" ||
                      config.id == "exp1_3" || config.id == "exp2" ||
                      (config.id == "custom" && config.custom.mode == "proportion");
  const smc::PropertySpec prop = smc::PropertySpec::parse(a.property);
  for (std::size_t i = 0; i < in.points.size(); ++i) {
    PointSummary s{i, in.points[i].label, in.points[i].series, in.points[i].x, digests[i], {}, std::nullopt};
    for (const auto& r : in.records[i]) s.seeds.push_back(r.seed());
    if (binary) s.successes = smc::summarize(in.records[i], prop).successes();
    report.points.push_back(std::move(s));
  }

  const std::string& id = config.id;
  if (id == "conf_vs_samples") {
    detail::confidence_curves(report, config);
  } else if (id == "exp1_1a") {
    report.series.push_back(detail::point_proportion_series("success", in, prop, "", "noise_level"));
    detail::add_assertions(report, in, prop, a.proportions);
  } else if (id == "exp1_1b" || id == "exp1_2") {
    const std::string x_metric = id == "exp1_1b" ? "replacements" : "realized_injection_fraction";
    const auto all = detail::concat(in.records);
    const smc::TunnelAxis axis{x_metric, smc::WindowFilter::Mode::window, a.half_width,
                               detail::tunnel_centers(in, x_metric), a.x_grid_step};
    const auto graph = smc::tunnel_graph(all, axis, prop, a.confidence, a.proportion_grid_step);
    report.series.push_back(detail::tunnel_series("tunnel_success", "tunnel", a.property, 0.0, graph, x_metric));
    detail::add_assertions(report, in, prop, a.proportions);
  } else if (id == "exp1_3") {
    for (const auto& policy : config.policies) {
      detail::Records subset;
      for (std::size_t i = 0; i < in.points.size(); ++i) {
        if (in.points[i].series == policy) subset.insert(subset.end(), in.records[i].begin(), in.records[i].end());
      }
      std::vector<double> centers;
      for (auto x : config.iteration_list) centers.push_back(static_cast<double>(x));
      std::sort(centers.begin(), centers.end());
      const smc::TunnelAxis axis{"iterations", smc::WindowFilter::Mode::exact, 0.0, centers, a.x_grid_step};
      const auto graph = smc::tunnel_graph(subset, axis, prop, a.confidence, a.proportion_grid_step);
      report.series.push_back(detail::tunnel_series(policy, "tunnel", a.property, 0.0, graph, "iterations"));
    }
  } else if (id == "exp2") {
    report.series.push_back(detail::point_proportion_series("sae_probability", in, prop, "", "design"));
    const auto all = detail::concat(in.records);
    const auto range = detail::quantile_range(all, a.y_metric, a.y_grid_step);
    for (double f : a.proportions) {
      report.series.push_back(
          detail::point_quantile_series(detail::quantile_name(a.y_metric, f), in, a.y_metric, f, range, "design"));
    }
    // Per design: quantile of the SAE count within each nested target group.
    for (std::size_t i = 0; i < in.points.size(); ++i) {
      const auto& p = in.points[i];
      for (double f : a.proportions) {
        ReportSeries s{detail::quantile_name(a.y_metric, f) + "_" + p.series + "_by_targets", "quantile",
                       "n_targets", a.y_metric, f, {}};
        for (std::size_t g : p.sae_groups) {
          s.rows.push_back(detail::quantile_row(static_cast<double>(g), "targets=" + std::to_string(g), in.records[i],
                                                sae_group_metric(g), f, a.confidence, a.y_grid_step, range));
        }
        report.series.push_back(std::move(s));
      }
    }
    detail::add_assertions(report, in, prop, {a.certify_proportion});
  } else if (id == "exp3a") {
    const auto range = detail::quantile_range(detail::concat(in.records), a.y_metric, a.y_grid_step);
    for (double f : a.proportions) {
      report.series.push_back(detail::point_quantile_series(detail::quantile_name(a.y_metric, f), in, a.y_metric, f,
                                                            range, "obfuscation_probability"));
    }
  } else if (id == "exp3b") {
    const auto all = detail::concat(in.records);
    const auto range = detail::quantile_range(all, a.y_metric, a.y_grid_step);
    const std::string x_metric = "obfuscation_probability";
    const smc::TunnelAxis axis{x_metric, smc::WindowFilter::Mode::window, a.half_width,
                               detail::tunnel_centers(in, x_metric), a.x_grid_step};
    for (double f : a.proportions) {
      const auto graph = smc::quantile_tunnel_graph(all, axis, a.y_metric, f, a.confidence, a.y_grid_step,
                                                    range.first, range.second);
      report.series.push_back(detail::tunnel_series("tunnel_" + detail::quantile_name(a.y_metric, f),
                                                    "quantile_tunnel", a.y_metric, f, graph, x_metric));
    }
  } else if (id == "custom") {
    if (config.custom.mode == "proportion") {
      report.series.push_back(detail::point_proportion_series("custom", in, prop, "", config.custom.sweep));
      detail::add_assertions(report, in, prop, a.proportions);
    } else {
      if (a.y_metric.empty()) throw AnalysisError("quantile analysis needs [analysis] y_metric");
      const auto range = detail::quantile_range(detail::concat(in.records), a.y_metric, a.y_grid_step);
      for (double f : a.proportions) {
        report.series.push_back(detail::point_quantile_series(detail::quantile_name(a.y_metric, f), in, a.y_metric,
                                                              f, range, config.custom.sweep));
      }
    }
  }

  const auto meta_path = (store.path().has_parent_path() ? store.path().parent_path() : std::filesystem::path(".")) /
                         "run_meta.json";
  if (std::ifstream meta(meta_path); meta) {
    try {
      report.sampling_wall_seconds = nlohmann::json::parse(meta).value("wall_seconds", 0.0);
    } catch (const nlohmann::json::exception&) {
    }
  }
  return report;
}

}  // namespace smcsec::runner
