#pragma once

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <system_error>
#include <vector>

#include "json.hpp"
#include "smcsec/smc/tunnel.hpp"

namespace smcsec::runner {

/// Shortest round-trip decimal form: 0.14, 20, 1e-05.
inline std::string format_number(double v) {
  if (v == 0.0) return "0";  // folds -0
  char buf[64];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc{}) throw std::runtime_error("format_number: conversion failed");
  return std::string(buf, end);
}

/// One plotted interval: a point, a tunnel bin or a curve sample.
struct ReportRow {
  double x = 0.0;
  double lo = 0.0;
  double hi = 1.0;
  double confidence = 0.0;
  std::uint64_t n_samples = 0;
  std::string label;
  std::optional<smc::WindowFilter> window;

  friend bool operator==(const ReportRow&, const ReportRow&) = default;
};

struct ReportSeries {
  std::string name;
  // proportion | quantile | tunnel | quantile_tunnel | confidence_curve
  std::string kind;
  std::string x_metric;
  std::string y;  // property text or metric name
  double proportion = 0.0;  // quantile level; unused for proportion kinds
  std::vector<ReportRow> rows;

  friend bool operator==(const ReportSeries&, const ReportSeries&) = default;
};

struct PointSummary {
  std::size_t index = 0;
  std::string label;
  std::string series;
  double x = 0.0;
  std::string digest;
  std::vector<std::uint64_t> seeds;
  // Tally of the analysis property; absent for families it does not apply to.
  std::optional<std::uint64_t> successes;

  std::uint64_t n_samples() const { return seeds.size(); }
  friend bool operator==(const PointSummary&, const PointSummary&) = default;
};

struct AssertionRow {
  std::size_t point = 0;
  std::string label;
  std::string property;
  double proportion = 0.0;
  std::string verdict;
  double confidence = 0.0;
  std::uint64_t successes = 0;
  std::uint64_t trials = 0;

  friend bool operator==(const AssertionRow&, const AssertionRow&) = default;
};

struct MinSamplesRow {
  double proportion = 0.0;
  double confidence = 0.0;
  std::uint64_t n = 0;

  friend bool operator==(const MinSamplesRow&, const MinSamplesRow&) = default;
};

struct AnalysisReport {
  std::string experiment;
  std::string digest;
  double confidence = 0.0;
  std::vector<PointSummary> points;
  std::vector<ReportSeries> series;
  std::vector<AssertionRow> assertions;
  std::vector<MinSamplesRow> min_samples;
  std::optional<double> sampling_wall_seconds;

  const ReportSeries& find_series(const std::string& name) const {
    for (const auto& s : series) {
      if (s.name == name) return s;
    }
    throw std::out_of_range("report has no series '" + name + "'");
  }

  friend bool operator==(const AnalysisReport&, const AnalysisReport&) = default;
};

inline nlohmann::json to_json(const AnalysisReport& r) {
  using nlohmann::json;
  json points = json::array();
  for (const auto& p : r.points) {
    json j{{"index", p.index}, {"label", p.label}, {"series", p.series}, {"x", p.x},
           {"digest", p.digest}, {"n_samples", p.n_samples()}, {"seeds", p.seeds}};
    if (p.successes) j["successes"] = *p.successes;
    points.push_back(j);
  }
  json series = json::array();
  for (const auto& s : r.series) {
    json rows = json::array();
    for (const auto& row : s.rows) {
      json j{{"x", row.x},   {"lo", row.lo}, {"hi", row.hi}, {"confidence", row.confidence},
             {"n_samples", row.n_samples}, {"label", row.label}};
      if (row.window) {
        j["window"] = {{"center", row.window->center},
                       {"half_width", row.window->half_width},
                       {"mode", row.window->mode == smc::WindowFilter::Mode::exact ? "exact" : "window"}};
      }
      rows.push_back(j);
    }
    series.push_back({{"name", s.name},
                      {"kind", s.kind},
                      {"x_metric", s.x_metric},
                      {"y", s.y},
                      {"proportion", s.proportion},
                      {"rows", rows}});
  }
  json assertions = json::array();
  for (const auto& a : r.assertions) {
    assertions.push_back({{"point", a.point},
                          {"label", a.label},
                          {"property", a.property},
                          {"proportion", a.proportion},
                          {"verdict", a.verdict},
                          {"confidence", a.confidence},
                          {"successes", a.successes},
                          {"trials", a.trials}});
  }
  json mins = json::array();
  for (const auto& m : r.min_samples) mins.push_back({{"proportion", m.proportion}, {"confidence", m.confidence}, {"n", m.n}});

  json out{{"experiment", r.experiment}, {"digest", r.digest},         {"confidence", r.confidence},
           {"points", points},           {"series", series},           {"assertions", assertions},
           {"min_samples", mins}};
  if (r.sampling_wall_seconds) out["sampling_wall_seconds"] = *r.sampling_wall_seconds;
  return out;
}

inline AnalysisReport report_from_json(const nlohmann::json& j) {
  AnalysisReport r;
  r.experiment = j.at("experiment").get<std::string>();
  r.digest = j.at("digest").get<std::string>();
  r.confidence = j.at("confidence").get<double>();
  for (const auto& p : j.at("points")) {
    PointSummary s;
    s.index = p.at("index").get<std::size_t>();
    s.label = p.at("label").get<std::string>();
    s.series = p.at("series").get<std::string>();
    s.x = p.at("x").get<double>();
    s.digest = p.at("digest").get<std::string>();
    s.seeds = p.at("seeds").get<std::vector<std::uint64_t>>();
    if (p.contains("successes")) s.successes = p.at("successes").get<std::uint64_t>();
    r.points.push_back(std::move(s));
  }
  for (const auto& s : j.at("series")) {
    ReportSeries series;
    series.name = s.at("name").get<std::string>();
    series.kind = s.at("kind").get<std::string>();
    series.x_metric = s.at("x_metric").get<std::string>();
    series.y = s.at("y").get<std::string>();
    series.proportion = s.at("proportion").get<double>();
    for (const auto& row : s.at("rows")) {
      ReportRow out;
      out.x = row.at("x").get<double>();
      out.lo = row.at("lo").get<double>();
      out.hi = row.at("hi").get<double>();
      out.confidence = row.at("confidence").get<double>();
      out.n_samples = row.at("n_samples").get<std::uint64_t>();
      out.label = row.at("label").get<std::string>();
      if (row.contains("window")) {
        const auto& w = row.at("window");
        out.window = smc::WindowFilter{w.at("center").get<double>(), w.at("half_width").get<double>(),
                                       w.at("mode").get<std::string>() == "exact" ? smc::WindowFilter::Mode::exact
                                                                                  : smc::WindowFilter::Mode::window};
      }
      series.rows.push_back(std::move(out));
    }
    r.series.push_back(std::move(series));
  }
  for (const auto& a : j.at("assertions")) {
    r.assertions.push_back({a.at("point").get<std::size_t>(), a.at("label").get<std::string>(),
                            a.at("property").get<std::string>(), a.at("proportion").get<double>(),
                            a.at("verdict").get<std::string>(), a.at("confidence").get<double>(),
                            a.at("successes").get<std::uint64_t>(), a.at("trials").get<std::uint64_t>()});
  }
  for (const auto& m : j.at("min_samples")) {
    r.min_samples.push_back(
        {m.at("proportion").get<double>(), m.at("confidence").get<double>(), m.at("n").get<std::uint64_t>()});
  }
  if (j.contains("sampling_wall_seconds")) r.sampling_wall_seconds = j.at("sampling_wall_seconds").get<double>();
  return r;
}

inline void write_report(const AnalysisReport& report, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write report " + path.string());
  out << to_json(report).dump(2) << '\n';
  if (!out) throw std::runtime_error("cannot write report " + path.string());
}

inline AnalysisReport read_report(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open report " + path.string());
  try {
    return report_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("malformed report " + path.string() + ": " + e.what());
  }
}

}  // namespace smcsec::runner
