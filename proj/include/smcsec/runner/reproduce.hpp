#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "smcsec/runner/analysis.hpp"
#include "smcsec/runner/config.hpp"
#include "smcsec/runner/emit.hpp"
#include "smcsec/runner/run.hpp"
#include "smcsec/runner/store.hpp"
#include "smcsec/smc/clopper_pearson.hpp"

namespace smcsec::runner {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct ReproduceOptions {
  std::filesystem::path out_dir;  // defaults to out/<case>
  std::size_t workers = 1;
  std::optional<std::uint64_t> base_seed;
};

struct ReproduceResult {
  std::string case_id;
  AnalysisReport report;
  std::vector<CheckResult> checks;
  std::vector<std::filesystem::path> files;

  bool passed() const {
    return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.passed; });
  }
};

inline std::vector<std::string> reproduce_cases() {
  std::vector<std::string> ids;
  for (const auto& id : experiment_ids()) {
    if (id != "custom") ids.push_back(id);
  }
  return ids;
}

namespace detail {

inline double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

inline std::string interval_text(const ReportRow& r) {
  return "[" + format_number(r.lo) + ", " + format_number(r.hi) + "]";
}

// First x in `series` whose point reaches `need` successes, or nullopt.
inline std::optional<double> first_x_reaching(const AnalysisReport& report, const std::string& series,
                                              std::uint64_t need) {
  std::optional<double> best;
  for (const auto& p : report.points) {
    if (p.series != series || !p.successes || *p.successes < need) continue;
    if (!best || p.x < *best) best = p.x;
  }
  return best;
}

inline std::vector<CheckResult> case_checks(const std::string& id, const ExperimentConfig& config,
                                            const SampleStore& store, const AnalysisReport& report) {
  std::vector<CheckResult> out;
  const auto expect = [&](std::string name, bool ok, std::string detail) {
    out.push_back({std::move(name), ok, std::move(detail)});
  };
  const std::uint64_t expected_records = experiment_points(config).size() * config.n_samples;
  if (id != "conf_vs_samples") {
    expect("record count", store.size() == expected_records,
           std::to_string(store.size()) + " records, expected " + std::to_string(expected_records));
  }

  if (id == "conf_vs_samples") {
    const std::vector<std::pair<double, std::uint64_t>> reference{{0.5, 4}, {0.1, 28}, {0.05, 58}, {0.01, 298}};
    const std::vector<std::uint64_t> exact{5, 29, 59, 299};
    for (std::size_t i = 0; i < reference.size(); ++i) {
      const auto& [f, ref] = reference[i];
      std::optional<std::uint64_t> n;
      for (const auto& m : report.min_samples) {
        if (m.proportion == f) n = m.n;
      }
      const bool ok = n && *n == exact[i] && (*n + 1 >= ref && *n <= ref + 1);
      expect("minimum failed samples F=" + format_number(f), ok,
             "N=" + (n ? std::to_string(*n) : std::string("missing")) + ", strict minimum " +
                 std::to_string(exact[i]) + ", reference " + std::to_string(ref) + " (+-1)");
    }
  } else if (id == "exp1_1a") {
    const auto& rows = report.find_series("success").rows;
    const auto lowest = std::min_element(rows.begin(), rows.end(), [](auto& a, auto& b) { return a.x < b.x; });
    const auto highest = std::max_element(rows.begin(), rows.end(), [](auto& a, auto& b) { return a.x < b.x; });
    expect("least-noise interval above most-noise interval", lowest->lo > highest->hi,
           lowest->label + " " + interval_text(*lowest) + " vs " + highest->label + " " + interval_text(*highest));
  } else if (id == "exp1_1b") {
    const auto& series = report.find_series("tunnel_success");
    expect("one tunnel bin per noise level", series.rows.size() == config.noise_levels.size(),
           std::to_string(series.rows.size()) + " bins for " + std::to_string(config.noise_levels.size()) + " levels");
    bool consistent = true;
    std::vector<ExecutionRecord> all;
    for (const auto& [key, rec] : store.records()) all.push_back(rec.record);
    const auto prop = smc::PropertySpec::parse(config.analysis.property);
    for (const auto& row : series.rows) {
      const auto subset = smc::select_window(all, "replacements", *row.window, config.analysis.x_grid_step);
      ReportRow direct = row;
      direct.n_samples = subset.size();
      if (!subset.empty()) {
        const auto iv = smc::proportion_interval(smc::summarize(subset, prop), config.analysis.confidence,
                                                 config.analysis.proportion_grid_step);
        direct.lo = iv.lo;
        direct.hi = iv.hi;
      } else {
        direct.lo = 0.0;
        direct.hi = 1.0;
      }
      consistent = consistent && direct == row;
    }
    expect("bins equal direct intervals on their windows", consistent, "B=" + format_number(config.analysis.half_width));
  } else if (id == "exp1_2") {
    const auto& rows = report.find_series("tunnel_success").rows;
    const ReportRow* low = nullptr;
    const ReportRow* high = nullptr;
    for (const auto& r : rows) {
      if (r.n_samples == 0) continue;
      if (!low) low = &r;
      high = &r;
    }
    const bool ok = low && high && low != high && low->lo > high->hi;
    expect("low-injection interval above high-injection interval", ok,
           low && high ? low->label + " " + interval_text(*low) + " vs " + high->label + " " +
                                     interval_text(*high)
                               : std::string("fewer than two populated bins"));
  } else if (id == "exp1_3") {
    const std::uint64_t need = (config.n_samples * 9 + 9) / 10;
    const auto lru = first_x_reaching(report, "LRU", need);
    const auto nmru = first_x_reaching(report, "NMRU", need);
    const auto show = [](std::optional<double> v) { return v ? format_number(*v) : std::string("never"); };
    expect("NMRU needs more iterations than LRU", lru && (!nmru || *nmru > *lru),
           "first X with >= " + std::to_string(need) + "/" + std::to_string(config.n_samples) + " successes: LRU " +
               show(lru) + ", NMRU " + show(nmru));
  } else if (id == "exp2") {
    const auto points = experiment_points(config);
    for (std::size_t i = 0; i < points.size(); ++i) {
      const auto recs = store.records_for(i);
      if (points[i].series == "GLOBAL_RANDOM") {
        std::uint64_t nonzero = 0;
        for (const auto& r : recs) nonzero += r.record.metric("sae_count") > 0 ? 1 : 0;
        expect("GLOBAL_RANDOM observes no SAE", nonzero == 0 && !recs.empty(),
               std::to_string(nonzero) + " of " + std::to_string(recs.size()) + " seeds with SAEs");
        for (const auto& a : report.assertions) {
          if (a.point != i) continue;
          const bool ok = a.verdict == "negative" && a.confidence >= 0.95;
          expect("certified P(SAE) < " + format_number(a.proportion), ok,
                 std::to_string(a.successes) + "/" + std::to_string(a.trials) + ", " + a.verdict +
                     " at C=" + format_number(a.confidence));
        }
      } else if (points[i].series == "SKEWED") {
        std::vector<double> medians;
        std::string text;
        for (std::size_t g : points[i].sae_groups) {
          std::vector<double> v;
          for (const auto& r : recs) v.push_back(r.record.metric(sae_group_metric(g)));
          medians.push_back(median(v));
          text += (text.empty() ? "" : ", ") + std::to_string(g) + ":" + format_number(medians.back());
        }
        bool increasing = !medians.empty() && medians.front() > 0;
        for (std::size_t k = 1; k < medians.size(); ++k) increasing = increasing && medians[k] > medians[k - 1];
        expect("SKEWED median SAE count positive and increasing in targets", increasing, "medians " + text);
      }
    }
  } else if (id == "exp3a") {
    const auto& rows = report.find_series(quantile_name("accuracy", 0.5)).rows;
    const ReportRow* low = nullptr;
    const ReportRow* high = nullptr;
    for (const auto& r : rows) {
      if (std::abs(r.x - 0.1) < 1e-9) low = &r;
      if (std::abs(r.x - 0.5) < 1e-9) high = &r;
    }
    const bool ok = low && high && high->hi < low->lo;
    expect("median accuracy at p=0.5 below p=0.1", ok,
           low && high ? "p=0.5 " + interval_text(*high) + " vs p=0.1 " + interval_text(*low)
                       : std::string("missing points"));
  } else if (id == "exp3b") {
    const auto& rows = report.find_series("tunnel_" + quantile_name("accuracy", 0.5)).rows;
    const bool ok = rows.size() >= 2 && rows.back().hi < rows.front().lo;
    expect("median accuracy falls across the sweep", ok,
           rows.size() >= 2 ? rows.front().label + " " + interval_text(rows.front()) + " vs " + rows.back().label +
                                  " " + interval_text(rows.back())
                            : std::string("fewer than two bins"));
  }
  return out;
}

}  // namespace detail

/// Runs a preset end to end (sample, analyse, emit CSV and SVG) and checks
/// the case's expected outcome.
inline ReproduceResult reproduce(const std::string& case_id, const ReproduceOptions& options = {}) {
  const auto cases = reproduce_cases();
  if (std::find(cases.begin(), cases.end(), case_id) == cases.end()) {
    throw ConfigError("unknown case id '" + case_id + "'");
  }
  ExperimentConfig config = preset(case_id);
  config.out_dir = (options.out_dir.empty() ? std::filesystem::path("out") / case_id : options.out_dir).string();
  if (options.base_seed) config.base_seed = *options.base_seed;

  run(config, RunOptions{options.workers});
  const SampleStore store = SampleStore::open(store_path(config), config.digest());

  ReproduceResult result;
  result.case_id = case_id;
  result.report = analyze(store, config);
  const auto dir = output_dir(config);
  write_report(result.report, dir / "report.json");
  for (auto format : {EmitFormat::csv, EmitFormat::svg}) {
    const auto files = emit(result.report, format, dir / "figures");
    result.files.insert(result.files.end(), files.begin(), files.end());
  }
  result.checks = detail::case_checks(case_id, config, store, result.report);
  return result;
}

}  // namespace smcsec::runner
