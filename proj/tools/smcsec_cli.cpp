// Command-line front end: run, analyze, emit, reproduce.

#include <cstdint>
#include <exception>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "smcsec/runner/analysis.hpp"
#include "smcsec/runner/config.hpp"
#include "smcsec/runner/emit.hpp"
#include "smcsec/runner/report.hpp"
#include "smcsec/runner/reproduce.hpp"
#include "smcsec/runner/run.hpp"
#include "smcsec/runner/store.hpp"

namespace fs = std::filesystem;
using namespace smcsec::runner;

namespace {

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::string out_dir;

  void apply(ExperimentConfig& c) const {
    if (seed) c.base_seed = *seed;
    if (!out_dir.empty()) c.out_dir = out_dir;
  }
};

fs::path sibling_dir(const fs::path& file) { return file.has_parent_path() ? file.parent_path() : fs::path("."); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Statistical model checking of simulated cache side-channel experiments"};
  app.require_subcommand(1);

  Overrides overrides;
  app.add_option("--seed", overrides.seed, "Override the base seed");
  app.add_option("--out-dir", overrides.out_dir, "Output directory");

  std::string config_path;
  std::size_t workers = 1;
  auto* run_cmd = app.add_subcommand("run", "Collect samples for a configuration");
  run_cmd->add_option("--config", config_path, "INI configuration file")->required()->check(CLI::ExistingFile);
  run_cmd->add_option("--workers", workers, "Parallel workers")->check(CLI::PositiveNumber);

  std::string store_arg;
  auto* analyze_cmd = app.add_subcommand("analyze", "Analyse a sample store");
  analyze_cmd->add_option("--store", store_arg, "Sample store (samples.jsonl)")->required()->check(CLI::ExistingFile);
  analyze_cmd->add_option("--config", config_path, "INI configuration file")->required()->check(CLI::ExistingFile);

  std::string report_arg;
  std::string format = "csv";
  auto* emit_cmd = app.add_subcommand("emit", "Write CSV or SVG figures from a report");
  emit_cmd->add_option("--report", report_arg, "Analysis report (report.json)")->required()->check(CLI::ExistingFile);
  emit_cmd->add_option("--format", format, "csv or svg")->check(CLI::IsMember({"csv", "svg"}));

  std::string case_id;
  auto* repro_cmd = app.add_subcommand("reproduce", "Run a preset end to end and check its outcome");
  repro_cmd->add_option("case", case_id, "Case id")->required();
  repro_cmd->add_option("--workers", workers, "Parallel workers")->check(CLI::PositiveNumber);

  for (auto* sub : {run_cmd, analyze_cmd, emit_cmd, repro_cmd}) {
    sub->add_option("--seed", overrides.seed, "Override the base seed");
    sub->add_option("--out-dir", overrides.out_dir, "Output directory");
  }

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run_cmd) {
      ExperimentConfig config = load_config(config_path);
      overrides.apply(config);
      const auto summary = run(config, RunOptions{workers});
      std::cout << "store " << summary.store_path.string() << ": " << summary.new_records << " new, "
                << summary.total_records << " total records\n";
    } else if (*analyze_cmd) {
      ExperimentConfig config = load_config(config_path);
      overrides.apply(config);
      const fs::path store_path(store_arg);
      const SampleStore store = SampleStore::load(store_path);
      const auto report = analyze(store, config);
      const fs::path out = (overrides.out_dir.empty() ? sibling_dir(store_path) : fs::path(overrides.out_dir)) /
                           "report.json";
      write_report(report, out);
      std::cout << "report " << out.string() << ": " << report.series.size() << " series, "
                << report.assertions.size() << " assertions\n";
    } else if (*emit_cmd) {
      const fs::path report_path(report_arg);
      const auto report = read_report(report_path);
      const fs::path dir =
          overrides.out_dir.empty() ? sibling_dir(report_path) / "figures" : fs::path(overrides.out_dir);
      for (const auto& f : emit(report, parse_emit_format(format), dir)) std::cout << f.string() << '\n';
    } else if (*repro_cmd) {
      ReproduceOptions options;
      options.out_dir = overrides.out_dir;
      options.workers = workers;
      options.base_seed = overrides.seed;
      const auto result = reproduce(case_id, options);
      for (const auto& c : result.checks) {
        std::cout << (c.passed ? "PASS " : "FAIL ") << case_id << ": " << c.name << " (" << c.detail << ")\n";
      }
      std::cout << (result.passed() ? "PASS " : "FAIL ") << case_id << '\n';
      return result.passed() ? 0 : 1;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
