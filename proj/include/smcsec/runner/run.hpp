#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <limits>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"
#include "smcsec/runner/config.hpp"
#include "smcsec/runner/experiments.hpp"
#include "smcsec/runner/store.hpp"

namespace smcsec::runner {

struct RunOptions {
  std::size_t workers = 1;
  // Stop after this many new records; lets tests simulate an interrupted run.
  std::uint64_t max_new_records = std::numeric_limits<std::uint64_t>::max();
};

struct RunSummary {
  std::filesystem::path store_path;
  std::uint64_t new_records = 0;
  std::uint64_t total_records = 0;
  double wall_seconds = 0.0;
};

inline std::filesystem::path output_dir(const ExperimentConfig& c) {
  return c.out_dir.empty() ? std::filesystem::path("out") / c.id : std::filesystem::path(c.out_dir);
}

inline std::filesystem::path store_path(const ExperimentConfig& c) { return output_dir(c) / "samples.jsonl"; }
inline std::filesystem::path run_meta_path(const ExperimentConfig& c) { return output_dir(c) / "run_meta.json"; }

namespace detail {

struct Job {
  std::size_t point;
  std::uint64_t seed;
};

// Sampling wall time is kept beside the store, accumulated over sessions.
inline void record_wall_time(const std::filesystem::path& path, double seconds, std::uint64_t new_records) {
  nlohmann::json meta{{"wall_seconds", 0.0}, {"records_timed", 0}};
  if (std::ifstream in(path); in) {
    try {
      meta = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception&) {
    }
  }
  meta["wall_seconds"] = meta.value("wall_seconds", 0.0) + seconds;
  meta["records_timed"] = meta.value("records_timed", std::uint64_t{0}) + new_records;
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw StoreError("cannot write " + path.string());
  out << meta.dump(2) << '\n';
}

}  // namespace detail

/// Collects n_samples records per experiment point with seeds
/// base_seed + i, skipping (point, seed) pairs already in the store.
inline RunSummary run(const ExperimentConfig& config, const RunOptions& options = {}) {
  config.validate();
  const auto points = experiment_points(config);
  const auto path = store_path(config);
  SampleStore store = SampleStore::open(path, config.digest());

  std::vector<std::string> digests;
  for (const auto& p : points) digests.push_back(point_digest(p));

  std::vector<detail::Job> jobs;
  for (std::size_t i = 0; i < points.size(); ++i) {
    for (std::uint64_t k = 0; k < config.n_samples; ++k) {
      const std::uint64_t seed = config.base_seed + k;
      if (!store.contains(i, seed)) jobs.push_back({i, seed});
    }
  }
  if (jobs.size() > options.max_new_records) jobs.resize(options.max_new_records);

  const auto start = std::chrono::steady_clock::now();
  const std::size_t workers = std::max<std::size_t>(1, std::min(options.workers, std::max<std::size_t>(1, jobs.size())));
  std::atomic<std::size_t> next{0};
  std::mutex mutex;
  std::exception_ptr failure;
  std::vector<StoredRecord> produced;

  const auto work = [&](std::size_t worker) {
    try {
      std::ofstream shard(store.shard_path(worker), std::ios::binary | std::ios::app);
      if (!shard) throw StoreError("cannot write shard " + store.shard_path(worker).string());
      for (;;) {
        const std::size_t j = next.fetch_add(1);
        if (j >= jobs.size()) break;
        {
          std::lock_guard lock(mutex);
          if (failure) break;
        }
        const auto& job = jobs[j];
        StoredRecord rec{job.point, points[job.point].label, run_point(points[job.point], job.seed)};
        if (rec.record.config_digest() != digests[job.point]) {
          throw std::logic_error("record digest differs from its point digest");
        }
        shard << to_json(rec).dump() << '\n' << std::flush;
        if (!shard) throw StoreError("cannot write shard " + store.shard_path(worker).string());
        std::lock_guard lock(mutex);
        produced.push_back(std::move(rec));
      }
    } catch (...) {
      std::lock_guard lock(mutex);
      if (!failure) failure = std::current_exception();
    }
  };

  if (workers == 1) {
    work(0);
  } else {
    std::vector<std::thread> threads;
    for (std::size_t w = 0; w < workers; ++w) threads.emplace_back(work, w);
    for (auto& t : threads) t.join();
  }

  RunSummary summary;
  summary.store_path = path;
  summary.new_records = produced.size();
  for (auto& rec : produced) store.adopt(std::move(rec));
  // Completed records are kept even when a worker failed.
  store.merge();
  summary.total_records = store.size();
  summary.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (summary.new_records > 0) detail::record_wall_time(run_meta_path(config), summary.wall_seconds, summary.new_records);
  if (failure) std::rethrow_exception(failure);
  return summary;
}

}  // namespace smcsec::runner
