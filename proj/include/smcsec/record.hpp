#pragma once

#include <cstdint>
#include <initializer_list>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>

#include "json.hpp"

namespace smcsec {

/// Thrown when a metric name is not present in a record.
class UnknownMetric : public std::out_of_range {
 public:
  explicit UnknownMetric(const std::string& name) : std::out_of_range("unknown metric '" + name + "'"), name_(name) {}
  const std::string& name() const { return name_; }

 private:
  std::string name_;
};

/// FNV-1a over the bytes of s, rendered as 16 lowercase hex digits.
inline std::string fnv1a_hex(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = kHex[h & 0xF];
    h >>= 4;
  }
  return out;
}

/// Stable digest of a configuration object. nlohmann::json keeps object
/// keys sorted, so the digest does not depend on the order fields were set.
inline std::string config_digest(const nlohmann::json& config) { return fnv1a_hex(config.dump()); }

using MetricMap = std::map<std::string, double, std::less<>>;

/// One opaque-box execution of an experiment: named metrics plus the seed
/// and configuration digest that produced it. Immutable once built.
class ExecutionRecord {
 public:
  ExecutionRecord() = default;
  ExecutionRecord(MetricMap metrics, std::uint64_t seed, std::string config_digest)
      : metrics_(std::move(metrics)), seed_(seed), config_digest_(std::move(config_digest)) {}

  const MetricMap& metrics() const { return metrics_; }
  std::uint64_t seed() const { return seed_; }
  const std::string& config_digest() const { return config_digest_; }

  bool has(std::string_view name) const { return metrics_.find(name) != metrics_.end(); }

  double metric(std::string_view name) const {
    auto it = metrics_.find(name);
    if (it == metrics_.end()) throw UnknownMetric(std::string(name));
    return it->second;
  }

  friend bool operator==(const ExecutionRecord&, const ExecutionRecord&) = default;

 private:
  MetricMap metrics_;
  std::uint64_t seed_ = 0;
  std::string config_digest_;
};

/// Assembles a record, rejecting it if any of `required` is missing.
/// The digest covers the run configuration only, so runs that differ
/// solely in seed share it.
inline ExecutionRecord record_metrics(MetricMap metrics, std::initializer_list<std::string_view> required,
                                      std::uint64_t seed, const nlohmann::json& run_config) {
  for (std::string_view name : required) {
    if (metrics.find(name) == metrics.end()) {
      throw std::invalid_argument("record is missing mandatory metric '" + std::string(name) + "'");
    }
  }
  return ExecutionRecord(std::move(metrics), seed, config_digest(run_config));
}

inline nlohmann::json to_json(const ExecutionRecord& record) {
  nlohmann::json metrics = nlohmann::json::object();
  for (const auto& [name, value] : record.metrics()) metrics[name] = value;
  return {{"seed", record.seed()}, {"config_digest", record.config_digest()}, {"metrics", std::move(metrics)}};
}

inline ExecutionRecord record_from_json(const nlohmann::json& j) {
  MetricMap metrics;
  for (const auto& [name, value] : j.at("metrics").items()) metrics.emplace(name, value.get<double>());
  return ExecutionRecord(std::move(metrics), j.at("seed").get<std::uint64_t>(),
                         j.at("config_digest").get<std::string>());
}

}  // namespace smcsec
