#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "smcsec/record.hpp"

namespace smcsec::runner {

inline constexpr int kStoreSchema = 1;

class StoreError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct StoredRecord {
  std::size_t point = 0;
  std::string label;
  ExecutionRecord record;
};

inline nlohmann::json to_json(const StoredRecord& r) {
  nlohmann::json j = to_json(r.record);
  j["point"] = r.point;
  j["label"] = r.label;
  return j;
}

inline StoredRecord stored_record_from_json(const nlohmann::json& j) {
  return {j.at("point").get<std::size_t>(), j.at("label").get<std::string>(), record_from_json(j)};
}

/// Append-only newline-delimited JSON sample file. The first line is the
/// header {"schema":1,"digest":...}; every further line is one record.
///
/// Workers append to per-worker shard files next to the store; `merge`
/// folds shards into the main file in canonical (point, seed) order, so
/// the finished file does not depend on worker count or scheduling.
class SampleStore {
 public:
  using Key = std::pair<std::size_t, std::uint64_t>;

  /// Opens the store at `path`, creating it with `digest` if absent.
  /// Throws StoreError if an existing store carries another digest.
  static SampleStore open(const std::filesystem::path& path, const std::string& digest) {
    if (!std::filesystem::exists(path)) {
      if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
      std::ofstream out(path, std::ios::binary);
      if (!out) throw StoreError("cannot create sample store " + path.string());
      out << header_line(digest) << '\n';
      if (!out) throw StoreError("cannot write sample store " + path.string());
    }
    SampleStore store = load(path);
    if (store.digest_ != digest) {
      throw StoreError("sample store " + path.string() + " was produced by a different configuration (digest " +
                       store.digest_ + ", expected " + digest + ")");
    }
    return store;
  }

  /// Reads the main file and any leftover shards from an interrupted run.
  static SampleStore load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw StoreError("cannot open sample store " + path.string());
    SampleStore store;
    store.path_ = path;
    std::string line;
    if (!std::getline(in, line)) throw StoreError("sample store " + path.string() + " has no header");
    try {
      const auto header = nlohmann::json::parse(line);
      if (header.at("schema").get<int>() != kStoreSchema) {
        throw StoreError("unsupported sample store schema in " + path.string());
      }
      store.digest_ = header.at("digest").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      throw StoreError("malformed sample store header in " + path.string() + ": " + e.what());
    }
    store.read_records(in, path);
    for (const auto& shard : store.shard_paths()) {
      std::ifstream s(shard, std::ios::binary);
      store.read_records(s, shard);
    }
    return store;
  }

  const std::string& digest() const { return digest_; }
  const std::filesystem::path& path() const { return path_; }
  const std::map<Key, StoredRecord>& records() const { return records_; }
  std::size_t size() const { return records_.size(); }
  bool contains(std::size_t point, std::uint64_t seed) const { return records_.count({point, seed}) != 0; }

  std::vector<StoredRecord> records_for(std::size_t point) const {
    std::vector<StoredRecord> out;
    for (auto it = records_.lower_bound({point, 0}); it != records_.end() && it->first.first == point; ++it) {
      out.push_back(it->second);
    }
    return out;
  }

  std::filesystem::path shard_path(std::size_t worker) const {
    return path_.string() + ".shard" + std::to_string(worker);
  }

  /// Rewrites the main file with every known record in canonical order,
  /// then removes the shards.
  void merge() {
    const auto tmp = std::filesystem::path(path_.string() + ".tmp");
    {
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      if (!out) throw StoreError("cannot write " + tmp.string());
      out << header_line(digest_) << '\n';
      for (const auto& [key, rec] : records_) out << to_json(rec).dump() << '\n';
      if (!out) throw StoreError("cannot write " + tmp.string());
    }
    std::filesystem::rename(tmp, path_);
    for (const auto& shard : shard_paths()) std::filesystem::remove(shard);
  }

  /// Adds a record that was already persisted to a shard.
  void adopt(StoredRecord record) {
    const Key key{record.point, record.record.seed()};
    records_.emplace(key, std::move(record));
  }

  static std::string header_line(const std::string& digest) {
    return nlohmann::json{{"schema", kStoreSchema}, {"digest", digest}}.dump();
  }

 private:
  std::vector<std::filesystem::path> shard_paths() const {
    std::vector<std::filesystem::path> out;
    const auto dir = path_.has_parent_path() ? path_.parent_path() : std::filesystem::path(".");
    const std::string prefix = path_.filename().string() + ".shard";
    if (!std::filesystem::exists(dir)) return out;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
      if (entry.path().filename().string().rfind(prefix, 0) == 0) out.push_back(entry.path());
    }
    std::sort(out.begin(), out.end());
    return out;
  }

  void read_records(std::istream& in, const std::filesystem::path& source) {
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(line);
      } catch (const nlohmann::json::exception&) {
        // A shard can end in a torn line if its writer was killed mid-write.
        if (source != path_ && in.peek() == std::char_traits<char>::eof()) break;
        throw StoreError("malformed record at " + source.string() + ":" + std::to_string(lineno));
      }
      try {
        adopt(stored_record_from_json(j));
      } catch (const nlohmann::json::exception& e) {
        throw StoreError("malformed record at " + source.string() + ":" + std::to_string(lineno) + ": " + e.what());
      }
    }
  }

  std::filesystem::path path_;
  std::string digest_;
  std::map<Key, StoredRecord> records_;
};

}  // namespace smcsec::runner
