#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

#include "smcsec/cache/config.hpp"
#include "smcsec/cache/mapping.hpp"
#include "smcsec/cache/replacement.hpp"

namespace smcsec::cache {

struct AccessResult {
  bool hit = false;
  std::optional<std::uint64_t> evicted_address;
  // Eviction not forced by capacity (set-associative eviction).
  bool sae = false;

  friend bool operator==(const AccessResult&, const AccessResult&) = default;
};

struct CacheCounters {
  std::uint64_t accesses = 0;
  std::uint64_t hits = 0;
  std::uint64_t replacements = 0;
  std::uint64_t saes = 0;

  friend bool operator==(const CacheCounters&, const CacheCounters&) = default;
};

/// Single-level cache model covering conventional set-associative
/// (MODULO), skewed (SKEWED, ScatterCache-like) and indirection-based
/// randomized (GLOBAL_RANDOM, Mirage-like) designs.
///
/// The tag store is `partitions x num_sets x slots_per_set`. MODULO and
/// SKEWED use one partition per way with a single slot each; MODULO indexes
/// every partition identically, so the slots at one index form a set.
/// GLOBAL_RANDOM uses two skews whose sets hold over-provisioned tags and a
/// separate data store of num_sets * ways blocks with back-pointers.
///
/// Not thread-safe; use one instance per thread.
class Cache {
 public:
  explicit Cache(const CacheConfig& config) : config_(config) {
    config_.validate();
    line_shift_ = config_.line_shift();
    partitions_ = partition_count(config_);
    slots_per_set_ = 1;
    if (indirect()) {
      slots_per_set_ = static_cast<std::size_t>(
          std::ceil(static_cast<double>(config_.ways) / 2.0 * (1.0 + config_.extra_tag_ratio) - 1e-9));
      data_owner_.assign(config_.capacity_lines(), kNone);
      free_data_.reserve(config_.capacity_lines());
      for (std::size_t d = config_.capacity_lines(); d-- > 0;) free_data_.push_back(static_cast<std::uint32_t>(d));
    }
    for (std::size_t p = 0; p < partitions_; ++p) keys_.push_back(skew_key(config_.seed, p));
    slots_.resize(partitions_ * config_.num_sets * slots_per_set_);
    rng_.seed(config_.seed);
  }

  const CacheConfig& config() const { return config_; }
  const CacheCounters& counters() const { return counters_; }
  std::size_t valid_lines() const { return valid_lines_; }
  std::size_t slots_per_set() const { return slots_per_set_; }

  std::uint64_t line_of(std::uint64_t address) const { return address >> line_shift_; }

  /// Set index of the line in partition p.
  std::size_t index_of(std::uint64_t line, std::size_t p) const {
    return config_.mapping == Mapping::modulo ? static_cast<std::size_t>(line & (config_.num_sets - 1))
                                              : skewed_index(line, keys_[p], config_.num_sets);
  }

  bool contains(std::uint64_t address) const { return find(line_of(address)).has_value(); }

  AccessResult access(std::uint64_t address) {
    const std::uint64_t line = line_of(address);
    ++counters_.accesses;
    ++clock_;
    if (auto slot = find(line)) {
      slots_[*slot].stamp = clock_;
      ++counters_.hits;
      return {true, std::nullopt, false};
    }
    return indirect() ? miss_indirect(line) : miss_direct(line);
  }

  /// Throws std::logic_error if any structural invariant is broken.
  void check_invariants() const {
    std::unordered_set<std::uint64_t> seen;
    std::size_t valid = 0;
    for (std::size_t s = 0; s < slots_.size(); ++s) {
      const Slot& slot = slots_[s];
      if (!slot.valid) continue;
      ++valid;
      if (!seen.insert(slot.line).second) throw std::logic_error("line resident in two slots");
      const std::size_t p = s / (config_.num_sets * slots_per_set_);
      const std::size_t idx = (s / slots_per_set_) % config_.num_sets;
      if (index_of(slot.line, p) != idx) throw std::logic_error("line stored outside its mapped set");
      if (indirect()) {
        if (slot.data == kNone || data_owner_.at(slot.data) != s) throw std::logic_error("broken tag->data link");
      }
    }
    if (valid != valid_lines_) throw std::logic_error("valid line count out of sync");
    if (valid > config_.capacity_lines()) throw std::logic_error("more valid lines than capacity");
    if (indirect()) {
      std::size_t live = 0;
      for (std::size_t d = 0; d < data_owner_.size(); ++d) {
        if (data_owner_[d] == kNone) continue;
        ++live;
        const Slot& owner = slots_.at(data_owner_[d]);
        if (!owner.valid || owner.data != d) throw std::logic_error("broken data->tag link");
      }
      if (live != valid_lines_ || live + free_data_.size() != data_owner_.size()) {
        throw std::logic_error("data store accounting out of sync");
      }
    }
    if (counters_.hits > counters_.accesses || counters_.replacements > counters_.accesses - counters_.hits ||
        counters_.saes > counters_.replacements) {
      throw std::logic_error("counter invariant violated");
    }
  }

 private:
  static constexpr std::uint32_t kNone = std::numeric_limits<std::uint32_t>::max();

  struct Slot {
    std::uint64_t line = 0;
    std::uint64_t stamp = 0;
    std::uint32_t data = kNone;
    bool valid = false;
  };

  bool indirect() const { return config_.policy == Policy::global_random; }

  std::size_t slot_id(std::size_t p, std::size_t idx, std::size_t j) const {
    return (p * config_.num_sets + idx) * slots_per_set_ + j;
  }

  std::optional<std::size_t> find(std::uint64_t line) const {
    for (std::size_t p = 0; p < partitions_; ++p) {
      const std::size_t idx = index_of(line, p);
      for (std::size_t j = 0; j < slots_per_set_; ++j) {
        const std::size_t s = slot_id(p, idx, j);
        if (slots_[s].valid && slots_[s].line == line) return s;
      }
    }
    return std::nullopt;
  }

  AccessResult miss_direct(std::uint64_t line) {
    AccessResult result;
    candidates_.clear();
    states_.clear();
    for (std::size_t p = 0; p < partitions_; ++p) {
      const std::size_t s = slot_id(p, index_of(line, p), 0);
      candidates_.push_back(s);
      states_.push_back({slots_[s].valid, slots_[s].stamp});
    }

    std::optional<std::size_t> target;
    for (std::size_t i = 0; i < candidates_.size(); ++i) {
      if (!slots_[candidates_[i]].valid) {
        target = candidates_[i];
        break;
      }
    }
    if (!target) {
      target = candidates_[select_victim(config_.policy, std::span<const WayState>(states_), rng_)];
      result.evicted_address = slots_[*target].line << line_shift_;
      result.sae = valid_lines_ < config_.capacity_lines();
      ++counters_.replacements;
      if (result.sae) ++counters_.saes;
      --valid_lines_;
    }
    slots_[*target] = Slot{line, clock_, kNone, true};
    ++valid_lines_;
    return result;
  }

  AccessResult miss_indirect(std::uint64_t line) {
    AccessResult result;

    // Load-aware placement: the skew set with the most invalid tags wins;
    // ties are broken at random.
    std::size_t best_part = 0;
    std::size_t best_free = 0;
    std::size_t ties = 0;
    for (std::size_t p = 0; p < partitions_; ++p) {
      const std::size_t idx = index_of(line, p);
      std::size_t free = 0;
      for (std::size_t j = 0; j < slots_per_set_; ++j) free += slots_[slot_id(p, idx, j)].valid ? 0 : 1;
      if (free > best_free || p == 0) {
        best_part = p;
        best_free = free;
        ties = 1;
      } else if (free == best_free) {
        ++ties;
        std::uniform_int_distribution<std::size_t> coin(0, ties - 1);
        if (coin(rng_) == 0) best_part = p;
      }
    }

    const std::size_t idx = index_of(line, best_part);
    std::size_t target = 0;
    std::uint32_t data = kNone;
    if (best_free == 0) {
      // Every mapped tag is valid: forced tag eviction, the only SAE here.
      states_.assign(slots_per_set_, WayState{true, 0});
      for (std::size_t j = 0; j < slots_per_set_; ++j) states_[j].stamp = slots_[slot_id(best_part, idx, j)].stamp;
      target = slot_id(best_part, idx, select_victim(Policy::random, std::span<const WayState>(states_), rng_));
      result.evicted_address = slots_[target].line << line_shift_;
      result.sae = true;
      ++counters_.replacements;
      ++counters_.saes;
      data = slots_[target].data;
      --valid_lines_;
    } else {
      for (std::size_t j = 0; j < slots_per_set_; ++j) {
        if (!slots_[slot_id(best_part, idx, j)].valid) {
          target = slot_id(best_part, idx, j);
          break;
        }
      }
      if (!free_data_.empty()) {
        data = free_data_.back();
        free_data_.pop_back();
      } else {
        // Global random data eviction; frees a tag elsewhere, never an SAE.
        std::uniform_int_distribution<std::size_t> pick(0, data_owner_.size() - 1);
        data = static_cast<std::uint32_t>(pick(rng_));
        Slot& owner = slots_[data_owner_[data]];
        result.evicted_address = owner.line << line_shift_;
        owner = Slot{};
        ++counters_.replacements;
        --valid_lines_;
      }
    }
    slots_[target] = Slot{line, clock_, data, true};
    data_owner_[data] = static_cast<std::uint32_t>(target);
    ++valid_lines_;
    return result;
  }

  CacheConfig config_;
  unsigned line_shift_ = 6;
  std::size_t partitions_ = 1;
  std::size_t slots_per_set_ = 1;
  std::vector<std::uint64_t> keys_;
  std::vector<Slot> slots_;
  std::vector<std::uint32_t> data_owner_;
  std::vector<std::uint32_t> free_data_;
  std::size_t valid_lines_ = 0;
  std::uint64_t clock_ = 0;
  CacheCounters counters_;
  std::mt19937_64 rng_;
  std::vector<std::size_t> candidates_;
  std::vector<WayState> states_;
};

/// Builds an empty cache; throws ConfigError on an invalid configuration.
inline Cache new_cache(const CacheConfig& config) { return Cache(config); }

}  // namespace smcsec::cache
