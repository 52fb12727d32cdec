#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "smcsec/cache/config.hpp"

namespace smcsec::cache {

/// splitmix64 finalizer. Pinned: changing it changes every skewed layout.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t skew_key(std::uint64_t seed, std::size_t partition) {
  return mix64(seed ^ (0x9e3779b97f4a7c15ULL * (static_cast<std::uint64_t>(partition) + 1)));
}

constexpr std::size_t skewed_index(std::uint64_t line, std::uint64_t key, std::size_t num_sets) {
  return static_cast<std::size_t>(mix64(line ^ key) & (num_sets - 1));
}

/// Number of independently indexed tag partitions: one per way for
/// MODULO/SKEWED designs, two skews for the indirection design.
inline std::size_t partition_count(const CacheConfig& config) {
  return config.policy == Policy::global_random ? 2 : config.ways;
}

/// Set index of `address` in each partition.
inline std::vector<std::size_t> map_indices(const CacheConfig& config, std::uint64_t address) {
  const std::uint64_t line = address >> config.line_shift();
  const std::size_t parts = partition_count(config);
  std::vector<std::size_t> out(parts);
  for (std::size_t p = 0; p < parts; ++p) {
    out[p] = config.mapping == Mapping::modulo ? static_cast<std::size_t>(line & (config.num_sets - 1))
                                               : skewed_index(line, skew_key(config.seed, p), config.num_sets);
  }
  return out;
}

}  // namespace smcsec::cache
