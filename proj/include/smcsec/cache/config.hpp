#pragma once

#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace smcsec::cache {

enum class Policy { lru, nmru, random, global_random };
enum class Mapping { modulo, skewed };

/// Thrown for cache geometries or policy/mapping combinations that cannot
/// be simulated.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline std::string_view to_string(Policy p) {
  switch (p) {
    case Policy::lru: return "LRU";
    case Policy::nmru: return "NMRU";
    case Policy::random: return "RANDOM";
    case Policy::global_random: return "GLOBAL_RANDOM";
  }
  return "?";
}

inline std::string_view to_string(Mapping m) { return m == Mapping::modulo ? "MODULO" : "SKEWED"; }

inline Policy parse_policy(std::string_view s) {
  if (s == "LRU" || s == "lru") return Policy::lru;
  if (s == "NMRU" || s == "nmru") return Policy::nmru;
  if (s == "RANDOM" || s == "random") return Policy::random;
  if (s == "GLOBAL_RANDOM" || s == "global_random") return Policy::global_random;
  throw ConfigError("unknown replacement policy '" + std::string(s) + "'");
}

inline Mapping parse_mapping(std::string_view s) {
  if (s == "MODULO" || s == "modulo") return Mapping::modulo;
  if (s == "SKEWED" || s == "skewed") return Mapping::skewed;
  throw ConfigError("unknown mapping '" + std::string(s) + "'");
}

struct CacheConfig {
  std::size_t num_sets = 64;
  std::size_t ways = 8;
  std::size_t line_bytes = 64;
  Policy policy = Policy::lru;
  Mapping mapping = Mapping::modulo;
  // Tag over-provisioning of the indirection (GLOBAL_RANDOM) design:
  // each skew set holds ceil(ways / 2 * (1 + extra_tag_ratio)) tags.
  double extra_tag_ratio = 0.0;
  std::uint64_t seed = 0;

  std::size_t capacity_lines() const { return num_sets * ways; }
  std::size_t capacity_bytes() const { return capacity_lines() * line_bytes; }
  unsigned line_shift() const { return static_cast<unsigned>(std::countr_zero(line_bytes)); }

  void validate() const {
    if (num_sets == 0 || !std::has_single_bit(num_sets)) {
      throw ConfigError("num_sets must be a power of two, got " + std::to_string(num_sets));
    }
    if (ways == 0) throw ConfigError("ways must be at least 1");
    if (line_bytes == 0 || !std::has_single_bit(line_bytes)) {
      throw ConfigError("line_bytes must be a power of two, got " + std::to_string(line_bytes));
    }
    if (policy == Policy::nmru && ways < 2) throw ConfigError("NMRU replacement requires at least 2 ways");
    if (policy == Policy::global_random) {
      if (mapping != Mapping::skewed) throw ConfigError("GLOBAL_RANDOM replacement requires SKEWED mapping");
      if (ways < 2) throw ConfigError("GLOBAL_RANDOM replacement requires at least 2 ways");
    }
    if (!(std::isfinite(extra_tag_ratio) && extra_tag_ratio >= 0.0)) {
      throw ConfigError("extra_tag_ratio must be a non-negative finite number");
    }
  }
};

}  // namespace smcsec::cache
