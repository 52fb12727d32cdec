#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>

#include "smcsec/cache/config.hpp"

namespace smcsec::cache {

/// Replacement view of one candidate way: occupancy and last-use stamp.
/// Stamps are unique among valid candidates; larger means more recent.
struct WayState {
  bool valid = false;
  std::uint64_t stamp = 0;
};

/// Picks the way to evict from a full candidate set. LRU takes the oldest
/// stamp, NMRU draws uniformly among all ways except the most recent, and
/// RANDOM / GLOBAL_RANDOM draw uniformly among all ways.
template <typename Rng>
std::size_t select_victim(Policy policy, std::span<const WayState> ways, Rng& rng) {
  if (ways.empty()) throw std::logic_error("select_victim: empty candidate set");
  for (const auto& w : ways) {
    if (!w.valid) throw std::logic_error("select_victim: candidate set is not full");
  }

  switch (policy) {
    case Policy::lru: {
      std::size_t victim = 0;
      for (std::size_t i = 1; i < ways.size(); ++i) {
        if (ways[i].stamp < ways[victim].stamp) victim = i;
      }
      return victim;
    }
    case Policy::nmru: {
      if (ways.size() < 2) throw std::logic_error("select_victim: NMRU needs at least two ways");
      std::size_t mru = 0;
      for (std::size_t i = 1; i < ways.size(); ++i) {
        if (ways[i].stamp > ways[mru].stamp) mru = i;
      }
      std::uniform_int_distribution<std::size_t> pick(0, ways.size() - 2);
      const std::size_t r = pick(rng);
      return r < mru ? r : r + 1;
    }
    case Policy::random:
    case Policy::global_random: {
      std::uniform_int_distribution<std::size_t> pick(0, ways.size() - 1);
      return pick(rng);
    }
  }
  throw std::logic_error("select_victim: unknown policy");
}

}  // namespace smcsec::cache
