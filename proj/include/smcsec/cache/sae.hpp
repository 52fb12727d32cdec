#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "smcsec/cache/cache.hpp"

namespace smcsec::cache {

inline constexpr std::uint64_t kLineAddressMask = (std::uint64_t{1} << 48) - 1;

struct SaeOutcome {
  std::uint64_t sae_count_on_targets = 0;
  // Per target (in install order): evicted by an SAE during the attack phase.
  std::vector<bool> target_sae;
  CacheCounters counters;

  /// SAEs on the first `group` targets.
  std::uint64_t count_in_group(std::size_t group) const {
    std::uint64_t n = 0;
    for (std::size_t i = 0; i < group && i < target_sae.size(); ++i) n += target_sae[i] ? 1 : 0;
    return n;
  }
};

/// Installs `targets`, then replays `attacker` accesses and counts the
/// SAE evictions that hit a still-resident target line.
inline SaeOutcome count_target_saes(Cache& cache, std::span<const std::uint64_t> targets,
                                    std::span<const std::uint64_t> attacker) {
  std::unordered_map<std::uint64_t, std::size_t> target_index;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    cache.access(targets[i]);
    target_index.emplace(cache.line_of(targets[i]), i);
  }

  SaeOutcome out;
  out.target_sae.assign(targets.size(), false);
  for (std::uint64_t address : attacker) {
    const AccessResult r = cache.access(address);
    if (!r.sae || !r.evicted_address) continue;
    auto it = target_index.find(cache.line_of(*r.evicted_address));
    if (it == target_index.end() || out.target_sae[it->second]) continue;
    out.target_sae[it->second] = true;
    ++out.sae_count_on_targets;
  }
  out.counters = cache.counters();
  return out;
}

/// Random-address SAE experiment: n_targets distinct victim lines, then
/// n_attacker_accesses distinct attacker lines, all drawn uniformly from a
/// 48-bit line address space. The seed also keys the skew hash.
inline SaeOutcome run_sae_experiment(const CacheConfig& config, std::size_t n_targets,
                                     std::size_t n_attacker_accesses, std::uint64_t seed) {
  config.validate();
  if (n_targets > config.capacity_lines()) {
    throw std::invalid_argument("n_targets (" + std::to_string(n_targets) + ") exceeds cache capacity of " +
                                std::to_string(config.capacity_lines()) + " lines");
  }
  CacheConfig run_config = config;
  run_config.seed = mix64(config.seed ^ mix64(seed));
  Cache cache(run_config);

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::uint64_t> draw(0, kLineAddressMask);
  std::unordered_set<std::uint64_t> used;
  const auto fresh_lines = [&](std::size_t n) {
    std::vector<std::uint64_t> out;
    out.reserve(n);
    while (out.size() < n) {
      const std::uint64_t line = draw(rng);
      if (used.insert(line).second) out.push_back(line << run_config.line_shift());
    }
    return out;
  };
  const auto targets = fresh_lines(n_targets);
  const auto attacker = fresh_lines(n_attacker_accesses);
  return count_target_saes(cache, targets, attacker);
}

}  // namespace smcsec::cache
