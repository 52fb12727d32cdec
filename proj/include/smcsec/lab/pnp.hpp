#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

#include "smcsec/cache/cache.hpp"
#include "smcsec/lab/aes_victim.hpp"
#include "smcsec/lab/noise.hpp"
#include "smcsec/record.hpp"

namespace smcsec::lab {

/// Per-position nibble votes accumulated over prime+probe iterations.
class ScoreMatrix {
 public:
  void vote(std::size_t position, unsigned nibble) { ++scores_[position][nibble]; }
  std::uint64_t score(std::size_t position, unsigned nibble) const { return scores_[position][nibble]; }

  /// Highest-scoring nibble; ties resolve to the lowest nibble value.
  std::uint8_t best(std::size_t position) const {
    unsigned best = 0;
    for (unsigned n = 1; n < 16; ++n) {
      if (scores_[position][n] > scores_[position][best]) best = n;
    }
    return static_cast<std::uint8_t>(best);
  }

 private:
  std::array<std::array<std::uint64_t, 16>, 16> scores_{};
};

/// Attacker that knows the MODULO set mapping and owns one eviction set of
/// `ways` lines per cache set covering the victim's T-table.
class PnpAttacker {
 public:
  static constexpr std::uint64_t kAttackerBase = std::uint64_t{1} << 40;

  PnpAttacker(const cache::CacheConfig& config, const AesVictim& victim) {
    if (config.mapping != cache::Mapping::modulo) {
      throw std::invalid_argument("prime+probe attacker requires a MODULO-mapped cache");
    }
    if (victim.line_bytes != config.line_bytes) throw std::invalid_argument("victim and cache line sizes differ");
    if (victim.table_lines > config.num_sets) {
      throw std::invalid_argument("T-table spans more lines than the cache has sets");
    }
    eviction_sets_.resize(victim.table_lines);
    for (std::size_t l = 0; l < victim.table_lines; ++l) {
      const std::uint64_t set = (victim.line_address(l) / config.line_bytes) % config.num_sets;
      for (std::size_t j = 0; j < config.ways; ++j) {
        eviction_sets_[l].push_back(kAttackerBase + ((j + 1) * config.num_sets + set) * config.line_bytes);
      }
    }
  }

  std::size_t monitored_lines() const { return eviction_sets_.size(); }
  const std::vector<std::uint64_t>& eviction_set(std::size_t table_line) const { return eviction_sets_[table_line]; }

  void prime(cache::Cache& cache) const {
    for (const auto& set : eviction_sets_) {
      for (std::uint64_t a : set) cache.access(a);
    }
  }

  /// A monitored line counts as evicted when any of its probes misses.
  std::vector<bool> probe(cache::Cache& cache) const {
    std::vector<bool> evicted(eviction_sets_.size(), false);
    for (std::size_t l = 0; l < eviction_sets_.size(); ++l) {
      for (std::uint64_t a : eviction_sets_[l]) {
        if (!cache.access(a).hit) evicted[l] = true;
      }
    }
    return evicted;
  }

  ScoreMatrix& scores() { return scores_; }
  const ScoreMatrix& scores() const { return scores_; }

 private:
  std::vector<std::vector<std::uint64_t>> eviction_sets_;
  ScoreMatrix scores_;
};

struct IterationObservation {
  std::vector<bool> evicted;
  Block plaintext{};
  std::uint32_t noise_accesses = 0;
  bool injected = false;
  // Replacements during prime, noise and victim phases (probe excluded).
  std::uint64_t replacements = 0;
};

/// One prime, noise, encrypt, noise, inject, probe round; updates the
/// attacker's scores from the probe result.
template <typename Rng>
IterationObservation pnp_iteration(PnpAttacker& attacker, const AesVictim& victim, cache::Cache& cache,
                                   const NoiseModel& noise, Rng& rng) {
  IterationObservation obs;
  const std::uint64_t before = cache.counters().replacements;

  attacker.prime(cache);

  const std::uint32_t first = draw_phase_accesses(noise, rng);
  random_accesses(cache, first, rng);

  std::uniform_int_distribution<unsigned> byte(0, 255);
  for (auto& b : obs.plaintext) b = static_cast<std::uint8_t>(byte(rng));
  victim_first_round(victim, obs.plaintext, cache);

  const std::uint32_t second = draw_phase_accesses(noise, rng);
  random_accesses(cache, second, rng);
  obs.noise_accesses = first + second;

  if (noise.injected_fraction > 0.0) {
    std::bernoulli_distribution inject(noise.injected_fraction);
    if (inject(rng)) {
      obs.injected = true;
      random_accesses(cache, noise.injected_burst, rng);
    }
  }

  obs.replacements = cache.counters().replacements - before;
  obs.evicted = attacker.probe(cache);

  for (std::size_t line = 0; line < obs.evicted.size(); ++line) {
    if (!obs.evicted[line]) continue;
    for (std::size_t i = 0; i < 16; ++i) {
      for (unsigned n = 0; n < 16; ++n) {
        if (victim.candidate_line(obs.plaintext[i], n) == line) attacker.scores().vote(i, n);
      }
    }
  }
  return obs;
}

struct PnpRunConfig {
  cache::CacheConfig cache;
  NoiseModel noise;
  std::uint64_t iterations = 1;
  std::uint64_t seed = 0;

  void validate() const {
    cache.validate();
    noise.validate();
    if (iterations < 1) throw std::invalid_argument("iterations must be at least 1");
  }

  /// Everything except the seed.
  nlohmann::json to_json() const {
    return {{"kind", "pnp"},
            {"cache",
             {{"sets", cache.num_sets},
              {"ways", cache.ways},
              {"line_bytes", cache.line_bytes},
              {"policy", std::string(cache::to_string(cache.policy))},
              {"mapping", std::string(cache::to_string(cache.mapping))},
              {"extra_tag_ratio", cache.extra_tag_ratio}}},
            {"noise",
             {{"level", noise.level},
              {"injected_fraction", noise.injected_fraction},
              {"injected_burst", noise.injected_burst}}},
            {"iterations", iterations}};
  }
};

/// Runs X prime+probe iterations against a random key and reports whether
/// every upper key nibble was recovered.
inline ExecutionRecord run_pnp_attack(const PnpRunConfig& config) {
  config.validate();
  std::mt19937_64 rng(config.seed);

  cache::CacheConfig cache_config = config.cache;
  cache_config.seed = cache::mix64(config.seed ^ 0x5eedcac4eULL);
  cache::Cache cache(cache_config);

  Block key{};
  std::uniform_int_distribution<unsigned> byte(0, 255);
  for (auto& b : key) b = static_cast<std::uint8_t>(byte(rng));
  // Table sits in the low half of memory, clear of attacker lines.
  const AesVictim victim = AesVictim::make(key, std::uint64_t{1} << 30, config.cache.line_bytes);
  PnpAttacker attacker(config.cache, victim);

  std::uint64_t replacements = 0;
  std::uint64_t injected = 0;
  std::uint64_t noise_accesses = 0;
  for (std::uint64_t x = 0; x < config.iterations; ++x) {
    const auto obs = pnp_iteration(attacker, victim, cache, config.noise, rng);
    replacements += obs.replacements;
    injected += obs.injected ? 1 : 0;
    noise_accesses += obs.noise_accesses;
  }

  std::uint64_t correct = 0;
  for (std::size_t i = 0; i < 16; ++i) correct += attacker.scores().best(i) == victim.key_nibble(i) ? 1 : 0;

  MetricMap metrics{
      {"success", correct == 16 ? 1.0 : 0.0},
      {"recovered_nibbles_correct", static_cast<double>(correct)},
      {"replacements", static_cast<double>(replacements)},
      {"realized_injection_fraction", static_cast<double>(injected) / static_cast<double>(config.iterations)},
      {"injected_fraction", config.noise.injected_fraction},
      {"noise_level", static_cast<double>(config.noise.level)},
      {"noise_accesses", static_cast<double>(noise_accesses)},
      {"iterations", static_cast<double>(config.iterations)},
  };
  return record_metrics(std::move(metrics), {"success", "replacements", "realized_injection_fraction"}, config.seed,
                        config.to_json());
}

}  // namespace smcsec::lab
