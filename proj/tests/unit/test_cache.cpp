#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <vector>

#include "smcsec/cache/cache.hpp"
#include "smcsec/cache/sae.hpp"

using namespace smcsec::cache;

namespace {

CacheConfig make(std::size_t sets, std::size_t ways, Policy policy, Mapping mapping, double ratio = 0.0,
                 std::uint64_t seed = 1) {
  return CacheConfig{sets, ways, 64, policy, mapping, ratio, seed};
}

// Reference LRU: per set, a list of (line, last-use time); evict the oldest.
class ReferenceLru {
 public:
  ReferenceLru(std::size_t sets, std::size_t ways) : sets_(sets), ways_(ways), lines_(sets) {}

  bool access(std::uint64_t address) {
    const std::uint64_t line = address / 64;
    auto& set = lines_[line % sets_];
    ++now_;
    for (auto& [l, t] : set) {
      if (l == line) {
        t = now_;
        return true;
      }
    }
    if (set.size() == ways_) {
      auto oldest = std::min_element(set.begin(), set.end(), [](auto& a, auto& b) { return a.second < b.second; });
      set.erase(oldest);
    }
    set.emplace_back(line, now_);
    return false;
  }

 private:
  std::size_t sets_;
  std::size_t ways_;
  std::vector<std::vector<std::pair<std::uint64_t, std::uint64_t>>> lines_;
  std::uint64_t now_ = 0;
};

std::vector<CacheConfig> all_designs() {
  return {make(16, 4, Policy::lru, Mapping::modulo),      make(16, 4, Policy::nmru, Mapping::modulo),
          make(16, 4, Policy::random, Mapping::modulo),   make(16, 4, Policy::lru, Mapping::skewed),
          make(16, 4, Policy::random, Mapping::skewed),   make(16, 8, Policy::global_random, Mapping::skewed, 0.75),
          make(16, 8, Policy::global_random, Mapping::skewed, 0.0)};
}

}  // namespace

TEST(CacheConfig, CapacityAndErrors) {
  const auto c = make(64, 8, Policy::lru, Mapping::modulo);
  EXPECT_EQ(c.capacity_bytes(), 32u * 1024u);
  EXPECT_NO_THROW(new_cache(c));
  EXPECT_THROW(new_cache(make(64, 1, Policy::nmru, Mapping::modulo)), ConfigError);
  EXPECT_THROW(new_cache(make(64, 8, Policy::global_random, Mapping::modulo)), ConfigError);
  EXPECT_THROW(new_cache(make(48, 8, Policy::lru, Mapping::modulo)), ConfigError);
  EXPECT_THROW(new_cache(CacheConfig{64, 8, 48, Policy::lru, Mapping::modulo, 0.0, 0}), ConfigError);
  EXPECT_THROW(new_cache(make(64, 0, Policy::lru, Mapping::modulo)), ConfigError);
  EXPECT_THROW(new_cache(make(64, 8, Policy::global_random, Mapping::skewed, -0.5)), ConfigError);
  EXPECT_EQ(parse_policy("NMRU"), Policy::nmru);
  EXPECT_EQ(parse_mapping("SKEWED"), Mapping::skewed);
  EXPECT_THROW(parse_policy("FIFO"), ConfigError);
}

TEST(CacheConfig, NewCacheIsEmpty) {
  const Cache cache(make(64, 8, Policy::lru, Mapping::modulo));
  EXPECT_EQ(cache.valid_lines(), 0u);
  EXPECT_EQ(cache.counters(), CacheCounters{});
}

TEST(Mapping, ModuloIndex) {
  const auto c = make(64, 8, Policy::lru, Mapping::modulo);
  const auto idx = map_indices(c, 0x1040);
  ASSERT_EQ(idx.size(), 8u);
  for (auto i : idx) EXPECT_EQ(i, 1u);
}

TEST(Mapping, SkewedCollisionRate) {
  const std::size_t sets = 64;
  const auto k0 = skew_key(42, 0);
  const auto k1 = skew_key(42, 1);
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<std::uint64_t> line(0, kLineAddressMask);
  int pairs = 0;
  int both = 0;
  while (pairs < 20000) {
    const auto a = line(rng);
    const auto b = line(rng);
    if (a == b || skewed_index(a, k0, sets) != skewed_index(b, k0, sets)) continue;
    ++pairs;
    both += skewed_index(a, k1, sets) == skewed_index(b, k1, sets) ? 1 : 0;
  }
  const double p = 1.0 / sets;
  const double sigma = std::sqrt(p * (1 - p) / pairs);
  EXPECT_NEAR(static_cast<double>(both) / pairs, p, 3 * sigma);
}

TEST(Mapping, SeedSensitivity) {
  auto c1 = make(64, 8, Policy::random, Mapping::skewed, 0.0, 1);
  auto c2 = make(64, 8, Policy::random, Mapping::skewed, 0.0, 2);
  std::mt19937_64 rng(9);
  std::uniform_int_distribution<std::uint64_t> addr(0, kLineAddressMask);
  int differ = 0;
  for (int i = 0; i < 10000; ++i) {
    const auto a = addr(rng) << 6;
    differ += map_indices(c1, a) != map_indices(c2, a) ? 1 : 0;
  }
  EXPECT_GE(differ, 9900);
}

TEST(Mapping, GlobalRandomUsesTwoSkews) {
  const auto c = make(16, 8, Policy::global_random, Mapping::skewed, 0.75);
  EXPECT_EQ(map_indices(c, 0x12340).size(), 2u);
  EXPECT_EQ(Cache(c).slots_per_set(), 7u);
}

TEST(Replacement, LruPicksOldest) {
  std::mt19937_64 rng(1);
  const std::vector<WayState> ways{{true, 5}, {true, 2}, {true, 9}};
  EXPECT_EQ(select_victim(Policy::lru, std::span<const WayState>(ways), rng), 1u);

  // 2-way set: A then B, C evicts A.
  Cache cache(make(4, 2, Policy::lru, Mapping::modulo));
  cache.access(0);
  cache.access(4 * 64);
  const auto r = cache.access(8 * 64);
  EXPECT_FALSE(r.hit);
  ASSERT_TRUE(r.evicted_address.has_value());
  EXPECT_EQ(*r.evicted_address, 0u);
  EXPECT_TRUE(r.sae);
}

TEST(Replacement, NonFullSetIsContractViolation) {
  std::mt19937_64 rng(1);
  const std::vector<WayState> ways{{true, 5}, {false, 0}};
  EXPECT_THROW(select_victim(Policy::lru, std::span<const WayState>(ways), rng), std::logic_error);
}

TEST(Replacement, NmruFrequencies) {
  std::mt19937_64 rng(3);
  std::vector<WayState> ways;
  for (std::uint64_t w = 0; w < 8; ++w) ways.push_back({true, 10 + (w * 5) % 8});
  const std::size_t mru = static_cast<std::size_t>(
      std::max_element(ways.begin(), ways.end(), [](auto& a, auto& b) { return a.stamp < b.stamp; }) - ways.begin());
  std::vector<int> counts(8, 0);
  const int trials = 10000;
  for (int t = 0; t < trials; ++t) ++counts[select_victim(Policy::nmru, std::span<const WayState>(ways), rng)];
  EXPECT_EQ(counts[mru], 0);
  const double p = 1.0 / 7;
  const double sigma = std::sqrt(p * (1 - p) / trials);
  for (std::size_t w = 0; w < 8; ++w) {
    if (w != mru) {
      EXPECT_NEAR(counts[w] / double(trials), p, 3 * sigma) << w;
    }
  }
}

TEST(Replacement, RandomFrequencies) {
  std::mt19937_64 rng(4);
  const std::vector<WayState> ways{{true, 1}, {true, 2}, {true, 3}, {true, 4}};
  std::vector<int> counts(4, 0);
  const int trials = 10000;
  for (int t = 0; t < trials; ++t) ++counts[select_victim(Policy::random, std::span<const WayState>(ways), rng)];
  const double sigma = std::sqrt(0.25 * 0.75 / trials);
  for (int c : counts) EXPECT_NEAR(c / double(trials), 0.25, 3 * sigma);
}

TEST(Cache, LruMatchesReferenceModel) {
  for (std::size_t ways : {2u, 4u}) {
    for (std::uint64_t trace = 0; trace < 100; ++trace) {
      Cache cache(make(8, ways, Policy::lru, Mapping::modulo, 0.0, trace));
      ReferenceLru ref(8, ways);
      std::mt19937_64 rng(trace);
      std::uniform_int_distribution<std::uint64_t> line(0, 8 * ways * 3);
      for (int i = 0; i < 1000; ++i) {
        const std::uint64_t a = line(rng) * 64 + 7;
        ASSERT_EQ(cache.access(a).hit, ref.access(a)) << "ways=" << ways << " trace=" << trace << " i=" << i;
      }
    }
  }
}

TEST(Cache, NmruNeverEvictsMru) {
  const std::size_t sets = 16;
  Cache cache(make(sets, 4, Policy::nmru, Mapping::modulo, 0.0, 77));
  std::vector<std::uint64_t> mru(sets, ~0ull);
  std::mt19937_64 rng(77);
  std::uniform_int_distribution<std::uint64_t> line(0, 4096);
  std::uint64_t evictions = 0;
  while (evictions < 100000) {
    const std::uint64_t l = line(rng);
    const auto r = cache.access(l * 64);
    if (r.evicted_address) {
      ++evictions;
      ASSERT_NE(*r.evicted_address / 64, mru[l % sets]);
    }
    mru[l % sets] = l;
  }
}

TEST(Cache, HitChangesOnlyHitCounters) {
  Cache cache(make(64, 8, Policy::lru, Mapping::modulo));
  cache.access(0x1000);
  const auto before = cache.counters();
  const auto r = cache.access(0x1000);
  EXPECT_TRUE(r.hit);
  EXPECT_FALSE(r.evicted_address.has_value());
  EXPECT_EQ(cache.counters().accesses, before.accesses + 1);
  EXPECT_EQ(cache.counters().hits, before.hits + 1);
  EXPECT_EQ(cache.counters().replacements, before.replacements);
  EXPECT_EQ(cache.counters().saes, before.saes);
}

TEST(Cache, InclusionInvariantsAndDeterminism) {
  for (const auto& config : all_designs()) {
    Cache a(config);
    Cache b(config);
    std::mt19937_64 rng(config.ways * 31 + static_cast<int>(config.policy));
    std::uniform_int_distribution<std::uint64_t> line(0, 1000);
    CacheCounters prev;
    for (int i = 0; i < 5000; ++i) {
      const std::uint64_t addr = line(rng) * 64;
      const auto ra = a.access(addr);
      ASSERT_EQ(ra, b.access(addr));
      if (ra.sae) {
        ASSERT_TRUE(ra.evicted_address.has_value());
      }
      if (ra.hit) {
        ASSERT_FALSE(ra.evicted_address.has_value());
      }
      ASSERT_TRUE(a.access(addr).hit) << to_string(config.policy);
      b.access(addr);
      const auto& c = a.counters();
      ASSERT_GE(c.accesses, prev.accesses);
      ASSERT_GE(c.replacements, prev.replacements);
      ASSERT_GE(c.saes, prev.saes);
      prev = c;
      if (i % 500 == 0) {
        ASSERT_NO_THROW(a.check_invariants());
      }
    }
    EXPECT_EQ(a.counters(), b.counters());
    EXPECT_NO_THROW(a.check_invariants());
  }
}

TEST(Cache, GlobalRandomHasNoSaeUnderRandomLoad) {
  int clean = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    Cache cache(make(16, 8, Policy::global_random, Mapping::skewed, 0.75, seed));
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::uint64_t> line(0, kLineAddressMask);
    for (std::size_t i = 0; i < 2 * 16 * 8; ++i) cache.access(line(rng) << 6);
    EXPECT_GT(cache.counters().replacements, 0u);
    clean += cache.counters().saes == 0 ? 1 : 0;
  }
  EXPECT_GE(clean, 19);
}

TEST(Sae, NoAttackerNoSae) {
  const auto out = run_sae_experiment(make(16, 8, Policy::random, Mapping::skewed), 32, 0, 3);
  EXPECT_EQ(out.sae_count_on_targets, 0u);
  EXPECT_THROW(run_sae_experiment(make(16, 8, Policy::random, Mapping::skewed), 129, 0, 3), std::invalid_argument);
}

TEST(Sae, FullSetConflict) {
  Cache cache(make(64, 8, Policy::lru, Mapping::modulo));
  std::vector<std::uint64_t> targets;
  std::vector<std::uint64_t> attacker;
  for (std::uint64_t k = 0; k < 8; ++k) {
    targets.push_back((k * 64 + 5) * 64);
    attacker.push_back(((k + 8) * 64 + 5) * 64);
  }
  const auto out = count_target_saes(cache, targets, attacker);
  EXPECT_EQ(out.sae_count_on_targets, 8u);
  EXPECT_EQ(out.count_in_group(4), 4u);
}

TEST(Sae, SkewedAgainstGlobalRandom) {
  std::uint64_t skewed = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    skewed += run_sae_experiment(make(16, 8, Policy::random, Mapping::skewed), 32, 256, seed).sae_count_on_targets;
    const auto g = run_sae_experiment(make(16, 8, Policy::global_random, Mapping::skewed, 0.75), 32, 256, seed);
    EXPECT_EQ(g.sae_count_on_targets, 0u) << seed;
    EXPECT_EQ(g.counters.saes, 0u) << seed;
  }
  EXPECT_GT(skewed, 0u);
}

TEST(Sae, DeterministicGivenSeed) {
  const auto c = make(16, 8, Policy::random, Mapping::skewed);
  const auto a = run_sae_experiment(c, 24, 128, 11);
  const auto b = run_sae_experiment(c, 24, 128, 11);
  EXPECT_EQ(a.target_sae, b.target_sae);
  EXPECT_EQ(a.counters, b.counters);
}
