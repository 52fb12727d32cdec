#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

#include "smcsec/cache/cache.hpp"
#include "smcsec/cache/sae.hpp"

namespace smcsec::lab {

/// Background noise plus optional victim-injected bursts.
///
/// Natural noise is a Poisson number of uniformly random line accesses per
/// phase whose mean doubles per level: 1, 2, 4, 8, 16 for levels 1..5.
/// Level 0 is the noise-free environment.
struct NoiseModel {
  int level = 1;
  double injected_fraction = 0.0;
  std::uint32_t injected_burst = 0;

  static constexpr std::array<double, 6> kMeanPerPhase{0.0, 1.0, 2.0, 4.0, 8.0, 16.0};

  double accesses_per_phase_mean() const { return kMeanPerPhase.at(static_cast<std::size_t>(level)); }

  void validate() const {
    if (level < 0 || level > 5) throw std::invalid_argument("noise level must lie in 0..5, got " + std::to_string(level));
    if (!(injected_fraction >= 0.0 && injected_fraction <= 1.0)) {
      throw std::invalid_argument("injected_fraction must lie in [0, 1]");
    }
  }
};

/// Draws the access count of one noise phase.
template <typename Rng>
std::uint32_t draw_phase_accesses(const NoiseModel& noise, Rng& rng) {
  const double mean = noise.accesses_per_phase_mean();
  if (mean <= 0.0) return 0;
  std::poisson_distribution<std::uint32_t> poisson(mean);
  return poisson(rng);
}

/// Performs `count` accesses at uniformly random 48-bit line addresses.
template <typename Rng>
void random_accesses(cache::Cache& cache, std::uint32_t count, Rng& rng) {
  std::uniform_int_distribution<std::uint64_t> draw(0, cache::kLineAddressMask);
  const unsigned shift = cache.config().line_shift();
  for (std::uint32_t i = 0; i < count; ++i) cache.access(draw(rng) << shift);
}

}  // namespace smcsec::lab
