#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <stdexcept>

#include "smcsec/record.hpp"

namespace smcsec::lab {

/// Mis-speculation cleanup latency channel with probabilistic padding.
/// A 1 bit costs `delta` extra cycles to roll back; with probability
/// `obfuscation_probability` every cleanup is padded to base + delta.
struct RollbackModel {
  double base_latency = 100.0;
  double delta = 32.0;
  double obfuscation_probability = 0.0;
  std::optional<double> classifier_threshold;  // defaults to base + delta / 2
  std::uint32_t n_bits = 1000;

  double threshold() const { return classifier_threshold.value_or(base_latency + delta / 2.0); }

  void validate() const {
    if (!(delta > 0.0)) throw std::invalid_argument("rollback delta must be positive");
    if (!(obfuscation_probability >= 0.0 && obfuscation_probability <= 1.0)) {
      throw std::invalid_argument("obfuscation probability must lie in [0, 1]");
    }
    if (n_bits == 0) throw std::invalid_argument("n_bits must be positive");
  }

  nlohmann::json to_json() const {
    return {{"kind", "rollback"},
            {"base_latency", base_latency},
            {"delta", delta},
            {"obfuscation_probability", obfuscation_probability},
            {"threshold", threshold()},
            {"n_bits", n_bits}};
  }
};

/// Attacker accuracy on a fresh uniformly random secret of n_bits bits.
inline ExecutionRecord run_rollback_attack(const RollbackModel& model, std::uint64_t seed) {
  model.validate();
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution secret_bit(0.5);
  std::bernoulli_distribution obfuscate(model.obfuscation_probability);

  const double threshold = model.threshold();
  std::uint32_t correct = 0;
  for (std::uint32_t i = 0; i < model.n_bits; ++i) {
    const bool bit = secret_bit(rng);
    double latency = bit ? model.base_latency + model.delta : model.base_latency;
    if (obfuscate(rng)) latency = model.base_latency + model.delta;
    const bool guess = latency > threshold;
    correct += guess == bit ? 1 : 0;
  }

  MetricMap metrics{
      {"accuracy", static_cast<double>(correct) / static_cast<double>(model.n_bits)},
      {"obfuscation_probability", model.obfuscation_probability},
      {"n_bits", static_cast<double>(model.n_bits)},
  };
  return record_metrics(std::move(metrics), {"accuracy", "obfuscation_probability"}, seed, model.to_json());
}

}  // namespace smcsec::lab
