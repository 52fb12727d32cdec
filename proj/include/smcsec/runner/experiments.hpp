#pragma once

#include <algorithm>
#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

#include "smcsec/cache/sae.hpp"
#include "smcsec/lab/pnp.hpp"
#include "smcsec/lab/rollback.hpp"
#include "smcsec/record.hpp"
#include "smcsec/runner/config.hpp"

namespace smcsec::runner {

enum class Family { pnp, sae, rollback };

/// One parameter setting of an experiment; n_samples seeds run per point.
struct ExperimentPoint {
  std::string label;
  std::string series;
  double x = 0.0;
  Family family = Family::pnp;
  lab::PnpRunConfig pnp;
  cache::CacheConfig sae_cache;
  std::size_t sae_targets = 0;
  std::size_t sae_attacker_accesses = 0;
  std::vector<std::size_t> sae_groups;
  lab::RollbackModel rollback;
};

namespace detail {

inline std::string format_value(double v) {
  std::ostringstream out;
  out << v;
  return out.str();
}

inline ExperimentPoint pnp_point(const ExperimentConfig& c, std::string label, std::string series, double x) {
  ExperimentPoint p;
  p.label = std::move(label);
  p.series = std::move(series);
  p.x = x;
  p.family = Family::pnp;
  p.pnp.cache = c.cache;
  p.pnp.noise = c.noise;
  p.pnp.iterations = c.iterations;
  return p;
}

inline ExperimentPoint rollback_point(const ExperimentConfig& c, double probability) {
  ExperimentPoint p;
  p.label = "p=" + format_value(probability);
  p.x = probability;
  p.family = Family::rollback;
  p.rollback = c.rollback;
  p.rollback.obfuscation_probability = probability;
  return p;
}

inline ExperimentPoint sae_point(const ExperimentConfig& c, const std::string& design) {
  ExperimentPoint p;
  p.label = "design=" + design;
  p.series = design;
  p.family = Family::sae;
  p.sae_cache = c.cache;
  p.sae_cache.mapping = cache::Mapping::skewed;
  if (design == "GLOBAL_RANDOM") {
    p.sae_cache.policy = cache::Policy::global_random;
    p.x = 1.0;
  } else if (design == "SKEWED") {
    if (p.sae_cache.policy == cache::Policy::global_random) p.sae_cache.policy = cache::Policy::random;
    p.x = 0.0;
  } else {
    throw ConfigError("unknown SAE design '" + design + "' (expected SKEWED or GLOBAL_RANDOM)");
  }
  p.sae_groups = c.target_groups;
  std::sort(p.sae_groups.begin(), p.sae_groups.end());
  p.sae_targets = p.sae_groups.empty() ? 0 : p.sae_groups.back();
  p.sae_attacker_accesses = c.attacker_accesses;
  return p;
}

}  // namespace detail

/// Expands a configuration into its experiment points, in a fixed order.
inline std::vector<ExperimentPoint> experiment_points(const ExperimentConfig& c) {
  std::vector<ExperimentPoint> points;
  const std::string& id = c.id;
  if (id == "exp1_1a" || id == "exp1_1b") {
    for (int level : c.noise_levels) {
      auto p = detail::pnp_point(c, "level=" + std::to_string(level), "", level);
      p.pnp.noise.level = level;
      points.push_back(p);
    }
  } else if (id == "exp1_2") {
    for (double f : c.injected_fractions) {
      auto p = detail::pnp_point(c, "f=" + detail::format_value(f), "", f);
      p.pnp.noise.injected_fraction = f;
      points.push_back(p);
    }
  } else if (id == "exp1_3") {
    for (const auto& policy : c.policies) {
      for (std::uint64_t x : c.iteration_list) {
        auto p = detail::pnp_point(c, policy + ",X=" + std::to_string(x), policy, static_cast<double>(x));
        p.pnp.cache.policy = cache::parse_policy(policy);
        p.pnp.iterations = x;
        points.push_back(p);
      }
    }
  } else if (id == "exp2") {
    for (const auto& design : c.designs) points.push_back(detail::sae_point(c, design));
  } else if (id == "exp3a" || id == "exp3b") {
    for (double prob : c.obfuscation_probabilities) points.push_back(detail::rollback_point(c, prob));
  } else if (id == "custom") {
    for (double v : c.custom.values) {
      const std::string label = c.custom.sweep + "=" + detail::format_value(v);
      ExperimentPoint p;
      if (c.custom.family == "pnp") {
        p = detail::pnp_point(c, label, "custom", v);
        if (c.custom.sweep == "noise.level") {
          p.pnp.noise.level = static_cast<int>(v);
        } else if (c.custom.sweep == "noise.injected_fraction") {
          p.pnp.noise.injected_fraction = v;
        } else if (c.custom.sweep == "attack.iterations") {
          p.pnp.iterations = static_cast<std::uint64_t>(v);
        } else {
          throw ConfigError("custom pnp sweep must be noise.level, noise.injected_fraction or attack.iterations");
        }
      } else if (c.custom.family == "rollback") {
        if (c.custom.sweep != "rollback.probability") {
          throw ConfigError("custom rollback sweep must be rollback.probability");
        }
        p = detail::rollback_point(c, v);
      } else {
        const bool indirect = c.cache.policy == cache::Policy::global_random;
        p = detail::sae_point(c, indirect ? "GLOBAL_RANDOM" : "SKEWED");
        if (c.custom.sweep == "sae.attacker_accesses") {
          p.sae_attacker_accesses = static_cast<std::size_t>(v);
        } else if (c.custom.sweep == "cache.extra_tag_ratio") {
          p.sae_cache.extra_tag_ratio = v;
        } else {
          throw ConfigError("custom sae sweep must be sae.attacker_accesses or cache.extra_tag_ratio");
        }
      }
      p.label = label;
      p.series = "custom";
      p.x = v;
      points.push_back(p);
    }
  }
  return points;
}

inline std::string sae_group_metric(std::size_t group) { return "sae_count_g" + std::to_string(group); }

/// Run configuration of a point without its seed; its digest is what every
/// record of the point must carry.
inline nlohmann::json point_run_json(const ExperimentPoint& p) {
  switch (p.family) {
    case Family::pnp: return p.pnp.to_json();
    case Family::rollback: return p.rollback.to_json();
    case Family::sae:
      return {{"kind", "sae"},
              {"cache",
               {{"sets", p.sae_cache.num_sets},
                {"ways", p.sae_cache.ways},
                {"line_bytes", p.sae_cache.line_bytes},
                {"policy", std::string(cache::to_string(p.sae_cache.policy))},
                {"extra_tag_ratio", p.sae_cache.extra_tag_ratio},
                {"seed", p.sae_cache.seed}}},
              {"targets", p.sae_targets},
              {"groups", p.sae_groups},
              {"attacker_accesses", p.sae_attacker_accesses}};
  }
  return {};
}

inline std::string point_digest(const ExperimentPoint& p) { return config_digest(point_run_json(p)); }

inline ExecutionRecord run_point(const ExperimentPoint& p, std::uint64_t seed) {
  switch (p.family) {
    case Family::pnp: {
      lab::PnpRunConfig run = p.pnp;
      run.seed = seed;
      return lab::run_pnp_attack(run);
    }
    case Family::rollback: return lab::run_rollback_attack(p.rollback, seed);
    case Family::sae: {
      const auto outcome = cache::run_sae_experiment(p.sae_cache, p.sae_targets, p.sae_attacker_accesses, seed);
      MetricMap metrics{
          {"sae_count", static_cast<double>(outcome.sae_count_on_targets)},
          {"n_targets", static_cast<double>(p.sae_targets)},
          {"design", p.x},
          {"replacements", static_cast<double>(outcome.counters.replacements)},
          {"saes_total", static_cast<double>(outcome.counters.saes)},
      };
      for (std::size_t g : p.sae_groups) metrics[sae_group_metric(g)] = static_cast<double>(outcome.count_in_group(g));
      return record_metrics(std::move(metrics), {"sae_count"}, seed, point_run_json(p));
    }
  }
  throw std::logic_error("run_point: unknown family");
}

}  // namespace smcsec::runner
