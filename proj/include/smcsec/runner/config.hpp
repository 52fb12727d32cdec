#pragma once

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "smcsec/cache/config.hpp"
#include "smcsec/lab/noise.hpp"
#include "smcsec/lab/rollback.hpp"
#include "smcsec/record.hpp"

namespace smcsec::runner {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline const std::vector<std::string>& experiment_ids() {
  static const std::vector<std::string> ids{"exp1_1a", "exp1_1b", "exp1_2", "exp1_3", "conf_vs_samples",
                                            "exp2",    "exp3a",   "exp3b",  "custom"};
  return ids;
}

struct AnalysisBlock {
  std::vector<double> proportions{0.5};
  double confidence = 0.95;
  // Grid for proportion bounds; y_grid_step is the grid for quantiles of y_metric.
  double proportion_grid_step = 0.01;
  double y_grid_step = 0.01;
  double x_grid_step = 1.0;
  double half_width = 0.0;
  // Empty means one center per experiment point, at that point's mean x.
  std::vector<double> x_centers;
  // Binary property for proportion analyses; the y metric for quantile ones.
  std::string property = "success>=1";
  std::string y_metric;
  // SAE certification threshold: assert P(observing an SAE) < this.
  double certify_proportion = 0.15;
  std::uint64_t curve_max_samples = 320;
};

struct CustomBlock {
  std::string family;  // pnp | rollback | sae
  std::string sweep;   // parameter name, see experiments.hpp
  std::vector<double> values;
  std::string mode = "proportion";  // proportion | quantile
};

struct ExperimentConfig {
  std::string id = "custom";
  std::uint64_t n_samples = 20;
  std::uint64_t base_seed = 1;
  std::string out_dir;

  cache::CacheConfig cache;
  lab::NoiseModel noise;
  std::vector<int> noise_levels{1, 2, 3, 4, 5};
  std::vector<double> injected_fractions;

  std::uint64_t iterations = 15;
  std::vector<std::uint64_t> iteration_list;
  std::vector<std::string> policies{"LRU"};

  std::vector<std::string> designs{"SKEWED", "GLOBAL_RANDOM"};
  std::vector<std::size_t> target_groups{8, 16, 24, 32};
  std::size_t attacker_accesses = 256;

  lab::RollbackModel rollback;
  std::vector<double> obfuscation_probabilities;

  CustomBlock custom;
  AnalysisBlock analysis;

  void validate() const;

  /// Covers everything that determines sample values; excludes n_samples,
  /// the output directory and the analysis block so a store can be
  /// extended or re-analysed without invalidating it.
  nlohmann::json sampling_json() const {
    nlohmann::json j{
        {"id", id},
        {"base_seed", base_seed},
        {"cache",
         {{"sets", cache.num_sets},
          {"ways", cache.ways},
          {"line_bytes", cache.line_bytes},
          {"policy", std::string(cache::to_string(cache.policy))},
          {"mapping", std::string(cache::to_string(cache.mapping))},
          {"extra_tag_ratio", cache.extra_tag_ratio},
          {"seed", cache.seed}}},
        {"noise",
         {{"level", noise.level},
          {"levels", noise_levels},
          {"injected_fraction", noise.injected_fraction},
          {"injected_fractions", injected_fractions},
          {"injected_burst", noise.injected_burst}}},
        {"attack", {{"iterations", iterations}, {"iteration_list", iteration_list}, {"policies", policies}}},
        {"sae",
         {{"designs", designs}, {"target_groups", target_groups}, {"attacker_accesses", attacker_accesses}}},
        {"rollback", rollback.to_json()},
    };
    j["rollback"]["probabilities"] = obfuscation_probabilities;
    if (id == "custom") {
      j["custom"] = {{"family", custom.family}, {"sweep", custom.sweep}, {"values", custom.values}};
    }
    return j;
  }

  std::string digest() const { return config_digest(sampling_json()); }
};

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split_list(std::string_view s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    const auto comma = s.find(',', start);
    const auto piece = trim(s.substr(start, comma == std::string_view::npos ? s.size() - start : comma - start));
    if (!piece.empty()) out.push_back(piece);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

template <typename T>
T parse_scalar(const std::string& key, const std::string& text) {
  std::istringstream in(text);
  T value{};
  in >> value;
  if (in.fail() || !(in >> std::ws).eof()) {
    throw ConfigError("config key '" + key + "': cannot parse '" + text + "'");
  }
  return value;
}

template <typename T>
std::vector<T> parse_list(const std::string& key, const std::string& text) {
  std::vector<T> out;
  for (const auto& piece : split_list(text)) out.push_back(parse_scalar<T>(key, piece));
  return out;
}

template <>
inline std::vector<std::string> parse_list<std::string>(const std::string&, const std::string& text) {
  return split_list(text);
}

inline std::vector<double> step_range(double first, double last, double step) {
  std::vector<double> out;
  const auto count = static_cast<long>((last - first) / step + 0.5);
  for (long k = 0; k <= count; ++k) {
    // Rounded so grid values print as 0.3, not 0.30000000000000004.
    const double v = first + static_cast<double>(k) * step;
    out.push_back(std::round(v * 1e9) / 1e9);
  }
  return out;
}

}  // namespace detail

/// Desk-scale defaults for each experiment family.
inline ExperimentConfig preset(const std::string& id) {
  ExperimentConfig c;
  c.id = id;
  c.cache = cache::CacheConfig{64, 8, 64, cache::Policy::lru, cache::Mapping::modulo, 0.0, 0};

  if (id == "exp1_1a" || id == "exp1_1b") {
    c.n_samples = 35;
    c.iterations = 15;
    c.noise_levels = {1, 2, 3, 4, 5};
    c.analysis.confidence = 0.95;
    c.analysis.proportions = {0.1, 0.5, 0.9};
    if (id == "exp1_1b") {
      c.analysis.proportions = {0.5};
      // 3000 replacements at 2500 iterations, scaled to 15 iterations.
      c.analysis.half_width = 18;
      c.analysis.x_grid_step = 1.0;
    }
  } else if (id == "exp1_2") {
    c.n_samples = 20;
    c.iterations = 20;
    c.noise.level = 1;
    c.noise.injected_burst = 64;
    c.injected_fractions = detail::step_range(0.0, 1.0, 0.1);
    c.analysis.confidence = 0.90;
    c.analysis.half_width = 0.1;
    c.analysis.x_grid_step = 0.01;
    c.analysis.x_centers = detail::step_range(0.0, 1.0, 0.1);
  } else if (id == "exp1_3") {
    c.n_samples = 20;
    c.noise.level = 1;
    c.policies = {"LRU", "NMRU"};
    c.iteration_list = {5, 10, 15, 20, 25, 30, 40, 50, 60, 80, 100};
    c.analysis.confidence = 0.90;
    c.analysis.x_grid_step = 1.0;
  } else if (id == "conf_vs_samples") {
    c.n_samples = 1;
    c.analysis.proportions = {0.5, 0.1, 0.05, 0.01};
    c.analysis.confidence = 0.95;
    c.analysis.curve_max_samples = 320;
  } else if (id == "exp2") {
    c.n_samples = 20;
    c.cache = cache::CacheConfig{16, 8, 64, cache::Policy::random, cache::Mapping::skewed, 0.75, 0};
    c.designs = {"SKEWED", "GLOBAL_RANDOM"};
    c.target_groups = {8, 16, 24, 32};
    c.attacker_accesses = 256;
    c.analysis.confidence = 0.95;
    c.analysis.proportions = {0.5};
    c.analysis.y_grid_step = 1.0;
    c.analysis.y_metric = "sae_count";
    c.analysis.property = "sae_count>0";
    c.analysis.certify_proportion = 0.15;
  } else if (id == "exp3a") {
    c.n_samples = 20;
    c.obfuscation_probabilities = {0.1, 0.2, 0.3, 0.4, 0.5};
    c.analysis.confidence = 0.95;
    c.analysis.proportions = {0.25, 0.5, 0.75};
    c.analysis.y_grid_step = 0.01;
    c.analysis.y_metric = "accuracy";
  } else if (id == "exp3b") {
    c.n_samples = 20;
    c.obfuscation_probabilities = detail::step_range(0.0, 1.0, 0.05);
    c.analysis.confidence = 0.95;
    c.analysis.proportions = {0.5};
    c.analysis.y_grid_step = 0.01;
    c.analysis.y_metric = "accuracy";
    c.analysis.half_width = 0.1;
    c.analysis.x_grid_step = 0.01;
    c.analysis.x_centers = detail::step_range(0.1, 0.9, 0.1);
  } else if (id != "custom") {
    throw ConfigError("unknown experiment id '" + id + "'");
  }
  return c;
}

inline void ExperimentConfig::validate() const {
  bool known = false;
  for (const auto& e : experiment_ids()) known = known || e == id;
  if (!known) throw ConfigError("unknown experiment id '" + id + "'");
  if (n_samples < 1) throw ConfigError("n_samples must be at least 1");
  try {
    cache.validate();
    noise.validate();
    rollback.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (!(analysis.confidence > 0.0 && analysis.confidence < 1.0)) {
    throw ConfigError("analysis confidence must lie in (0, 1)");
  }
  if (!(analysis.y_grid_step > 0.0) || !(analysis.x_grid_step > 0.0)) {
    throw ConfigError("grid steps must be positive");
  }
  if (!(analysis.proportion_grid_step > 0.0 && analysis.proportion_grid_step <= 0.5)) {
    throw ConfigError("analysis proportion_grid_step must lie in (0, 0.5]");
  }
  for (double f : analysis.proportions) {
    if (!(f > 0.0 && f < 1.0)) throw ConfigError("analysis proportions must lie in (0, 1)");
  }
  for (int level : noise_levels) {
    if (level < 0 || level > 5) throw ConfigError("noise levels must lie in 0..5");
  }
  if (id == "custom") {
    if (custom.family != "pnp" && custom.family != "rollback" && custom.family != "sae") {
      throw ConfigError("custom experiments need [custom] family = pnp | rollback | sae");
    }
    if (custom.sweep.empty() || custom.values.empty()) {
      throw ConfigError("custom experiments need [custom] sweep and values");
    }
    if (custom.mode != "proportion" && custom.mode != "quantile") {
      throw ConfigError("[custom] mode must be proportion or quantile");
    }
  }
}

namespace detail {

// Keys a custom experiment must set explicitly, per family.
inline std::vector<std::string> custom_required_keys(const std::string& family) {
  std::vector<std::string> keys{"experiment.n_samples", "experiment.base_seed", "custom.family", "custom.sweep",
                                "custom.values", "analysis.confidence"};
  if (family == "pnp" || family == "sae") {
    for (const char* k : {"cache.sets", "cache.ways", "cache.line_bytes", "cache.policy", "cache.mapping"}) {
      keys.emplace_back(k);
    }
  }
  if (family == "pnp") {
    for (const char* k : {"noise.level", "noise.injected_fraction", "noise.injected_burst", "attack.iterations"}) {
      keys.emplace_back(k);
    }
  }
  if (family == "sae") {
    for (const char* k : {"cache.extra_tag_ratio", "sae.target_groups", "sae.attacker_accesses"}) keys.emplace_back(k);
  }
  if (family == "rollback") {
    for (const char* k : {"rollback.base_latency", "rollback.delta", "rollback.n_bits", "rollback.probability"}) {
      keys.emplace_back(k);
    }
  }
  return keys;
}

}  // namespace detail

/// Applies the keys of an INI property tree on top of the preset named by
/// [experiment] id. Unknown sections or keys are rejected.
inline ExperimentConfig config_from_ptree(const boost::property_tree::ptree& tree) {
  const auto get = [&](const std::string& key) -> std::optional<std::string> {
    if (auto v = tree.get_optional<std::string>(boost::property_tree::ptree::path_type(key, '.'))) {
      return detail::trim(*v);
    }
    return std::nullopt;
  };
  const std::string id = get("experiment.id").value_or("custom");
  ExperimentConfig c = preset(id);

  static const std::vector<std::string> kKnown{
      "experiment.id",           "experiment.n_samples",       "experiment.base_seed",
      "experiment.out_dir",      "cache.sets",                 "cache.ways",
      "cache.line_bytes",        "cache.policy",               "cache.mapping",
      "cache.extra_tag_ratio",   "cache.seed",                 "noise.level",
      "noise.levels",            "noise.injected_fraction",    "noise.injected_fractions",
      "noise.injected_burst",    "attack.iterations",          "attack.iteration_list",
      "attack.policies",         "sae.designs",                "sae.target_groups",
      "sae.attacker_accesses",   "rollback.base_latency",      "rollback.delta",
      "rollback.threshold",      "rollback.n_bits",            "rollback.probability",
      "rollback.probabilities",  "custom.family",              "custom.sweep",
      "custom.values",           "custom.mode",                "analysis.proportions",
      "analysis.confidence",     "analysis.y_grid_step",       "analysis.proportion_grid_step",
      "analysis.x_grid_step",
      "analysis.half_width",     "analysis.x_centers",         "analysis.property",
      "analysis.y_metric",       "analysis.certify_proportion", "analysis.curve_max_samples",
  };
  for (const auto& [section, body] : tree) {
    for (const auto& [key, value] : body) {
      const std::string full = section + "." + key;
      bool ok = false;
      for (const auto& k : kKnown) ok = ok || k == full;
      if (!ok) throw ConfigError("unknown config key '" + full + "'");
    }
  }

  using detail::parse_list;
  using detail::parse_scalar;
  const auto set = [&](const std::string& key, auto apply) {
    if (auto v = get(key)) apply(key, *v);
  };

  set("experiment.n_samples", [&](auto& k, auto& v) { c.n_samples = parse_scalar<std::uint64_t>(k, v); });
  set("experiment.base_seed", [&](auto& k, auto& v) { c.base_seed = parse_scalar<std::uint64_t>(k, v); });
  set("experiment.out_dir", [&](auto&, auto& v) { c.out_dir = v; });

  set("cache.sets", [&](auto& k, auto& v) { c.cache.num_sets = parse_scalar<std::size_t>(k, v); });
  set("cache.ways", [&](auto& k, auto& v) { c.cache.ways = parse_scalar<std::size_t>(k, v); });
  set("cache.line_bytes", [&](auto& k, auto& v) { c.cache.line_bytes = parse_scalar<std::size_t>(k, v); });
  set("cache.policy", [&](auto&, auto& v) { c.cache.policy = cache::parse_policy(v); });
  set("cache.mapping", [&](auto&, auto& v) { c.cache.mapping = cache::parse_mapping(v); });
  set("cache.extra_tag_ratio", [&](auto& k, auto& v) { c.cache.extra_tag_ratio = parse_scalar<double>(k, v); });
  set("cache.seed", [&](auto& k, auto& v) { c.cache.seed = parse_scalar<std::uint64_t>(k, v); });

  set("noise.level", [&](auto& k, auto& v) { c.noise.level = parse_scalar<int>(k, v); });
  set("noise.levels", [&](auto& k, auto& v) { c.noise_levels = parse_list<int>(k, v); });
  set("noise.injected_fraction", [&](auto& k, auto& v) { c.noise.injected_fraction = parse_scalar<double>(k, v); });
  set("noise.injected_fractions", [&](auto& k, auto& v) { c.injected_fractions = parse_list<double>(k, v); });
  set("noise.injected_burst", [&](auto& k, auto& v) { c.noise.injected_burst = parse_scalar<std::uint32_t>(k, v); });

  set("attack.iterations", [&](auto& k, auto& v) { c.iterations = parse_scalar<std::uint64_t>(k, v); });
  set("attack.iteration_list", [&](auto& k, auto& v) { c.iteration_list = parse_list<std::uint64_t>(k, v); });
  set("attack.policies", [&](auto& k, auto& v) { c.policies = parse_list<std::string>(k, v); });

  set("sae.designs", [&](auto& k, auto& v) { c.designs = parse_list<std::string>(k, v); });
  set("sae.target_groups", [&](auto& k, auto& v) { c.target_groups = parse_list<std::size_t>(k, v); });
  set("sae.attacker_accesses", [&](auto& k, auto& v) { c.attacker_accesses = parse_scalar<std::size_t>(k, v); });

  set("rollback.base_latency", [&](auto& k, auto& v) { c.rollback.base_latency = parse_scalar<double>(k, v); });
  set("rollback.delta", [&](auto& k, auto& v) { c.rollback.delta = parse_scalar<double>(k, v); });
  set("rollback.threshold", [&](auto& k, auto& v) { c.rollback.classifier_threshold = parse_scalar<double>(k, v); });
  set("rollback.n_bits", [&](auto& k, auto& v) { c.rollback.n_bits = parse_scalar<std::uint32_t>(k, v); });
  set("rollback.probability",
      [&](auto& k, auto& v) { c.rollback.obfuscation_probability = parse_scalar<double>(k, v); });
  set("rollback.probabilities", [&](auto& k, auto& v) { c.obfuscation_probabilities = parse_list<double>(k, v); });

  set("custom.family", [&](auto&, auto& v) { c.custom.family = v; });
  set("custom.sweep", [&](auto&, auto& v) { c.custom.sweep = v; });
  set("custom.values", [&](auto& k, auto& v) { c.custom.values = parse_list<double>(k, v); });
  set("custom.mode", [&](auto&, auto& v) { c.custom.mode = v; });

  set("analysis.proportions", [&](auto& k, auto& v) { c.analysis.proportions = parse_list<double>(k, v); });
  set("analysis.confidence", [&](auto& k, auto& v) { c.analysis.confidence = parse_scalar<double>(k, v); });
  set("analysis.y_grid_step", [&](auto& k, auto& v) { c.analysis.y_grid_step = parse_scalar<double>(k, v); });
  set("analysis.proportion_grid_step",
      [&](auto& k, auto& v) { c.analysis.proportion_grid_step = parse_scalar<double>(k, v); });
  set("analysis.x_grid_step", [&](auto& k, auto& v) { c.analysis.x_grid_step = parse_scalar<double>(k, v); });
  set("analysis.half_width", [&](auto& k, auto& v) { c.analysis.half_width = parse_scalar<double>(k, v); });
  set("analysis.x_centers", [&](auto& k, auto& v) { c.analysis.x_centers = parse_list<double>(k, v); });
  set("analysis.property", [&](auto&, auto& v) { c.analysis.property = v; });
  set("analysis.y_metric", [&](auto&, auto& v) { c.analysis.y_metric = v; });
  set("analysis.certify_proportion",
      [&](auto& k, auto& v) { c.analysis.certify_proportion = parse_scalar<double>(k, v); });
  set("analysis.curve_max_samples",
      [&](auto& k, auto& v) { c.analysis.curve_max_samples = parse_scalar<std::uint64_t>(k, v); });

  if (id == "custom") {
    for (const auto& key : detail::custom_required_keys(c.custom.family)) {
      if (!get(key)) throw ConfigError("custom experiment is missing required key '" + key + "'");
    }
  }
  c.validate();
  return c;
}

inline ExperimentConfig parse_config(const std::string& text) {
  boost::property_tree::ptree tree;
  std::istringstream in(text);
  try {
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }
  return config_from_ptree(tree);
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::ini_parser::read_ini(path.string(), tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError(std::string("cannot read config: ") + e.what());
  }
  return config_from_ptree(tree);
}

}  // namespace smcsec::runner
