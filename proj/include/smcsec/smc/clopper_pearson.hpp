#pragma once

#include <cmath>
#include <concepts>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <type_traits>

#include "smcsec/smc/beta.hpp"

namespace smcsec::smc {

/// Success count M over N independent evaluations of a binary property.
class BernoulliSummary {
 public:
  BernoulliSummary() = default;
  BernoulliSummary(std::uint64_t successes, std::uint64_t trials) : successes_(successes), trials_(trials) {
    if (successes > trials) {
      throw std::invalid_argument("BernoulliSummary: successes (" + std::to_string(successes) +
                                  ") exceed trials (" + std::to_string(trials) + ")");
    }
  }

  std::uint64_t successes() const { return successes_; }
  std::uint64_t trials() const { return trials_; }
  std::uint64_t failures() const { return trials_ - successes_; }
  bool empty() const { return trials_ == 0; }

  void add(bool outcome) {
    ++trials_;
    if (outcome) ++successes_;
  }

  double ratio() const { return static_cast<double>(successes_) / static_cast<double>(trials_); }

  friend BernoulliSummary operator+(const BernoulliSummary& lhs, const BernoulliSummary& rhs) {
    return {lhs.successes_ + rhs.successes_, lhs.trials_ + rhs.trials_};
  }
  friend bool operator==(const BernoulliSummary&, const BernoulliSummary&) = default;

 private:
  std::uint64_t successes_ = 0;
  std::uint64_t trials_ = 0;
};

/// Integration bounds of the Clopper-Pearson confidence.
struct CpBetaBounds {
  double a = 0.0;
  double b = 1.0;
};

enum class Verdict { negative, positive };

inline std::string_view to_string(Verdict v) { return v == Verdict::positive ? "positive" : "negative"; }

struct Assertion {
  Verdict verdict = Verdict::negative;
  double proportion = 0.5;
  double confidence = 0.0;
  BernoulliSummary summary;
};

namespace detail {

inline void require_proportion(double proportion) {
  if (!(proportion > 0.0 && proportion < 1.0)) {
    throw std::domain_error("proportion F must lie in (0, 1), got " + std::to_string(proportion));
  }
}

inline void require_confidence(double confidence) {
  if (!(confidence > 0.0 && confidence < 1.0)) {
    throw std::domain_error("confidence must lie in (0, 1), got " + std::to_string(confidence));
  }
}

inline void require_trials(const BernoulliSummary& summary) {
  if (summary.trials() == 0) throw std::domain_error("summary must contain at least one trial");
}

// x^n computed as exp(n log x) with log1p for accuracy near x = 1.
inline double pow_one_minus(double f, std::uint64_t n) {
  return std::exp(static_cast<double>(n) * std::log1p(-f));
}

}  // namespace detail

/// Positive iff M/N >= F; the boundary case is positive.
inline bool meets_proportion(const BernoulliSummary& summary, double proportion) {
  return summary.ratio() >= proportion;
}

inline CpBetaBounds cp_beta_bounds(const BernoulliSummary& summary, double proportion) {
  detail::require_trials(summary);
  detail::require_proportion(proportion);
  if (meets_proportion(summary, proportion)) return {proportion, 1.0};
  return {0.0, proportion};
}

/// Confidence C_CP that the assertion M/N vs F matches the ground truth
/// p >= F, computed with the Clopper-Pearson exact method.
inline double clopper_pearson_confidence(const BernoulliSummary& summary, double proportion) {
  const CpBetaBounds bounds = cp_beta_bounds(summary, proportion);
  const std::uint64_t m = summary.successes();
  const std::uint64_t n = summary.trials();

  double confidence;
  if (m == 0) {
    confidence = detail::pow_one_minus(bounds.a, n) - detail::pow_one_minus(bounds.b, n);
  } else if (m == n) {
    confidence = std::pow(bounds.b, static_cast<double>(n)) - std::pow(bounds.a, static_cast<double>(n));
  } else {
    const auto md = static_cast<double>(m);
    const auto nd = static_cast<double>(n);
    confidence = regularized_incomplete_beta(bounds.b, md + 1.0, nd - md) -
                 regularized_incomplete_beta(bounds.a, md, nd - md + 1.0);
  }
  if (confidence < 0.0) return 0.0;
  if (confidence > 1.0) return 1.0;
  return confidence;
}

inline Assertion assert_property(const BernoulliSummary& summary, double proportion) {
  const double confidence = clopper_pearson_confidence(summary, proportion);
  return {meets_proportion(summary, proportion) ? Verdict::positive : Verdict::negative, proportion, confidence,
          summary};
}

struct AdaptiveResult {
  Assertion assertion;
  bool exhausted = false;
};

/// Sequential SMC: draws one sample at a time until the running
/// Clopper-Pearson confidence reaches target_confidence or max_samples
/// samples have been drawn. The sampler must produce i.i.d. truth values;
/// exceptions it throws propagate unchanged.
template <typename Sampler>
  requires std::invocable<Sampler&> && std::convertible_to<std::invoke_result_t<Sampler&>, bool>
AdaptiveResult adaptive_smc(Sampler&& sampler, double proportion, double target_confidence,
                            std::uint64_t max_samples) {
  detail::require_proportion(proportion);
  detail::require_confidence(target_confidence);
  if (max_samples == 0) throw std::domain_error("adaptive_smc: max_samples must be positive");

  BernoulliSummary summary;
  Assertion assertion;
  while (summary.trials() < max_samples) {
    summary.add(static_cast<bool>(sampler()));
    assertion = assert_property(summary, proportion);
    if (assertion.confidence >= target_confidence) return {assertion, false};
  }
  return {assertion, true};
}

/// Smallest N such that N failures out of N samples assert p < F with
/// confidence at least target_confidence, i.e. 1 - (1 - F)^N >= C.
inline std::uint64_t min_samples_all_failures(double proportion, double target_confidence) {
  detail::require_proportion(proportion);
  detail::require_confidence(target_confidence);

  const auto confidence_at = [&](std::uint64_t n) {
    return clopper_pearson_confidence(BernoulliSummary{0, n}, proportion);
  };
  const double estimate = std::ceil(std::log1p(-target_confidence) / std::log1p(-proportion));
  std::uint64_t n = estimate < 1.0 ? 1 : static_cast<std::uint64_t>(estimate);
  // The closed form can land one step off due to rounding; settle on the
  // exact boundary using the same confidence function the assertions use.
  while (n > 1 && confidence_at(n - 1) >= target_confidence) --n;
  while (confidence_at(n) < target_confidence) ++n;
  return n;
}

}  // namespace smcsec::smc
