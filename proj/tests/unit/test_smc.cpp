#include <gtest/gtest.h>

#include <boost/multiprecision/cpp_int.hpp>

#include <cmath>
#include <random>
#include <vector>

#include "smcsec/smc/beta.hpp"
#include "smcsec/smc/clopper_pearson.hpp"
#include "smcsec/smc/interval.hpp"
#include "smcsec/smc/property.hpp"
#include "smcsec/smc/tunnel.hpp"

using namespace smcsec;
using namespace smcsec::smc;

namespace {

using boost::multiprecision::cpp_rational;

// Exact P(Binom(n, p) >= k) for rational p.
cpp_rational binomial_upper_tail(unsigned n, unsigned k, const cpp_rational& p) {
  cpp_rational total = 0;
  cpp_rational choose = 1;
  for (unsigned j = 0; j <= n; ++j) {
    if (j > 0) choose = choose * (n - j + 1) / j;
    if (j < k) continue;
    cpp_rational term = choose;
    for (unsigned t = 0; t < j; ++t) term *= p;
    for (unsigned t = 0; t < n - j; ++t) term *= (1 - p);
    total += term;
  }
  return total;
}

// Independent confidence oracle: for integer shapes the beta CDF is a
// binomial tail, I_x(a, b) = P(Binom(a + b - 1, x) >= a).
double oracle_confidence(unsigned m, unsigned n, const cpp_rational& f) {
  const bool positive = cpp_rational(m, n) >= f;
  const cpp_rational a = positive ? f : cpp_rational(0);
  const cpp_rational b = positive ? cpp_rational(1) : f;
  cpp_rational c;
  if (m == 0) {
    cpp_rational x = 1, y = 1;
    for (unsigned t = 0; t < n; ++t) {
      x *= 1 - a;
      y *= 1 - b;
    }
    c = x - y;
  } else if (m == n) {
    cpp_rational x = 1, y = 1;
    for (unsigned t = 0; t < n; ++t) {
      x *= b;
      y *= a;
    }
    c = x - y;
  } else {
    c = binomial_upper_tail(n, m + 1, b) - binomial_upper_tail(n, m, a);
  }
  return static_cast<double>(c);
}

}  // namespace

TEST(IncompleteBeta, ClosedForms) {
  EXPECT_NEAR(regularized_incomplete_beta(0.5, 1, 1), 0.5, 1e-14);
  EXPECT_NEAR(regularized_incomplete_beta(0.3, 1, 10), 1 - std::pow(0.7, 10), 1e-13);
  EXPECT_NEAR(regularized_incomplete_beta(0.3, 1, 10), 0.9717525, 1e-7);
  EXPECT_NEAR(regularized_incomplete_beta(0.5, 4, 7), 0.828125, 1e-13);
  EXPECT_EQ(regularized_incomplete_beta(0.0, 2.5, 3), 0.0);
  EXPECT_EQ(regularized_incomplete_beta(1.0, 2.5, 3), 1.0);
}

TEST(IncompleteBeta, MatchesBinomialTail) {
  for (unsigned a = 1; a <= 12; ++a) {
    for (unsigned b = 1; b <= 12; ++b) {
      for (int k = 1; k < 20; ++k) {
        const cpp_rational x(k, 20);
        const double expected = static_cast<double>(binomial_upper_tail(a + b - 1, a, x));
        EXPECT_NEAR(regularized_incomplete_beta(k / 20.0, a, b), expected, 1e-12) << a << "," << b << "," << k;
      }
    }
  }
}

TEST(IncompleteBeta, MonotoneInX) {
  double prev = 0.0;
  for (int k = 0; k <= 1000; ++k) {
    const double v = regularized_incomplete_beta(k / 1000.0, 3.5, 7.25);
    EXPECT_GE(v, prev - 1e-15);
    prev = v;
  }
}

TEST(IncompleteBeta, DomainErrors) {
  EXPECT_THROW(regularized_incomplete_beta(-0.1, 1, 1), std::domain_error);
  EXPECT_THROW(regularized_incomplete_beta(1.1, 1, 1), std::domain_error);
  EXPECT_THROW(regularized_incomplete_beta(0.5, 0, 1), std::domain_error);
  EXPECT_THROW(regularized_incomplete_beta(0.5, 1, -2), std::domain_error);
  EXPECT_THROW(regularized_incomplete_beta(std::nan(""), 1, 1), std::domain_error);
}

TEST(BernoulliSummary, Invariants) {
  EXPECT_THROW(BernoulliSummary(3, 2), std::invalid_argument);
  BernoulliSummary s;
  s.add(true);
  s.add(false);
  s.add(true);
  EXPECT_EQ(s, BernoulliSummary(2, 3));
  EXPECT_EQ(s + BernoulliSummary(1, 4), BernoulliSummary(3, 7));
  EXPECT_EQ(s.failures(), 1u);
}

TEST(ClopperPearson, Examples) {
  EXPECT_NEAR(clopper_pearson_confidence({0, 10}, 0.3), 1 - std::pow(0.7, 10), 1e-13);
  EXPECT_NEAR(clopper_pearson_confidence({5, 5}, 0.5), 0.96875, 1e-13);
  EXPECT_NEAR(clopper_pearson_confidence({3, 10}, 0.5), 0.828125, 1e-12);
}

TEST(ClopperPearson, BoundsFollowVerdict) {
  const auto neg = cp_beta_bounds({3, 10}, 0.5);
  EXPECT_EQ(neg.a, 0.0);
  EXPECT_EQ(neg.b, 0.5);
  const auto pos = cp_beta_bounds({5, 10}, 0.5);
  EXPECT_EQ(pos.a, 0.5);
  EXPECT_EQ(pos.b, 1.0);
}

TEST(ClopperPearson, MatchesExactOracle) {
  for (unsigned n = 1; n <= 50; ++n) {
    for (unsigned m = 0; m <= n; ++m) {
      for (int k = 1; k <= 9; ++k) {
        const double got = clopper_pearson_confidence({m, n}, k / 10.0);
        EXPECT_NEAR(got, oracle_confidence(m, n, cpp_rational(k, 10)), 1e-9) << m << "/" << n << " F=" << k;
      }
    }
  }
}

TEST(ClopperPearson, Monotonicity) {
  for (double f : {0.05, 0.3, 0.7}) {
    double prev = 0.0;
    for (std::uint64_t n = 1; n <= 200; ++n) {
      const double c = clopper_pearson_confidence({0, n}, f);
      EXPECT_GE(c, prev - 1e-15);
      prev = c;
    }
  }
  const std::uint64_t n = 40;
  const double f = 0.6;
  double prev = 2.0;
  for (std::uint64_t m = 0; static_cast<double>(m) / n < f; ++m) {
    const double c = clopper_pearson_confidence({m, n}, f);
    EXPECT_LE(c, prev + 1e-15);
    prev = c;
  }
}

TEST(ClopperPearson, DomainErrors) {
  EXPECT_THROW(clopper_pearson_confidence({1, 2}, 0.0), std::domain_error);
  EXPECT_THROW(clopper_pearson_confidence({1, 2}, 1.0), std::domain_error);
  EXPECT_THROW(clopper_pearson_confidence({0, 0}, 0.5), std::domain_error);
}

TEST(Assertion, Verdicts) {
  EXPECT_EQ(assert_property({4, 10}, 0.5).verdict, Verdict::negative);
  EXPECT_EQ(assert_property({5, 10}, 0.5).verdict, Verdict::positive);
  const auto a = assert_property({0, 4}, 0.5);
  EXPECT_EQ(a.verdict, Verdict::negative);
  EXPECT_NEAR(a.confidence, 0.9375, 1e-14);
  EXPECT_EQ(a.summary, BernoulliSummary(0, 4));
}

TEST(Assertion, BranchConsistency) {
  for (std::uint64_t n = 1; n <= 30; ++n) {
    for (std::uint64_t m = 0; m <= n; ++m) {
      for (int k = 1; k < 20; ++k) {
        const double f = k / 20.0;
        const auto a = assert_property({m, n}, f);
        const auto b = cp_beta_bounds({m, n}, f);
        EXPECT_EQ(a.verdict == Verdict::positive, b.a == f && b.b == 1.0);
        EXPECT_LT(b.a, b.b);
      }
    }
  }
}

TEST(AdaptiveSmc, StopsAtFiveForConstantSamplers) {
  int calls = 0;
  const auto never = adaptive_smc([&] { ++calls; return false; }, 0.5, 0.95, 100);
  EXPECT_FALSE(never.exhausted);
  EXPECT_EQ(calls, 5);
  EXPECT_EQ(never.assertion.verdict, Verdict::negative);
  EXPECT_NEAR(never.assertion.confidence, 0.96875, 1e-14);

  const auto always = adaptive_smc([] { return true; }, 0.5, 0.95, 100);
  EXPECT_EQ(always.assertion.summary.trials(), 5u);
  EXPECT_EQ(always.assertion.verdict, Verdict::positive);
}

TEST(AdaptiveSmc, FairCoinAgainstHighThreshold) {
  std::mt19937_64 rng(7);
  std::bernoulli_distribution coin(0.5);
  int negative = 0;
  for (int rep = 0; rep < 1000; ++rep) {
    const auto r = adaptive_smc([&] { return coin(rng); }, 0.99, 0.95, 200);
    negative += r.assertion.verdict == Verdict::negative ? 1 : 0;
  }
  EXPECT_GE(negative, 990);
}

TEST(AdaptiveSmc, TerminationAndErrors) {
  std::mt19937_64 rng(3);
  std::bernoulli_distribution coin(0.5);
  for (std::uint64_t max : {1u, 7u, 50u}) {
    int calls = 0;
    const auto r = adaptive_smc([&] { ++calls; return coin(rng); }, 0.5, 0.999, max);
    EXPECT_LE(static_cast<std::uint64_t>(calls), max);
    if (!r.exhausted) {
      EXPECT_GE(r.assertion.confidence, 0.999);
    }
  }
  EXPECT_THROW(adaptive_smc([] { return true; }, 0.5, 0.95, 0), std::domain_error);
  EXPECT_THROW(adaptive_smc([]() -> bool { throw std::runtime_error("boom"); }, 0.5, 0.95, 3), std::runtime_error);
}

TEST(MinSamples, FailedSampleCurve) {
  EXPECT_EQ(min_samples_all_failures(0.5, 0.95), 5u);
  EXPECT_EQ(min_samples_all_failures(0.1, 0.95), 29u);
  EXPECT_EQ(min_samples_all_failures(0.05, 0.95), 59u);
  EXPECT_EQ(min_samples_all_failures(0.01, 0.95), 299u);
  for (double f : {0.5, 0.1, 0.05, 0.01}) {
    const auto n = min_samples_all_failures(f, 0.95);
    EXPECT_GE(1 - std::pow(1 - f, static_cast<double>(n)), 0.95);
    EXPECT_LT(1 - std::pow(1 - f, static_cast<double>(n - 1)), 0.95);
  }
}

TEST(ProportionInterval, Examples) {
  const auto zero = proportion_interval({0, 20}, 0.95, 0.01);
  EXPECT_EQ(zero.lo, 0.0);
  EXPECT_DOUBLE_EQ(zero.hi, 0.14);
  const auto all = proportion_interval({20, 20}, 0.95, 0.01);
  EXPECT_DOUBLE_EQ(all.lo, 0.86);
  EXPECT_EQ(all.hi, 1.0);
  EXPECT_THROW(proportion_interval({1, 2}, 0.95, 0.0), std::domain_error);
  EXPECT_THROW(proportion_interval({1, 2}, 0.95, 0.6), std::domain_error);
}

// The reported band [0.77, 0.98] at N=35 is an equal-tailed interval, i.e.
// 0.975 confidence per side. Exactly one success count reproduces it.
TEST(ProportionInterval, ThirtyFiveSampleCrossCheck) {
  std::vector<std::uint64_t> bracketing;
  for (std::uint64_t m = 0; m <= 35; ++m) {
    const auto iv = proportion_interval({m, 35}, 0.975, 0.01);
    if (iv.lo <= 0.77 && iv.hi >= 0.98) bracketing.push_back(m);
  }
  ASSERT_EQ(bracketing.size(), 1u);
  EXPECT_EQ(bracketing[0], 32u);
  const auto iv = proportion_interval({32, 35}, 0.975, 0.01);
  EXPECT_DOUBLE_EQ(iv.lo, 0.76);
  EXPECT_DOUBLE_EQ(iv.hi, 0.99);

  // One-sided 0.95 intervals never bracket the band.
  for (std::uint64_t m = 0; m <= 35; ++m) {
    const auto one = proportion_interval({m, 35}, 0.95, 0.01);
    EXPECT_FALSE(one.lo <= 0.77 && one.hi >= 0.98) << "M=" << m;
  }
}

TEST(ProportionInterval, ContainsRatioAndOnGrid) {
  for (std::uint64_t n = 1; n <= 40; ++n) {
    for (std::uint64_t m = 0; m <= n; ++m) {
      const auto iv = proportion_interval({m, n}, 0.9, 0.05);
      const double ratio = static_cast<double>(m) / n;
      EXPECT_LE(iv.lo, ratio);
      EXPECT_GE(iv.hi, ratio);
      EXPECT_LE(0.0, iv.lo);
      EXPECT_LE(iv.hi, 1.0);
      EXPECT_NEAR(std::round(iv.lo * 20) / 20, iv.lo, 1e-12);
      EXPECT_NEAR(std::round(iv.hi * 20) / 20, iv.hi, 1e-12);
    }
  }
}

TEST(ProportionInterval, NestingInConfidence) {
  for (std::uint64_t n : {5u, 17u, 40u}) {
    for (std::uint64_t m = 0; m <= n; ++m) {
      ProportionInterval prev{1.0, 0.0};
      bool first = true;
      for (double c : {0.5, 0.8, 0.9, 0.95, 0.99}) {
        const auto iv = proportion_interval({m, n}, c, 0.01);
        if (!first) {
          EXPECT_LE(iv.lo, prev.lo);
          EXPECT_GE(iv.hi, prev.hi);
        }
        prev = iv;
        first = false;
      }
    }
  }
}

TEST(ProportionInterval, MonteCarloCoverage) {
  std::mt19937_64 rng(2024);
  for (double p : {0.1, 0.5, 0.9}) {
    std::binomial_distribution<std::uint64_t> draw(30, p);
    int covered = 0;
    for (int t = 0; t < 2000; ++t) covered += proportion_interval({draw(rng), 30}, 0.9, 0.01).contains(p) ? 1 : 0;
    EXPECT_GE(covered / 2000.0, 0.88) << "p=" << p;
  }
}

TEST(QuantileInterval, BracketsSampleMedian) {
  std::vector<double> v;
  for (int i = 0; i < 40; ++i) v.push_back(0.5 + 0.01 * (i % 10));
  const auto iv = quantile_interval(v, 0.5, 0.95, 0.01, 0.0, 1.0);
  EXPECT_LT(iv.lo, 0.545);
  EXPECT_GE(iv.hi, 0.54);
  EXPECT_GE(iv.lo, 0.49);
  EXPECT_LE(iv.hi, 0.6);
  EXPECT_THROW(quantile_interval({}, 0.5, 0.95, 0.01, 0, 1), std::domain_error);
}

TEST(Property, ParseAndEvaluate) {
  const auto p = PropertySpec::parse("success>=1");
  EXPECT_EQ(p.metric, "success");
  EXPECT_EQ(p.comparator, Comparator::greater_equal);
  const auto q = PropertySpec::parse("sae_count>0");
  EXPECT_EQ(q.comparator, Comparator::greater);
  EXPECT_EQ(PropertySpec::parse("x<=2.5").threshold, 2.5);
  EXPECT_EQ(PropertySpec::parse("x=3").comparator, Comparator::equal);
  EXPECT_THROW(PropertySpec::parse("nonsense"), std::invalid_argument);
  EXPECT_THROW(PropertySpec::parse(">=1"), std::invalid_argument);

  const ExecutionRecord r({{"success", 1.0}}, 1, "d");
  EXPECT_TRUE(p.evaluate(r));
  EXPECT_THROW(q.evaluate(r), UnknownMetric);
}

namespace {

std::vector<ExecutionRecord> step_dataset(std::size_t per_bin) {
  // x on a 0.1 grid; success is 1 left of 0.5 and 0 right of it.
  std::vector<ExecutionRecord> out;
  std::uint64_t seed = 0;
  for (int k = 0; k < 10; ++k) {
    const double x = 0.05 + 0.1 * k;
    for (std::size_t i = 0; i < per_bin; ++i) {
      out.emplace_back(MetricMap{{"x", x}, {"success", x < 0.5 ? 1.0 : 0.0}}, seed++, "d");
    }
  }
  return out;
}

}  // namespace

TEST(Tunnel, SingleBinReducesToProportionInterval) {
  std::vector<ExecutionRecord> recs;
  for (int i = 0; i < 20; ++i) recs.emplace_back(MetricMap{{"x", 1.0}, {"success", 0.0}}, i, "d");
  const TunnelAxis axis{"x", WindowFilter::Mode::window, 10.0, {1.0}, 1.0};
  const auto g = tunnel_graph(recs, axis, PropertySpec::parse("success>=1"), 0.95, 0.01);
  ASSERT_EQ(g.bins.size(), 1u);
  EXPECT_EQ(g.bins[0].n_samples, 20u);
  EXPECT_EQ(g.bins[0].interval.lo, 0.0);
  EXPECT_DOUBLE_EQ(g.bins[0].interval.hi, 0.14);
}

TEST(Tunnel, EmptyBinIsVacuous) {
  const auto recs = step_dataset(5);
  const TunnelAxis axis{"x", WindowFilter::Mode::window, 0.01, {5.0}, 0.01};
  const auto g = tunnel_graph(recs, axis, PropertySpec::parse("success>=1"), 0.95, 0.01);
  EXPECT_EQ(g.bins[0].n_samples, 0u);
  EXPECT_EQ(g.bins[0].interval.lo, 0.0);
  EXPECT_EQ(g.bins[0].interval.hi, 1.0);
  EXPECT_EQ(g.bins[0].interval.confidence, 0.95);
}

TEST(Tunnel, StepDatasetSeparatesAtHalf) {
  const auto recs = step_dataset(20);
  std::vector<double> centers;
  for (int k = 0; k < 10; ++k) centers.push_back(0.05 + 0.1 * k);
  const TunnelAxis axis{"x", WindowFilter::Mode::window, 0.05, centers, 0.01};
  const auto g = tunnel_graph(recs, axis, PropertySpec::parse("success>=1"), 0.95, 0.01);
  for (const auto& bin : g.bins) {
    EXPECT_EQ(bin.n_samples, 20u);
    if (bin.filter.center < 0.5) {
      EXPECT_GT(bin.interval.lo, 0.5);
    } else {
      EXPECT_LT(bin.interval.hi, 0.5);
    }
    EXPECT_EQ(bin.interval.confidence, g.confidence);
  }
}

TEST(Tunnel, ErrorsAndExactMode) {
  const auto recs = step_dataset(3);
  const auto prop = PropertySpec::parse("success>=1");
  EXPECT_THROW(tunnel_graph(recs, TunnelAxis{"x", WindowFilter::Mode::window, 0.1, {}, 0.01}, prop, 0.9, 0.01),
               std::invalid_argument);
  EXPECT_THROW(
      tunnel_graph(recs, TunnelAxis{"x", WindowFilter::Mode::window, 0.1, {0.5, 0.1}, 0.01}, prop, 0.9, 0.01),
      std::invalid_argument);
  EXPECT_THROW(tunnel_graph(recs, TunnelAxis{"nope", WindowFilter::Mode::window, 0.1, {0.5}, 0.01}, prop, 0.9, 0.01),
               UnknownMetric);

  const WindowFilter exact{0.25, 0.0, WindowFilter::Mode::exact};
  EXPECT_TRUE(exact.accepts(0.25, 0.01));
  EXPECT_FALSE(exact.accepts(0.26, 0.01));
  const WindowFilter window{1.0, 0.5, WindowFilter::Mode::window};
  EXPECT_FALSE(window.accepts(0.5, 1.0));
  EXPECT_TRUE(window.accepts(0.51, 1.0));
  EXPECT_FALSE(window.accepts(1.5, 1.0));
}

TEST(Tunnel, BinsEqualDirectIntervals) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> ux(0.0, 1.0);
  std::vector<ExecutionRecord> recs;
  for (int i = 0; i < 500; ++i) {
    const double x = ux(rng);
    std::bernoulli_distribution ok(1.0 - x);
    recs.emplace_back(MetricMap{{"x", x}, {"success", ok(rng) ? 1.0 : 0.0}}, i, "d");
  }
  std::vector<double> centers;
  for (int k = 0; k <= 20; ++k) centers.push_back(k * 0.05);
  const TunnelAxis axis{"x", WindowFilter::Mode::window, 0.05, centers, 0.01};
  const auto prop = PropertySpec::parse("success>=1");
  const auto g = tunnel_graph(recs, axis, prop, 0.9, 0.01);
  for (const auto& bin : g.bins) {
    const auto subset = select_window(recs, "x", bin.filter, 0.01);
    ASSERT_EQ(subset.size(), bin.n_samples);
    if (subset.empty()) continue;
    EXPECT_EQ(bin.interval, proportion_interval(summarize(subset, prop), 0.9, 0.01));
  }
}
