#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include <boost/math/distributions/normal.hpp>

#include "fixtures.hpp"
#include "iontrap/analysis.hpp"
#include "iontrap/rng.hpp"

namespace {

using namespace iontrap;
using namespace iontrap::analysis;
using iontrap::testing::two_pi;
using iontrap::testing::yb171;

TEST(Thermometry, SidebandRatioInversion) {
  const auto e = nbar_from_sideband_ratio(0.5, 0.01);
  EXPECT_DOUBLE_EQ(e.nbar, 1.0);
  EXPECT_NEAR(e.sigma, 0.04, 1e-15);
  EXPECT_FALSE(e.high_occupation_warning);
  EXPECT_TRUE(nbar_from_sideband_ratio(0.75).high_occupation_warning);
  EXPECT_DOUBLE_EQ(nbar_from_sideband_ratio(0.0).nbar, 0.0);
  EXPECT_THROW(nbar_from_sideband_ratio(1.0), InvalidInput);
  EXPECT_THROW(nbar_from_sideband_ratio(-0.1), InvalidInput);
}

TEST(HeatingFit, ExactLineAndSigmaPropagation) {
  std::vector<HeatingPoint> pts;
  for (int k = 0; k < 6; ++k) pts.push_back({0.2 * k, 0.05 + 1.3 * 0.2 * k, 0.02});
  const LineFit f = heating_rate_fit(pts);
  EXPECT_NEAR(f.slope, 1.3, 1e-12);
  EXPECT_NEAR(f.intercept, 0.05, 1e-12);
  EXPECT_NEAR(f.chi2, 0.0, 1e-18);
  EXPECT_EQ(f.dof, 4);
  // Equal weights: var(slope) = sigma^2 / sum (t - tbar)^2.
  double tbar = 0.5, sxx = 0.0;
  for (const auto& p : pts) sxx += (p.t - tbar) * (p.t - tbar);
  EXPECT_NEAR(f.slope_sigma, 0.02 / std::sqrt(sxx), 1e-12);
  EXPECT_THROW(heating_rate_fit({{0.0, 1.0, 0.0}}), InvalidInput);
}

TEST(HeatingFit, SlopeIntervalCoverage) {
  // 95% coverage of slope +/- 1.96 sigma over seeded Gaussian trials.
  Rng rng(2024);
  std::normal_distribution<double> noise(0.0, 1.0);
  const int trials = 2000;
  int covered = 0;
  for (int trial = 0; trial < trials; ++trial) {
    std::vector<HeatingPoint> pts;
    for (int k = 0; k < 8; ++k) {
      const double t = 0.1 * k, sigma = 0.03 + 0.01 * k;
      pts.push_back({t, 0.1 + 2.0 * t + sigma * noise(rng), sigma});
    }
    const LineFit f = heating_rate_fit(pts);
    covered += std::abs(f.slope - 2.0) <= 1.96 * f.slope_sigma;
  }
  const double frac = static_cast<double>(covered) / trials;
  EXPECT_NEAR(frac, 0.95, 0.015);
}

TEST(FieldNoise, ClosedFormAndReferral) {
  const IonSpecies ion = yb171();
  const double w = two_pi * 2.91e6;
  const FieldNoise fn = field_noise_from_heating(1.0, w, ion);
  const double expect = 4.0 * ion.mass * constants::hbar * w / (ion.charge * ion.charge);
  EXPECT_NEAR(fn.s_e / expect, 1.0, 1e-14);
  EXPECT_NEAR(fn.s_e_referred / fn.s_e, 2.91, 1e-12);
  EXPECT_THROW(field_noise_from_heating(-1.0, w, ion), InvalidInput);
}

// Overlapping Allan variance straight from the definition: averages over m
// samples, differences of adjacent averages at every start index.
double naive_adev(const std::vector<double>& y, std::size_t m) {
  const std::size_t n = y.size();
  double acc = 0.0;
  std::size_t terms = 0;
  for (std::size_t j = 0; j + 2 * m <= n; ++j) {
    double a = 0.0, b = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      a += y[j + i];
      b += y[j + m + i];
    }
    const double d = (b - a) / static_cast<double>(m);
    acc += d * d;
    ++terms;
  }
  return std::sqrt(acc / (2.0 * static_cast<double>(terms)));
}

TEST(Allan, MatchesDefinition) {
  Rng rng(8);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> y(300);
  for (auto& v : y) v = 12.0 + g(rng);
  const double period = 0.25;
  const std::vector<double> taus{0.25, 0.5, 2.0, 10.0, 37.5};
  const AllanResult r = allan_deviation(y, period, taus);
  for (std::size_t k = 0; k < taus.size(); ++k) {
    const auto m = static_cast<std::size_t>(std::round(taus[k] / period));
    EXPECT_NEAR(r.deviation[k], naive_adev(y, m), 1e-12);
    EXPECT_LT(r.lower[k], r.deviation[k]);
    EXPECT_GT(r.upper[k], r.deviation[k]);
  }
}

TEST(Allan, LinearDriftGivesTauOverRootTwo) {
  const double c = 0.11, period = 0.5;
  std::vector<double> y(400);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = -3.0 + c * period * static_cast<double>(i);
  const AllanResult r = allan_deviation(y, period, {0.5, 4.0, 50.0, 100.0});
  for (std::size_t k = 0; k < r.taus.size(); ++k) {
    EXPECT_NEAR(r.deviation[k] / (c * r.taus[k] / std::sqrt(2.0)), 1.0, 1e-9);
  }
}

TEST(Allan, WhiteNoiseBandCoverage) {
  // The chi-square band should contain sigma / sqrt(m) in roughly 68% of records.
  const double sigma = 0.3;
  std::normal_distribution<double> g(0.0, sigma);
  int inside = 0, total = 0;
  for (int rec = 0; rec < 200; ++rec) {
    Rng rng = Rng::stream(77, static_cast<std::uint64_t>(rec));
    std::vector<double> y(256);
    for (auto& v : y) v = g(rng);
    const AllanResult r = allan_deviation(y, 1.0, {1.0, 4.0, 16.0});
    for (std::size_t k = 0; k < r.taus.size(); ++k) {
      const double truth = sigma / std::sqrt(r.taus[k]);
      inside += r.lower[k] <= truth && truth <= r.upper[k];
      ++total;
    }
  }
  const double frac = static_cast<double>(inside) / total;
  EXPECT_GT(frac, 0.58);
  EXPECT_LT(frac, 0.80);
}

TEST(Allan, RejectsBadTaus) {
  const std::vector<double> y(10, 1.0);
  EXPECT_THROW(allan_deviation(y, 1.0, {1.5}), InvalidInput);
  EXPECT_THROW(allan_deviation(y, 1.0, {6.0}), InvalidInput);
  EXPECT_THROW(allan_deviation({1.0, 2.0}, 1.0, {1.0}), InvalidInput);
}

Lineshape probe() {
  Lineshape l;
  l.omega_center = two_pi * 1e6;
  l.rabi = two_pi * 50.0;
  l.pulse_time = 10e-3;
  return l;
}

TEST(Lineshape, PiPulsePeakAndHalfMaximum) {
  const Lineshape l = probe();
  EXPECT_NEAR(l.probability(0.0), std::pow(std::sin(0.5 * l.rabi * l.pulse_time), 2), 1e-15);
  const double h = l.half_max_detuning();
  EXPECT_NEAR(l.probability(h), 0.5 * l.probability(0.0), 1e-12);
  EXPECT_NEAR(l.probability(l.first_zero_detuning()), 0.0, 1e-12);
  // Slope by central difference.
  const double d = 0.3 * h, e = 1e-3;
  EXPECT_NEAR(l.slope(d), (l.probability(d + e) - l.probability(d - e)) / (2 * e), 1e-9);
  Lineshape bad = l;
  bad.pulse_time = 20e-3;
  EXPECT_THROW(bad.validate(), InvalidInput);
}

TEST(SideOfFringe, ForwardInverseRoundTrip) {
  const Lineshape l = probe();
  const double park = l.half_max_detuning();
  for (double offset : {-20.0, -5.0, 0.0, 3.0, 12.0}) {
    const double o = two_pi * offset;
    const double p = l.probability(park - o);
    const FringeEstimate est = side_of_fringe_frequency(p, 0.01, l);
    EXPECT_NEAR(est.offset, o, 1e-6) << offset;
    EXPECT_NEAR(est.omega, l.omega_center + o, 1e-6);
    EXPECT_NEAR(est.sigma, 0.01 / std::abs(l.slope(park - o)), 1e-9);
  }
  EXPECT_THROW(side_of_fringe_frequency(1.2, 0.0, l), InvalidInput);
  EXPECT_THROW(side_of_fringe_frequency(0.0, 0.0, l), InvalidInput);
}

TEST(ContrastDecay, RecoversBothModels) {
  for (auto model : {DecayModel::exponential, DecayModel::gaussian}) {
    std::vector<DecayPoint> pts;
    for (int k = 0; k < 25; ++k) {
      const double t = 4e-3 * k;
      const double x = model == DecayModel::exponential ? t / 0.03 : std::pow(t / 0.03, 2);
      pts.push_back({t, 0.97 * std::exp(-x), 0.0});
    }
    const DecayFit f = fit_contrast_decay(pts, model);
    EXPECT_NEAR(f.t2, 0.03, 1e-9);
    EXPECT_NEAR(f.c0, 0.97, 1e-9);
  }
  EXPECT_THROW(fit_contrast_decay({{0.0, 1.0, 0.0}}, DecayModel::exponential), InvalidInput);
}

TEST(LevelCrossing, InterpolatesLinearly) {
  const std::vector<double> t{0.0, 1.0, 2.0, 3.0};
  const std::vector<double> v{1.0, 0.8, 0.3, 0.1};
  EXPECT_NEAR(level_crossing_time(t, v, 0.55), 1.5, 1e-15);
  EXPECT_DOUBLE_EQ(level_crossing_time(t, v, 1.0), 0.0);
  EXPECT_THROW(level_crossing_time(t, v, 0.05), NumericalError);
  EXPECT_THROW(level_crossing_time({0.0, 0.0}, {1.0, 0.0}, 0.5), InvalidInput);
}

// Beta(a, b) quantile from a trapezoid CDF on a fine grid plus bisection.
double beta_quantile_oracle(double a, double b, double p) {
  const int n = 400000;
  const double lnorm = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b);
  std::vector<double> cdf(n + 1, 0.0);
  auto pdf = [&](double x) {
    if (x <= 0.0) return a == 1.0 ? std::exp(lnorm) : 0.0;
    if (x >= 1.0) return b == 1.0 ? std::exp(lnorm) : 0.0;
    return std::exp(lnorm + (a - 1) * std::log(x) + (b - 1) * std::log1p(-x));
  };
  double prev = pdf(0.0);
  for (int i = 1; i <= n; ++i) {
    const double cur = pdf(static_cast<double>(i) / n);
    cdf[i] = cdf[i - 1] + 0.5 * (prev + cur) / n;
    prev = cur;
  }
  const double total = cdf[n];
  int i = 0;
  while (i < n && cdf[i + 1] / total < p) ++i;
  const double f0 = cdf[i] / total, f1 = cdf[i + 1] / total;
  return (i + (p - f0) / (f1 - f0)) / n;
}

TEST(BetaInterval, MatchesQuadratureOracle) {
  for (auto [k, n] : {std::pair<int, int>{3, 20}, {10, 20}, {47, 200}, {0, 15}, {15, 15}}) {
    const Interval iv = beta_interval(k, n, 0.683);
    const double a = k + 1.0, b = n - k + 1.0;
    if (k == n) {
      EXPECT_DOUBLE_EQ(iv.upper, 1.0);
      EXPECT_NEAR(iv.lower, beta_quantile_oracle(a, b, 1 - 0.683), 1e-6);
    } else if (k == 0) {
      EXPECT_DOUBLE_EQ(iv.lower, 0.0);
      EXPECT_NEAR(iv.upper, beta_quantile_oracle(a, b, 0.683), 1e-6);
    } else {
      EXPECT_NEAR(iv.lower, beta_quantile_oracle(a, b, 0.5 - 0.683 / 2), 1e-6);
      EXPECT_NEAR(iv.upper, beta_quantile_oracle(a, b, 0.5 + 0.683 / 2), 1e-6);
    }
  }
  EXPECT_THROW(beta_interval(5, 4), InvalidInput);
  EXPECT_THROW(beta_interval(1, 4, 1.0), InvalidInput);
}

}  // namespace
