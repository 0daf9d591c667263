#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include <boost/math/distributions/beta.hpp>

#include "fixtures.hpp"
#include "iontrap/analysis.hpp"
#include "iontrap/rng.hpp"

namespace {

using namespace iontrap;
using namespace iontrap::analysis;
using iontrap::testing::pi;

Eigen::Matrix3d reference_spam() {
  Eigen::Matrix3d m;
  m << 0.9865, 0.0070, 0.0, 0.0135, 0.9840, 0.0475, 0.0, 0.0090, 0.9525;
  return m;
}

Histogram poisson_histogram(double mean, std::size_t shots, std::uint64_t seed) {
  Rng rng(seed);
  std::poisson_distribution<std::uint32_t> d(mean);
  std::vector<std::uint32_t> c(shots);
  for (auto& v : c) v = d(rng);
  return histogram_from_counts(c);
}

TEST(Histogram, CountsPerBin) {
  const Histogram h = histogram_from_counts({0, 2, 2, 5});
  ASSERT_EQ(h.size(), 6u);
  EXPECT_EQ(h[0], 1u);
  EXPECT_EQ(h[2], 2u);
  EXPECT_EQ(h[5], 1u);
  EXPECT_EQ(classify_counts(1, 2, 5), 0);
  EXPECT_EQ(classify_counts(2, 2, 5), 1);
  EXPECT_EQ(classify_counts(5, 2, 5), 2);
}

TEST(Thresholds, SeparatedHistogramsGiveIdentity) {
  std::array<Histogram, 3> h;
  h[0] = {50, 30};
  h[1] = {0, 0, 0, 40, 40};
  h[2] = {0, 0, 0, 0, 0, 0, 0, 60, 20};
  const ThresholdResult r = optimize_thresholds(h);
  EXPECT_DOUBLE_EQ(r.fidelity_product, 1.0);
  EXPECT_TRUE(r.spam.m.isApprox(Eigen::Matrix3d::Identity()));
  EXPECT_EQ(r.t1, 2u);
  EXPECT_EQ(r.t2, 5u);
}

TEST(Thresholds, MatchBruteForceOverRawShots) {
  std::array<Histogram, 3> h{poisson_histogram(0.4, 2000, 1), poisson_histogram(9.0, 2000, 2),
                             poisson_histogram(18.0, 2000, 3)};
  ThresholdOptions opt;
  opt.dirichlet_samples = 2000;
  const ThresholdResult r = optimize_thresholds(h, opt);
  // Oracle: classify every bin for every pair and recompute the fidelities.
  double best = -1.0;
  std::uint32_t b1 = 0, b2 = 0;
  for (std::uint32_t t1 = 1; t1 < 40; ++t1) {
    for (std::uint32_t t2 = t1 + 1; t2 < 40; ++t2) {
      double prod = 1.0;
      for (int s = 0; s < 3; ++s) {
        double hit = 0.0, n = 0.0;
        for (std::size_t c = 0; c < h[s].size(); ++c) {
          n += static_cast<double>(h[s][c]);
          if (classify_counts(static_cast<std::uint32_t>(c), t1, t2) == s) hit += static_cast<double>(h[s][c]);
        }
        prod *= hit / n;
      }
      if (prod > best + 1e-15) {
        best = prod;
        b1 = t1;
        b2 = t2;
      }
    }
  }
  EXPECT_NEAR(r.fidelity_product, best, 1e-12);
  EXPECT_EQ(r.t1, b1);
  EXPECT_EQ(r.t2, b2);
  EXPECT_NO_THROW(r.spam.validate());
}

TEST(Thresholds, DirichletIntervalsMatchBetaMarginals) {
  std::array<Histogram, 3> h{poisson_histogram(0.4, 2000, 4), poisson_histogram(9.0, 2000, 5),
                             poisson_histogram(18.0, 2000, 6)};
  ThresholdOptions opt;
  opt.dirichlet_samples = 20000;
  opt.seed = 11;
  const ThresholdResult r = optimize_thresholds(h, opt);
  // Dirichlet(counts + 1) marginals are Beta(n_r + 1, N - n_r + 2).
  for (int c = 0; c < 3; ++c) {
    for (int row = 0; row < 3; ++row) {
      const double n = 2000.0, k = std::round(r.spam.m(row, c) * n);
      const boost::math::beta_distribution<double> b(k + 1.0, n - k + 2.0);
      EXPECT_NEAR(r.spam.lower(row, c), boost::math::quantile(b, 0.1585), 1.5e-3) << row << c;
      EXPECT_NEAR(r.spam.upper(row, c), boost::math::quantile(b, 0.8415), 1.5e-3) << row << c;
    }
  }
  const ThresholdResult again = optimize_thresholds(h, opt);
  EXPECT_EQ(again.spam.lower, r.spam.lower);
}

TEST(CountRecord, ParsesAndGroupsByPhase) {
  std::istringstream in("# comment\nphase_rad,counts\n0.0,1\n0.5,12\n0.0,7\n0.5,30\n");
  const CountRecord rec = read_count_record(in, 3, 20);
  ASSERT_EQ(rec.phases.size(), 2u);
  const auto pts = rec.classify();
  EXPECT_EQ(pts[0].counts, (std::array<std::uint64_t, 3>{1, 1, 0}));
  EXPECT_EQ(pts[1].counts, (std::array<std::uint64_t, 3>{0, 1, 1}));
  EXPECT_DOUBLE_EQ(empirical_parity(pts[1]), 0.0);
  std::istringstream bad("phase_rad,counts\n0.0,-1\n");
  EXPECT_THROW(read_count_record(bad, 3, 20), InvalidInput);
  std::istringstream nohead("0.0,1\n");
  EXPECT_THROW(read_count_record(nohead, 3, 20), InvalidInput);
}

// Multinomial parity data through M at the standard analysis phases.
std::vector<PhasePoint> synthetic_parity(double contrast, double phase, const Eigen::Matrix3d& m,
                                         std::uint64_t shots, std::uint64_t seed) {
  std::vector<PhasePoint> data;
  for (int k = 0; k < 20; ++k) {
    PhasePoint p;
    p.phase = pi * k / 20.0;
    const double par = contrast * std::cos(2.0 * p.phase + phase);
    const Eigen::Vector3d ideal(0.25 * (1 + par), 0.5 * (1 - par), 0.25 * (1 + par));
    const Eigen::Vector3d obs = m * ideal;
    Rng rng = Rng::stream(seed, static_cast<std::uint64_t>(k));
    std::discrete_distribution<int> d({obs[0], obs[1], obs[2]});
    for (std::uint64_t s = 0; s < shots; ++s) ++p.counts[static_cast<std::size_t>(d(rng))];
    data.push_back(p);
  }
  return data;
}

TEST(MleParity, IdentitySpamMakesCorrectionANoop) {
  const auto data = synthetic_parity(0.9, 0.4, Eigen::Matrix3d::Identity(), 300, 3);
  SpamMatrix id;
  const auto a = mle_parity_fit(data, id, true);
  const auto b = mle_parity_fit(data, id, false);
  EXPECT_NEAR(a.contrast, b.contrast, 1e-8);
  EXPECT_NEAR(a.phase, b.phase, 1e-6);
  EXPECT_NEAR(a.nll, b.nll, 1e-8);
}

TEST(MleParity, RecoversContrastAndPhaseWithLargeSamples) {
  SpamMatrix spam;
  spam.m = reference_spam();
  const auto data = synthetic_parity(0.95, 0.3, spam.m, 20000, 9);
  const auto fit = mle_parity_fit(data, spam, true);
  EXPECT_NEAR(fit.contrast, 0.95, 4 * fit.sigma);
  EXPECT_LT(fit.sigma, 0.01);
  EXPECT_NEAR(fit.phase, 0.3, 0.02);
  EXPECT_LE(fit.upper, 1.0);
  EXPECT_LT(fit.lower, fit.contrast);
  const auto raw = mle_parity_fit(data, spam, false);
  EXPECT_LT(raw.contrast, fit.contrast - 0.02);
}

TEST(MleParity, OptimumBeatsTruthAndIsMaximal) {
  SpamMatrix spam;
  spam.m = reference_spam();
  const auto data = synthetic_parity(0.8, -0.7, spam.m, 200, 21);
  const auto fit = mle_parity_fit(data, spam, true);
  // Oracle likelihood straight from the model definition.
  auto nll = [&](double c, double ph, double b) {
    double s = 0.0;
    for (const auto& p : data) {
      const double par = b + c * std::cos(2.0 * p.phase + ph);
      const Eigen::Vector3d obs = spam.m * Eigen::Vector3d(0.25 * (1 + par), 0.5 * (1 - par),
                                                           0.25 * (1 + par));
      for (int j = 0; j < 3; ++j) s -= static_cast<double>(p.counts[j]) * std::log(obs[j]);
    }
    return s;
  };
  EXPECT_NEAR(fit.nll, nll(fit.contrast, fit.phase, fit.offset), 1e-8);
  EXPECT_LE(fit.nll, nll(0.8, -0.7, 0.0) + 1e-9);
  for (double dc : {-0.01, 0.01}) {
    EXPECT_GT(nll(fit.contrast + dc, fit.phase, fit.offset), fit.nll);
  }
}

TEST(MleParity, TruncatedIntervalAtFullContrast) {
  SpamMatrix id;
  const auto data = synthetic_parity(1.0, 0.0, Eigen::Matrix3d::Identity(), 100, 2);
  const auto fit = mle_parity_fit(data, id, false);
  EXPECT_LE(fit.upper, 1.0);
  EXPECT_LE(fit.lower, fit.contrast);
}

TEST(MleParity, ValidatesInput) {
  SpamMatrix bad;
  bad.m(0, 0) = 0.5;
  const auto data = synthetic_parity(0.9, 0.0, Eigen::Matrix3d::Identity(), 50, 1);
  EXPECT_THROW(mle_parity_fit(data, bad, true), InvalidInput);
  EXPECT_THROW(mle_parity_fit({data[0], data[1]}, SpamMatrix{}, false), InvalidInput);
}

}  // namespace
