#include <gtest/gtest.h>

#include <cmath>

#include "fixtures.hpp"
#include "iontrap/analysis.hpp"

namespace {

using namespace iontrap;
using namespace iontrap::analysis;
using iontrap::testing::two_pi;
using iontrap::testing::yb171;

// Pure pi light at zero field: each ground state couples only to its own
// excited partner with Clebsch-Gordan weight 1/sqrt 3, both behave alike,
// so the line is a two-level Lorentzian with Rabi rate gamma sqrt(s/6).
ObeConfig two_level_config() {
  ObeConfig c;
  c.b_field = 0.0;
  c.polarization = {1.0, 0.0, 0.0};
  return c;
}

double two_level_excited(const ObeConfig& c, double detuning) {
  const double rabi2 = c.gamma * c.gamma * c.saturation / 6.0;
  return 0.25 * rabi2 / (detuning * detuning + 0.25 * c.gamma * c.gamma + 0.5 * rabi2);
}

TEST(Obe, ZeroModulationHasNoContrast) {
  ObeConfig c;
  const ObeResult r = obe_modulation_contrast(c);
  EXPECT_LT(r.contrast, 1e-6);
  EXPECT_GT(r.mean_excited, 0.0);
}

TEST(Obe, TwoLevelSteadyStateMatchesLorentzian) {
  ObeConfig c = two_level_config();
  for (double det : {0.0, -0.5, -1.5}) {
    c.detuning = det * c.gamma;
    const ObeResult r = obe_modulation_contrast(c);
    EXPECT_NEAR(r.mean_excited / two_level_excited(c, c.detuning), 1.0, 1e-6) << det;
  }
}

TEST(Obe, SlowModulationFollowsTheStaticLineshape) {
  // Adiabatic route: Fourier component of S(D + beta Omega cos theta) over
  // one cycle, evaluated from the analytic Lorentzian.
  ObeConfig c = two_level_config();
  c.omega_rf = two_pi * 0.05e6;
  c.beta = 0.25 * c.gamma / c.omega_rf;
  const int n = 4096;
  double s0 = 0.0, a1 = 0.0;
  for (int k = 0; k < n; ++k) {
    const double th = two_pi * k / n;
    const double s = two_level_excited(c, c.detuning + c.beta * c.omega_rf * std::cos(th));
    s0 += s / n;
    a1 += 2.0 * s * std::cos(th) / n;
  }
  const ObeResult r = obe_modulation_contrast(c);
  EXPECT_NEAR(r.contrast / (std::abs(a1) / s0), 1.0, 0.02);
}

TEST(Obe, InitialStateDoesNotMatter) {
  ObeConfig c;
  c.beta = 0.1;
  const ObeResult a = obe_modulation_contrast(c, 0);
  const ObeResult b = obe_modulation_contrast(c, 1);
  EXPECT_NEAR(a.contrast, b.contrast, 1e-8);
  EXPECT_NEAR(a.mean_excited, b.mean_excited, 1e-9);
  EXPECT_THROW(obe_modulation_contrast(c, 2), InvalidInput);
}

TEST(Obe, ReportsNonConvergence) {
  ObeConfig c;
  c.beta = 0.1;
  c.max_periods = 1;
  EXPECT_THROW(obe_modulation_contrast(c), NumericalError);
}

TEST(Micromotion, FieldFromBetaClosedForm) {
  const IonSpecies ion = yb171();
  const double w = two_pi * 23.24e6, k = two_pi / 369.5e-9;
  EXPECT_NEAR(rf_field_from_beta(0.1, w, k, ion), 0.1 * ion.mass * w * w / (k * ion.charge), 1e-9);
  EXPECT_DOUBLE_EQ(rf_field_from_beta(0.0, w, k, ion), 0.0);
  EXPECT_THROW(rf_field_from_beta(-0.1, w, k, ion), InvalidInput);
}

TEST(Micromotion, CalibrationRoundTripOffNodes) {
  ObeConfig base;
  const MicromotionCalibration cal = calibrate_micromotion(base, 11, 0.4);
  for (std::size_t i = 1; i < cal.contrasts.size(); ++i) {
    EXPECT_GT(cal.contrasts[i], cal.contrasts[i - 1]);
  }
  for (double beta : {0.03, 0.11, 0.23, 0.37}) {
    ObeConfig c = base;
    c.beta = beta;
    const double contrast = obe_modulation_contrast(c).contrast;
    const MicromotionEstimate e = beta_from_contrast(contrast, cal, yb171());
    EXPECT_NEAR(e.beta / beta, 1.0, 0.01) << beta;
  }
  EXPECT_THROW(beta_from_contrast(cal.contrasts.back() * 1.1, cal, yb171()), InvalidInput);
  EXPECT_THROW(calibrate_micromotion(base, 2, 0.4), InvalidInput);
}

TEST(Micromotion, ParallelCalibrationIsIdentical) {
  ObeConfig base;
  const auto a = calibrate_micromotion(base, 5, 0.2, 1);
  const auto b = calibrate_micromotion(base, 5, 0.2, 3);
  EXPECT_EQ(a.contrasts, b.contrasts);
}

}  // namespace
