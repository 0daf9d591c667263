#include <gtest/gtest.h>

#include <cmath>

#include <unsupported/Eigen/KroneckerProduct>
#include <unsupported/Eigen/MatrixFunctions>

#include "fixtures.hpp"
#include "iontrap/quantum.hpp"
#include "iontrap/rng.hpp"

namespace {

using namespace iontrap;
using namespace iontrap::quantum;
using iontrap::testing::two_pi;

// Column-major vectorization: vec(A X B) = (B^T kron A) vec(X).
Matrix liouvillian(std::size_t cutoff, const NoiseModel& n, const Matrix& h) {
  const FockSpace f = build_fock_space(cutoff);
  const Matrix a = f.annihilation(), ad = f.creation(), num = f.number();
  const auto d = static_cast<Eigen::Index>(cutoff);
  const Matrix id = Matrix::Identity(d, d);
  auto sandwich = [&](const Matrix& l, const Matrix& r) -> Matrix {
    return Eigen::kroneckerProduct(r.transpose(), l).eval();
  };
  auto dissipator = [&](const Matrix& jump) -> Matrix {
    const Matrix jj = jump.adjoint() * jump;
    return sandwich(jump, jump.adjoint()) - 0.5 * sandwich(jj, id) - 0.5 * sandwich(id, jj);
  };
  Matrix l = cplx(0, -1) * (sandwich(h, id) - sandwich(id, h));
  l += n.gamma_a * n.nbar_bath * dissipator(ad);
  l += n.gamma_a * (n.nbar_bath + 1.0) * dissipator(a);
  l += n.gamma_p * dissipator(num);
  return l;
}

Matrix propagate_exact(const Matrix& rho0, std::size_t cutoff, const NoiseModel& n, const Matrix& h,
                       double t) {
  const Matrix l = liouvillian(cutoff, n, h);
  const Eigen::VectorXcd v0 = Eigen::Map<const Eigen::VectorXcd>(rho0.data(), rho0.size());
  const Matrix prop = (l * t).exp();
  const Eigen::VectorXcd v = prop * v0;
  const auto d = static_cast<Eigen::Index>(cutoff);
  return Eigen::Map<const Matrix>(v.data(), d, d);
}

TEST(Fock, CanonicalCommutatorBelowTopLevel) {
  const FockSpace f = build_fock_space(8);
  const Matrix c = f.annihilation() * f.creation() - f.creation() * f.annihilation();
  for (int i = 0; i < 7; ++i) EXPECT_NEAR(std::abs(c(i, i) - 1.0), 0.0, 1e-14);
  EXPECT_NEAR(c(7, 7).real(), -7.0, 1e-14);
  EXPECT_LT((f.number() - f.creation() * f.annihilation()).norm(), 1e-14);
}

TEST(States, ThermalStateMeanAndNormalization) {
  const Layout l{1, 60};
  const Matrix rho = thermal_state(l, 1.7);
  EXPECT_NO_THROW(check_density_matrix(rho));
  EXPECT_NEAR(mean_phonon_number(rho, l), 1.7, 1e-6);
  const auto p = thermal_populations(0.0, 4);
  EXPECT_DOUBLE_EQ(p[0], 1.0);
  EXPECT_DOUBLE_EQ(p[1], 0.0);
  EXPECT_THROW(fock_state(l, 60), InvalidInput);
}

TEST(States, DensityMatrixChecks) {
  Matrix rho = Matrix::Zero(2, 2);
  rho(0, 0) = 1.0;
  EXPECT_NO_THROW(check_density_matrix(rho));
  rho(0, 1) = 0.3;
  EXPECT_THROW(check_density_matrix(rho), InvalidInput);
  rho(1, 0) = 0.3;
  EXPECT_THROW(check_density_matrix(rho), InvalidInput);  // negative eigenvalue
  Matrix half = 0.5 * Matrix::Identity(2, 2);
  half(0, 0) = 0.6;
  EXPECT_THROW(check_density_matrix(half), InvalidInput);
}

TEST(ThermalOccupation, RoomTemperatureLimit) {
  const double w = two_pi * 3e6;
  const double classical = constants::boltzmann * 300.0 / (constants::hbar * w);
  EXPECT_NEAR(thermal_occupation(w, 300.0) / (classical - 0.5), 1.0, 1e-9);
  EXPECT_THROW(thermal_occupation(-1.0), InvalidInput);
}

TEST(Lindblad, MatchesSuperoperatorExponential) {
  // Independent route: exp(L t) assembled from Kronecker products.
  const std::size_t cutoff = 7;
  const NoiseModel noise{0.8, 0.6, 0.3};
  const FockSpace f = build_fock_space(cutoff);
  const Matrix h = 2.5 * f.number() + 0.4 * (f.annihilation() + f.creation());
  Rng rng(5);
  Matrix psi = Matrix::Zero(static_cast<Eigen::Index>(cutoff), 1);
  for (Eigen::Index i = 0; i < 4; ++i) psi(i) = cplx(rng.uniform() - 0.5, rng.uniform() - 0.5);
  psi /= psi.norm();
  const Matrix rho0 = psi * psi.adjoint();
  const Layout layout{1, cutoff};
  const double t = 1.3;
  const auto r = lindblad_evolve(rho0, layout, noise, h, t);
  const Matrix exact = propagate_exact(rho0, cutoff, noise, h, t);
  EXPECT_LT((r.rho - exact).cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_LT(r.trace_drift, 1e-12);
  EXPECT_NO_THROW(check_density_matrix(r.rho));
}

TEST(Lindblad, MeanPhononNumberRelaxesToBath) {
  // d<n>/dt = gamma_a (nbar - <n>) away from the truncation edge.
  const Layout layout{1, 45};
  const NoiseModel noise{1.0, 5.0, 0.0};
  const double t = 0.5;
  const auto r = lindblad_evolve(fock_state(layout, 0), layout, noise, std::nullopt, t);
  EXPECT_NEAR(mean_phonon_number(r.rho, layout), 5.0 * (1.0 - std::exp(-t)), 1e-6);
  EXPECT_FALSE(r.saturated);
}

TEST(Lindblad, LinearHeatingRateAtLargeBathOccupation) {
  const Layout layout{1, 30};
  const auto noise = NoiseModel::from_heating_rate(50.0, 2e6);
  const double t = 2e-3;
  const auto r = lindblad_evolve(thermal_state(layout, 0.05), layout, noise, std::nullopt, t);
  EXPECT_NEAR(mean_phonon_number(r.rho, layout), 0.05 + 50.0 * t, 1e-6);
}

TEST(Lindblad, ThermalStateAtBathTemperatureIsStationary) {
  const Layout layout{1, 30};
  const NoiseModel noise{3.0, 0.4, 0.7};
  const Matrix rho0 = thermal_state(layout, 0.4);
  const auto r = lindblad_evolve(rho0, layout, noise, std::nullopt, 0.5);
  EXPECT_LT((r.rho - rho0).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Lindblad, SnapshotsMatchIndependentRuns) {
  const Layout layout{1, 10};
  const NoiseModel noise{0.5, 1.0, 0.2};
  const Matrix rho0 = fock_state(layout, 1);
  const auto snaps = lindblad_snapshots(rho0, layout, noise, std::nullopt, {0.0, 0.3, 0.3, 1.0});
  ASSERT_EQ(snaps.size(), 4u);
  EXPECT_LT((snaps[0].rho - rho0).norm(), 1e-15);
  EXPECT_LT((snaps[1].rho - snaps[2].rho).norm(), 1e-15);
  const auto direct = lindblad_evolve(rho0, layout, noise, std::nullopt, 1.0);
  EXPECT_LT((snaps[3].rho - direct.rho).cwiseAbs().maxCoeff(), 1e-8);
  EXPECT_THROW(lindblad_snapshots(rho0, layout, noise, std::nullopt, {0.5, 0.2}), InvalidInput);
}

TEST(Lindblad, SaturationFlagAndStepGuard) {
  const Layout layout{1, 6};
  const NoiseModel noise{1.0, 20.0, 0.0};
  const auto r = lindblad_evolve(fock_state(layout, 0), layout, noise, std::nullopt, 1.0);
  EXPECT_TRUE(r.saturated);
  EXPECT_THROW(lindblad_evolve(fock_state(layout, 0), layout, noise, std::nullopt, 1.0, 0.1),
               InvalidInput);
  EXPECT_THROW(lindblad_evolve(fock_state(layout, 0), layout, NoiseModel{-1.0, 0.0, 0.0},
                               std::nullopt, 1.0),
               InvalidInput);
}

TEST(Rates, T2FromRates) {
  EXPECT_NEAR(t2_from_rates(1.6, two_pi * 2.3), 95.9e-3, 1e-4);
  EXPECT_NEAR(t2_from_rates(50.0, 0.0), 10e-3, 1e-12);
  EXPECT_NEAR(t2_from_rates(0.0, 4.0), 0.5, 1e-15);
  EXPECT_THROW(t2_from_rates(0.0, 0.0), InvalidInput);
}

TEST(Ramsey, PureDephasingContrastIsExponential) {
  // D_p damps rho_01 at gamma_p / 2 exactly, independent of the cutoff.
  const NoiseModel noise{0.0, 0.0, 40.0};
  const std::vector<double> waits{0.0, 0.01, 0.05, 0.1};
  const auto c = ramsey_contrast_curve(noise, waits, false, {4});
  for (std::size_t k = 0; k < waits.size(); ++k) {
    EXPECT_NEAR(c[k], std::exp(-20.0 * waits[k]), 1e-9);
  }
}

TEST(Ramsey, ZeroTemperatureDampingHalvesTheRate) {
  const NoiseModel noise{10.0, 0.0, 0.0};
  const auto c = ramsey_contrast_curve(noise, {0.08}, false, {6});
  EXPECT_NEAR(c[0], std::exp(-5.0 * 0.08), 1e-9);
}

TEST(Ramsey, EchoCancelsStaticDetuning) {
  RamseyOptions opt;
  opt.cutoff = 4;
  opt.detuning = two_pi * 50.0;
  std::vector<double> phases;
  for (int k = 0; k < 16; ++k) phases.push_back(two_pi * k / 16);
  const NoiseModel quiet{};
  const double t = 20e-3;
  const auto echo = simulate_motional_ramsey(quiet, t, true, phases, opt);
  EXPECT_NEAR(echo.contrast, 1.0, 1e-6);
  const double t_plain = 13e-3;
  const auto plain = simulate_motional_ramsey(quiet, t_plain, false, phases, opt);
  const auto ref = simulate_motional_ramsey(quiet, 0.0, false, phases, opt);
  EXPECT_NEAR(plain.contrast, 1.0, 1e-6);
  const double shift = std::remainder(plain.fringe_phase - ref.fringe_phase, two_pi);
  EXPECT_NEAR(std::abs(shift), std::abs(std::remainder(two_pi * 50.0 * t_plain, two_pi)), 1e-6);
}

TEST(Ramsey, NumericT2BracketedByRateEstimate) {
  // Under heating the 1/e time sits between the rate estimate and twice it.
  const double nbar_bath = thermal_occupation(two_pi * 3e6, 300.0);
  for (double rate : {3.0, 30.0}) {
    const auto noise = NoiseModel::from_heating_rate(rate, nbar_bath);
    const double t2 = t2_from_rates(rate, 0.0);
    const auto c = ramsey_contrast_curve(noise, {t2, 2.2 * t2}, false);
    EXPECT_GT(c[0], std::exp(-1.0)) << rate;
    EXPECT_LT(c[1], std::exp(-1.0)) << rate;
  }
}

}  // namespace
