#include <benchmark/benchmark.h>

#include "iontrap/analysis.hpp"
#include "iontrap/field_model.hpp"
#include "iontrap/ion_chain.hpp"
#include "iontrap/quantum.hpp"
#include "iontrap/trajectory.hpp"
#include "iontrap/trap_model.hpp"

namespace {

using namespace iontrap;
constexpr double kTwoPi = constants::two_pi;

trap::TrapConfig blade(double v_rf) {
  trap::TrapConfig t;
  t.d = 250e-6;
  t.kappa = 0.83;
  t.omega_rf = kTwoPi * 23.24e6;
  t.v_rf = v_rf;
  return t;
}

void BM_MathieuParameters(benchmark::State& state) {
  const auto t = blade(483.0);
  const auto ion = species::ytterbium_171();
  for (auto _ : state) benchmark::DoNotOptimize(trap::secular_frequencies(t, ion));
}
BENCHMARK(BM_MathieuParameters);

void BM_TrajectoryRfPeriods(benchmark::State& state) {
  const auto t = blade(483.0);
  const auto f = trap::FieldModel::ideal_quadrupole(t, t.d);
  trap::IntegrationOptions opt;
  opt.record_stride = 0;
  const double duration = static_cast<double>(state.range(0)) * kTwoPi / t.omega_rf;
  for (auto _ : state) {
    benchmark::DoNotOptimize(trap::integrate_trajectory(f, species::ytterbium_171(),
                                                        trap::Vec3{5e-6, 0, 0}, trap::Vec3::Zero(),
                                                        duration, opt));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0) * trap::kDefaultStepsPerRfPeriod);
}
BENCHMARK(BM_TrajectoryRfPeriods)->Arg(100)->Arg(1000);

void BM_ChainEquilibrium(benchmark::State& state) {
  const auto ion = species::ytterbium_171();
  const auto pot = chain::AxialPotential::harmonic(kTwoPi * 0.2e6, ion);
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        chain::solve_chain(static_cast<int>(state.range(0)), pot, kTwoPi * 3e6, ion));
  }
}
BENCHMARK(BM_ChainEquilibrium)->Arg(5)->Arg(19)->Arg(50);

void BM_LindbladRamsey(benchmark::State& state) {
  const auto noise = quantum::NoiseModel::from_heating_rate(10.0, 2.08e6);
  quantum::RamseyOptions opt;
  opt.cutoff = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(quantum::ramsey_contrast_curve(noise, {0.05}, false, opt));
  }
}
BENCHMARK(BM_LindbladRamsey)->Arg(10)->Arg(30)->Unit(benchmark::kMillisecond);

void BM_MolmerSorensenLoop(benchmark::State& state) {
  quantum::MsParams p;
  p.eta_omega = kTwoPi * 5.47e3;
  p.delta = kTwoPi * 10.94e3;
  p.nbar = 0.05;
  for (auto _ : state) {
    benchmark::DoNotOptimize(quantum::molmer_sorensen_evolve(p, {kTwoPi / p.delta}));
  }
}
BENCHMARK(BM_MolmerSorensenLoop)->Unit(benchmark::kMillisecond);

void BM_AllanDeviation(benchmark::State& state) {
  std::vector<double> y(static_cast<std::size_t>(state.range(0)));
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = std::sin(0.37 * static_cast<double>(i));
  std::vector<double> taus;
  for (double tau = 1.0; tau <= 0.5 * static_cast<double>(y.size()); tau *= 2.0) taus.push_back(tau);
  for (auto _ : state) benchmark::DoNotOptimize(analysis::allan_deviation(y, 1.0, taus));
}
BENCHMARK(BM_AllanDeviation)->Arg(1 << 10)->Arg(1 << 16);

void BM_ObeContrast(benchmark::State& state) {
  analysis::ObeConfig c;
  c.beta = 0.1;
  for (auto _ : state) benchmark::DoNotOptimize(analysis::obe_modulation_contrast(c));
}
BENCHMARK(BM_ObeContrast)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
