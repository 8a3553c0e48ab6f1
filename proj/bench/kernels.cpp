// Serial reference vs OpenMP kernels. Thread count from OMP_NUM_THREADS.

#include <benchmark/benchmark.h>

#include <memory>
#include <vector>

#include "stochparam/harness.hpp"
#include "stochparam/scores.hpp"

using namespace stochparam;

namespace {

std::vector<double> normals(std::size_t n, std::uint64_t seed) {
  RngStream rng(seed);
  std::vector<double> v(n);
  for (auto& x : v) x = rng.normal();
  return v;
}

void BM_kde_binned(benchmark::State& state) {
  const auto s = normals(static_cast<std::size_t>(state.range(0)), 1);
  for (auto _ : state) benchmark::DoNotOptimize(kde_fit(s, 2048));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_kde_binned)->Arg(10'000)->Arg(1'000'000);

void BM_kde_direct(benchmark::State& state) {
  const auto s = normals(static_cast<std::size_t>(state.range(0)), 1);
  for (auto _ : state) benchmark::DoNotOptimize(kde_fit_direct(s, 2048));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_kde_direct)->Arg(10'000);

void BM_energy_score(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto m = normals(n * 8, 2);
  const auto y = normals(8, 3);
  for (auto _ : state) benchmark::DoNotOptimize(energy_score(m, 8, y));
}
BENCHMARK(BM_energy_score)->Arg(50)->Arg(500)->Arg(2000);

void BM_energy_score_serial(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto m = normals(n * 8, 2);
  const auto y = normals(8, 3);
  for (auto _ : state) benchmark::DoNotOptimize(energy_score_serial(m, 8, y));
}
BENCHMARK(BM_energy_score_serial)->Arg(50)->Arg(500)->Arg(2000);

void BM_autocov_fft(benchmark::State& state) {
  const auto s = normals(static_cast<std::size_t>(state.range(0)), 4);
  for (auto _ : state) benchmark::DoNotOptimize(empirical_autocov(s, 1e-2, 10.0));
}
BENCHMARK(BM_autocov_fft)->Arg(100'000)->Arg(1'000'000);

void BM_autocov_serial(benchmark::State& state) {
  const auto s = normals(static_cast<std::size_t>(state.range(0)), 4);
  for (auto _ : state) benchmark::DoNotOptimize(empirical_autocov_serial(s, 1e-2, 10.0));
}
BENCHMARK(BM_autocov_serial)->Arg(100'000)->Arg(1'000'000);

struct EnsembleFixture {
  ReducedModel model = l96_reduced_model();
  PairDataset truth;
  ParamSpec spec;
  EnsembleFixture() {
    ClimateDatasetRequest req;
    req.length = 3.0;
    req.spinup = 1.0;
    truth = generate_climate_dataset(req);
    spec = {std::make_shared<ScalarArForcing>(Ar1Spec{0.99, 1e-4}, 8), 1};
  }
};

const EnsembleFixture& fixture() {
  static const EnsembleFixture f;
  return f;
}

void BM_ensemble(benchmark::State& state) {
  const auto& f = fixture();
  const auto n = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(run_ensemble(f.model, f.truth, 0, 1000, f.spec, n, RngStream(5)));
  state.SetItemsProcessed(state.iterations() * state.range(0) * 1000);
}
BENCHMARK(BM_ensemble)->Arg(50)->Unit(benchmark::kMillisecond);

void BM_ensemble_serial(benchmark::State& state) {
  const auto& f = fixture();
  const auto n = static_cast<std::size_t>(state.range(0));
  for (auto _ : state)
    benchmark::DoNotOptimize(run_ensemble_serial(f.model, f.truth, 0, 1000, f.spec, n, RngStream(5)));
  state.SetItemsProcessed(state.iterations() * state.range(0) * 1000);
}
BENCHMARK(BM_ensemble_serial)->Arg(50)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
