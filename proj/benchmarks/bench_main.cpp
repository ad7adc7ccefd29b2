#include <benchmark/benchmark.h>

#include <random>

#include "irmap/phantom.hpp"
#include "irmap/postprocess.hpp"
#include "irmap/preprocess.hpp"
#include "irmap/random_forest.hpp"

using namespace irmap;

static void BM_FitRecovery(benchmark::State& state) {
  std::vector<double> t, v;
  std::mt19937_64 rng(1);
  std::normal_distribution<double> noise(0.0, 0.03);
  for (int k = 0; k < 60; ++k) {
    t.push_back(k);
    v.push_back(phantom::recovery_curve({36.0, 10.0, 30.0}, k) + noise(rng));
  }
  for (auto _ : state) benchmark::DoNotOptimize(preprocess::fit_recovery(v, t));
}
BENCHMARK(BM_FitRecovery);

static void BM_EstimateShift(benchmark::State& state) {
  phantom::PhantomConfig c;
  c.n_frames = 3;
  c.tumors.push_back({{160.0, 120.0, 40.0, 25.0, 0.3}, std::nullopt});
  c.shift_schedule = {{0.0, 0.0}, {1.3, -0.7}, {0.0, 0.0}};
  const auto p = phantom::generate_phantom(c, 1);
  for (auto _ : state)
    benchmark::DoNotOptimize(preprocess::estimate_shift(p.sequence.frame_view(0), p.sequence.frame_view(1), 5));
}
BENCHMARK(BM_EstimateShift)->Unit(benchmark::kMillisecond);

static void BM_ConnectedComponents(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  Grid<int> g(n, n);
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<int> pick(0, 2);
  for (auto& v : g.values()) v = pick(rng);
  for (auto _ : state) benchmark::DoNotOptimize(post::connected_components(g));
  state.SetItemsProcessed(state.iterations() * n * n);
}
BENCHMARK(BM_ConnectedComponents)->Arg(64)->Arg(320);

static void BM_RandomForestPredict(benchmark::State& state) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> d(0.0, 1.0);
  models::Matrix x(2000, 16);
  std::vector<std::uint8_t> y;
  for (std::size_t r = 0; r < 2000; ++r) {
    for (std::size_t c = 0; c < 16; ++c) x(r, c) = d(rng);
    y.push_back(x(r, 0) + 0.5 * x(r, 3) > 0.0);
  }
  const auto model = models::train_rf(x, y, {}, 4);
  std::size_t i = 0;
  for (auto _ : state) benchmark::DoNotOptimize(models::rf_predict_proba(model, x.row(i++ % 2000)));
}
BENCHMARK(BM_RandomForestPredict);
BENCHMARK_MAIN();
