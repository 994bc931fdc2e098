#include <benchmark/benchmark.h>

#include <random>

#include "ragrec/evalkit.hpp"

namespace {

std::vector<ragrec::EvalRecord> make_records(int n) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<ragrec::EvalRecord> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    ragrec::EvalRecord r;
    r.sample_id = "s" + std::to_string(i);
    r.score = unit(rng);
    r.label = static_cast<int>(rng() % 2);
    r.response_length = static_cast<int>(rng() % 2000);
    r.variance = 0.25 * unit(rng);
    out.push_back(std::move(r));
  }
  out[0].label = 1;
  out[1].label = 0;
  return out;
}

void BM_Auc(benchmark::State& state) {
  auto records = make_records(static_cast<int>(state.range(0)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(ragrec::auc(records));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Auc)->RangeMultiplier(4)->Range(1024, 65536);

void BM_VarianceWindows(benchmark::State& state) {
  auto records = make_records(static_cast<int>(state.range(0)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(ragrec::variance_window_analysis(records, 500));
  }
}
BENCHMARK(BM_VarianceWindows)->RangeMultiplier(4)->Range(1024, 65536);

}  // namespace

BENCHMARK_MAIN();
