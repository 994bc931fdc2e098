#include <benchmark/benchmark.h>

#include <filesystem>
#include <random>

#include "ragrec/retrieval.hpp"

namespace {

struct ScanFixture {
  ragrec::EmbeddingStore store;
  ragrec::UserHistory history;
  std::string target;

  ScanFixture(int n_items, int dim)
      : store([] {
          auto dir = std::filesystem::temp_directory_path() / "ragrec_bench_ret";
          std::filesystem::remove_all(dir);
          return ragrec::EmbeddingStore::open(dir, ragrec::Space::mixed);
        }()) {
    std::mt19937_64 rng(1);
    std::normal_distribution<double> dist(0.0, 1.0);
    for (int i = 0; i < n_items; ++i) {
      std::vector<float> v(static_cast<std::size_t>(dim));
      for (auto& x : v) x = static_cast<float>(dist(rng));
      std::string id = "i" + std::to_string(i);
      store.put(id, v);
      if (i + 1 < n_items) {
        history.events.push_back(ragrec::HistoryEvent{id, 1, i});
      } else {
        target = id;
      }
    }
  }
};

void BM_ExhaustiveTopK(benchmark::State& state) {
  static ScanFixture fixture(4096, 96);  // mixed dim of a 32/32/32 split
  ragrec::UserHistory hist;
  hist.events.assign(fixture.history.events.begin(),
                     fixture.history.events.begin() + state.range(0));
  for (auto _ : state) {
    auto top = ragrec::retrieve_relevant(hist, fixture.target, 30, fixture.store);
    benchmark::DoNotOptimize(top);
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ExhaustiveTopK)->RangeMultiplier(4)->Range(64, 4095);

void BM_Rerank(benchmark::State& state) {
  const int k = static_cast<int>(state.range(0));
  std::vector<std::string> relevant, recent;
  for (int i = 0; i < k; ++i) {
    relevant.push_back("r" + std::to_string(i));
    recent.push_back(i % 3 == 0 ? relevant[static_cast<std::size_t>(i)] : "t" + std::to_string(i));
  }
  ragrec::RerankConfig cfg;
  cfg.k = k;
  for (auto _ : state) {
    auto out = ragrec::rerank(relevant, recent, cfg);
    benchmark::DoNotOptimize(out);
  }
}
BENCHMARK(BM_Rerank)->RangeMultiplier(2)->Range(8, 256);

}  // namespace

BENCHMARK_MAIN();
