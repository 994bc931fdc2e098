#include <benchmark/benchmark.h>

#include <random>

#include "ragrec/collab.hpp"

namespace {

ragrec::BipartiteGraph make_graph(int users, int items, int events_per_user) {
  std::mt19937_64 rng(7);
  ragrec::Corpus corpus;
  std::int64_t ts = 1;
  for (int u = 0; u < users; ++u) {
    for (int e = 0; e < events_per_user; ++e) {
      corpus.add_interaction(ragrec::Interaction{
          "u" + std::to_string(u), "i" + std::to_string(rng() % items), 5, ts++, 1});
    }
  }
  return ragrec::BipartiteGraph::from_corpus(corpus);
}

void BM_Propagate(benchmark::State& state) {
  const int users = static_cast<int>(state.range(0));
  auto graph = make_graph(users, users / 2, 20);
  const int dim = 64;
  std::mt19937_64 rng(3);
  std::normal_distribution<double> dist(0.0, 0.1);
  Eigen::MatrixXd user0(graph.user_count(), dim), item0(graph.item_count(), dim);
  for (Eigen::Index r = 0; r < user0.rows(); ++r) {
    for (int c = 0; c < dim; ++c) user0(r, c) = dist(rng);
  }
  for (Eigen::Index r = 0; r < item0.rows(); ++r) {
    for (int c = 0; c < dim; ++c) item0(r, c) = dist(rng);
  }

  for (auto _ : state) {
    auto result = ragrec::propagate(graph, user0, item0, 2);
    benchmark::DoNotOptimize(result.item_mean);
  }
  state.SetItemsProcessed(state.iterations() * static_cast<long>(graph.edges.size()));
}
BENCHMARK(BM_Propagate)->RangeMultiplier(2)->Range(128, 2048);

void BM_BprEpoch(benchmark::State& state) {
  auto graph = make_graph(256, 128, 16);
  ragrec::CollabTrainConfig cfg;
  cfg.dim = static_cast<int>(state.range(0));
  cfg.epochs = 1;
  cfg.batch_size = 512;
  cfg.lr = 0.1;
  for (auto _ : state) {
    auto params = ragrec::train_bpr(graph, cfg);
    benchmark::DoNotOptimize(params.item_emb);
  }
}
BENCHMARK(BM_BprEpoch)->RangeMultiplier(2)->Range(16, 128);

}  // namespace

BENCHMARK_MAIN();
