#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "ragrec/embedding_store.hpp"
#include "ragrec/error.hpp"
#include "ragrec/pipeline.hpp"
#include "ragrec/promptgen.hpp"
#include "ragrec/synthetic.hpp"

using namespace ragrec;

namespace {

struct Fixture {
  std::filesystem::path root;
  PipelineConfig config;

  explicit Fixture(const std::string& tag) {
    root = std::filesystem::temp_directory_path() / ("ragrec_pipe_" + tag);
    std::filesystem::remove_all(root);
    std::filesystem::create_directories(root);

    auto corpus = synth::make_toy_corpus({24, 16, 5, 9, 11});
    synth::write_corpus_csv(corpus, root / "interactions.csv", root / "items.csv");

    config.name = tag;
    config.seed = 123;
    config.output_dir = (root / "out").string();
    config.corpus.interactions = (root / "interactions.csv").string();
    config.corpus.items = (root / "items.csv").string();
    config.corpus.k_core = 2;
    config.gateway.embed_dim = 12;
    config.collab.dim = 6;
    config.collab.epochs = 10;
    config.collab.batch_size = 64;
    config.ssl.epochs = 8;
    config.ssl.batch_size = 8;
    config.rerank.k = 5;
    config.fusion.k_traces = 3;
    config.eval.window = 8;
  }
};

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace

TEST_CASE("the full stage chain runs and produces every artifact") {
  Fixture fx("all");
  Pipeline pipeline(fx.config);
  auto results = pipeline.run_all();
  CHECK(results.size() == Pipeline::stage_names().size());
  for (const auto& r : results) CHECK(!r.skipped);

  for (const auto& stage : Pipeline::stage_names()) {
    CHECK(std::filesystem::exists(pipeline.out("manifests/" + stage + ".json")));
  }
  CHECK(std::filesystem::exists(pipeline.out("corpus.jsonl")));
  CHECK(std::filesystem::exists(pipeline.out("cache/desc.jsonl")));
  CHECK(std::filesystem::exists(pipeline.out("cache/emb.mixed.bin")));
  CHECK(std::filesystem::exists(pipeline.out("retrieval.jsonl")));
  CHECK(std::filesystem::exists(pipeline.out("prompts.jsonl")));
  CHECK(std::filesystem::exists(pipeline.out("it_dataset.jsonl")));
  CHECK(std::filesystem::exists(pipeline.out("metrics.json")));
  CHECK(std::filesystem::exists(pipeline.out("analysis_length.csv")));
  CHECK(std::filesystem::exists(pipeline.out("analysis_variance.csv")));

  SUBCASE("a second run is fully skipped via manifests") {
    auto again = pipeline.run_all();
    for (const auto& r : again) CHECK(r.skipped);
  }

  SUBCASE("a config change invalidates downstream manifests") {
    Pipeline changed([&] {
      auto cfg = fx.config;
      cfg.rerank.gamma = 0.5;
      return cfg;
    }());
    auto result = changed.run_stage("retrieve");
    CHECK(!result.skipped);
  }

  SUBCASE("the instruction-tuning dataset loads back") {
    auto examples = load_it_dataset(pipeline.out("it_dataset.jsonl"));
    CHECK(!examples.empty());
    for (const auto& ex : examples) {
      CHECK((ex.completion == "Yes" || ex.completion == "No"));
      CHECK(!ex.prompt.empty());
    }
  }

  SUBCASE("every mixed embedding shares one dimension") {
    auto store = EmbeddingStore::open(pipeline.out("cache"), Space::mixed);
    CHECK(store.size() > 0);
    CHECK(store.dim() == 2 * fx.config.gateway.embed_dim + 2 * fx.config.collab.dim);
  }
}

TEST_CASE("running a stage before its dependencies names the missing stage") {
  Fixture fx("deps");
  Pipeline pipeline(fx.config);
  for (const char* stage : {"ingest", "describe", "embed-text", "train-collab", "train-ssl"}) {
    pipeline.run_stage(stage);
  }
  CHECK_THROWS_WITH_AS(pipeline.run_stage("retrieve"), doctest::Contains("mix"), DataError);
}

TEST_CASE("same seed gives bit-identical metrics, different seed differs") {
  Fixture fx("detA");
  Pipeline a(fx.config);
  a.run_all();

  auto cfg_b = fx.config;
  cfg_b.output_dir = (fx.root / "out_b").string();
  Pipeline b(cfg_b);
  b.run_all();

  CHECK(slurp(a.out("metrics.json")) == slurp(b.out("metrics.json")));
  CHECK(slurp(a.out("predictions.jsonl")) == slurp(b.out("predictions.jsonl")));

  auto cfg_c = fx.config;
  cfg_c.seed = 999;
  cfg_c.output_dir = (fx.root / "out_c").string();
  Pipeline c(cfg_c);
  c.run_all();
  CHECK(slurp(a.out("metrics.json")) != slurp(c.out("metrics.json")));
}

TEST_CASE("an invalid config is rejected at pipeline construction") {
  Fixture fx("badcfg");
  fx.config.rerank.gamma = 2.0;
  CHECK_THROWS_AS(Pipeline{fx.config}, DataError);
}
