#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>

#include "ragrec/config.hpp"
#include "ragrec/error.hpp"
#include "ragrec/synthetic.hpp"

using namespace ragrec;

namespace {

std::string toy_files_json() {
  auto dir = std::filesystem::temp_directory_path() / "ragrec_cfg_toy";
  std::filesystem::create_directories(dir);
  auto corpus = synth::make_toy_corpus({20, 12, 4, 8, 3});
  synth::write_corpus_csv(corpus, dir / "interactions.csv", dir / "items.csv");
  return std::string("{\n"
                     "  \"seed\": 7,\n"
                     "  \"output_dir\": \"") +
         (dir / "out").string() + "\",\n" +
         "  \"corpus\": {\"interactions\": \"" + (dir / "interactions.csv").string() +
         "\", \"items\": \"" + (dir / "items.csv").string() + "\", \"k_core\": 2}\n}";
}

}  // namespace

TEST_CASE("defaults mirror the documented experiment settings") {
  PipelineConfig cfg;
  CHECK(cfg.rerank.k == 30);
  CHECK(cfg.rerank.beta == 1.0);
  CHECK(cfg.rerank.gamma == doctest::Approx(2.0 / 3.0));
  CHECK(cfg.fusion.alpha == doctest::Approx(0.1));
  CHECK(cfg.fusion.epsilon == doctest::Approx(1e-3));
  CHECK(cfg.fusion.temperature == doctest::Approx(0.6));
  CHECK(cfg.fusion.k_traces == 5);
  CHECK(cfg.corpus.k_core == 5);
  CHECK(cfg.corpus.threshold == 4);
}

TEST_CASE("json parsing, seed derivation, and canonical round-trip") {
  auto cfg = PipelineConfig::from_json_text(toy_files_json(), "inline");
  CHECK(cfg.seed == 7);
  CHECK(cfg.corpus.k_core == 2);

  // Per-stage seeds derive from the global seed but differ by stage.
  CHECK(cfg.collab.seed != cfg.ssl.seed);
  auto cfg2 = PipelineConfig::from_json_text(toy_files_json(), "inline");
  CHECK(cfg.collab.seed == cfg2.collab.seed);

  // Canonical text reparses to the same canonical text.
  auto reparsed = PipelineConfig::from_json_text(cfg.to_json_text(), "roundtrip");
  CHECK(reparsed.to_json_text() == cfg.to_json_text());
  CHECK(config_hash(reparsed) == config_hash(cfg));
}

TEST_CASE("explicit stage seed overrides the derivation") {
  std::string text = toy_files_json();
  text.insert(text.rfind('}'), ", \"collab\": {\"seed\": 12345}");
  auto cfg = PipelineConfig::from_json_text(text, "inline");
  CHECK(cfg.collab.seed == 12345);
}

TEST_CASE("validate reports every violation, not only the first") {
  auto cfg = PipelineConfig::from_json_text(toy_files_json(), "inline");
  cfg.rerank.gamma = 1.5;
  cfg.fusion.epsilon = 0.0;
  cfg.ssl.tau = -1.0;
  cfg.gateway.embed_dim = 0;

  auto problems = validate(cfg);
  REQUIRE(problems.size() >= 4);
  auto mentions = [&problems](const std::string& needle) {
    return std::any_of(problems.begin(), problems.end(), [&needle](const std::string& p) {
      return p.find(needle) != std::string::npos;
    });
  };
  CHECK(mentions("gamma"));
  CHECK(mentions("epsilon"));
  CHECK(mentions("tau"));
  CHECK(mentions("embed_dim"));
}

TEST_CASE("a well-formed config validates cleanly") {
  auto cfg = PipelineConfig::from_json_text(toy_files_json(), "inline");
  CHECK(validate(cfg).empty());
}

TEST_CASE("missing input files are flagged") {
  PipelineConfig cfg;
  cfg.corpus.interactions = "/nonexistent/file.csv";
  auto problems = validate(cfg);
  CHECK(std::any_of(problems.begin(), problems.end(), [](const std::string& p) {
    return p.find("not found") != std::string::npos;
  }));
}

TEST_CASE("malformed config json names its origin") {
  CHECK_THROWS_WITH_AS(PipelineConfig::from_json_text("{broken", "myfile.json"),
                       doctest::Contains("myfile.json"), DataError);
}
