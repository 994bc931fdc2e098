#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <random>

#include "ragrec/error.hpp"
#include "ragrec/retrieval.hpp"
#include "support/generators.hpp"

using namespace ragrec;

namespace {

EmbeddingStore fresh_store(const std::string& tag) {
  auto dir = std::filesystem::temp_directory_path() / ("ragrec_ret_" + tag);
  std::filesystem::remove_all(dir);
  return EmbeddingStore::open(dir, Space::mixed);
}

UserHistory history_of(std::vector<std::string> items) {
  UserHistory h;
  h.user_id = "u";
  std::int64_t ts = 1;
  for (auto& id : items) h.events.push_back(HistoryEvent{std::move(id), 1, ts++});
  return h;
}

// Exhaustive scan oracle: score every distinct history item, sort by
// (score desc, id asc), take k.
std::vector<std::string> scan_oracle(const UserHistory& hist, const std::string& target, int k,
                                     const EmbeddingStore& store) {
  std::vector<std::pair<double, std::string>> scored;
  std::vector<std::string> seen;
  for (const auto& ev : hist.events) {
    if (std::find(seen.begin(), seen.end(), ev.item_id) != seen.end()) continue;
    seen.push_back(ev.item_id);
    const auto& t = store.at(target);
    const auto& v = store.at(ev.item_id);
    double dot = 0.0;
    for (std::size_t j = 0; j < v.size(); ++j) {
      dot += static_cast<double>(t[j]) * static_cast<double>(v[j]);
    }
    scored.emplace_back(dot, ev.item_id);
  }
  std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  std::vector<std::string> out;
  for (std::size_t i = 0; i < scored.size() && i < static_cast<std::size_t>(k); ++i) {
    out.push_back(scored[i].second);
  }
  return out;
}

}  // namespace

TEST_CASE("relevance: k larger than the pool returns everything sorted") {
  auto store = fresh_store("small");
  store.put("t", std::vector<float>{1, 0});
  store.put("a", std::vector<float>{0.9f, 0});
  store.put("b", std::vector<float>{0.1f, 0});
  auto out = retrieve_relevant(history_of({"b", "a"}), "t", 5, store);
  CHECK(out == std::vector<std::string>{"a", "b"});
}

TEST_CASE("relevance: orthogonal target falls back to the id tie-break") {
  auto store = fresh_store("ortho");
  store.put("t", std::vector<float>{0, 0, 1});
  store.put("c", std::vector<float>{1, 0, 0});
  store.put("a", std::vector<float>{0, 1, 0});
  store.put("b", std::vector<float>{-1, 0, 0});
  auto out = retrieve_relevant(history_of({"c", "a", "b"}), "t", 3, store);
  CHECK(out == std::vector<std::string>{"a", "b", "c"});
}

TEST_CASE("relevance: missing embedding names the item") {
  auto store = fresh_store("missing");
  store.put("t", std::vector<float>{1, 0});
  CHECK_THROWS_WITH_AS(retrieve_relevant(history_of({"ghost"}), "t", 2, store),
                       doctest::Contains("ghost"), DataError);
}

TEST_CASE("relevance agrees with the exhaustive scan oracle") {
  std::mt19937_64 rng(1000);
  auto store = fresh_store("oracle");
  const int dim = 6;
  const int n_items = 40;
  std::vector<std::string> pool;
  for (int i = 0; i < n_items; ++i) {
    std::string id = "i" + std::to_string(i);
    store.put(id, testgen::random_unit_vector(rng, dim));
    pool.push_back(std::move(id));
  }

  for (int trial = 0; trial < 1000; ++trial) {
    std::shuffle(pool.begin(), pool.end(), rng);
    const int hist_len = 2 + static_cast<int>(rng() % 20);
    const int k = 1 + static_cast<int>(rng() % 8);
    std::vector<std::string> side(pool.begin(), pool.begin() + hist_len);
    const std::string target = pool.back();
    UserHistory hist = history_of(side);
    CHECK(retrieve_relevant(hist, target, k, store) == scan_oracle(hist, target, k, store));
  }
}

TEST_CASE("recency: last events come back most recent first") {
  UserHistory h;
  for (int t = 1; t <= 10; ++t) {
    h.events.push_back(HistoryEvent{"i" + std::to_string(t), 1, t});
  }
  CHECK(retrieve_recent(h, 3) == std::vector<std::string>{"i10", "i9", "i8"});
  CHECK(retrieve_recent(h, 1) == std::vector<std::string>{"i10"});
}

TEST_CASE("recency: equal timestamps keep input order") {
  UserHistory h;
  h.events = {{"a", 1, 5}, {"b", 1, 9}, {"c", 1, 9}, {"d", 1, 2}};
  CHECK(retrieve_recent(h, 4) == std::vector<std::string>{"b", "c", "a", "d"});
}

TEST_CASE("reranker reproduces the worked example") {
  RerankConfig cfg;
  cfg.k = 3;
  cfg.gamma = 2.0 / 3.0;
  cfg.beta = 1.0;
  cfg.duplicate_policy = RerankConfig::DupPolicy::sum;

  auto scored = rerank_scored({"A", "B", "C"}, {"C", "D", "E"}, cfg);
  REQUIRE(scored.size() == 3);
  CHECK(scored[0].item_id == "A");
  CHECK(scored[1].item_id == "C");
  CHECK(scored[2].item_id == "B");
  CHECK(scored[0].score == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(scored[1].score == doctest::Approx(2.0 / 9.0 + 1.0 / 3.0).epsilon(1e-12));
  CHECK(scored[2].score == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("gamma boundaries recover a single channel") {
  std::vector<std::string> relevant = {"r1", "r2", "r3"};
  std::vector<std::string> recent = {"t1", "r2", "t3"};

  RerankConfig cfg;
  cfg.k = 3;

  cfg.gamma = 1.0;
  CHECK(rerank(relevant, recent, cfg) == relevant);

  cfg.gamma = 0.0;
  CHECK(rerank(relevant, recent, cfg) == recent);

  SUBCASE("also with beta = 0, where every position score collapses to 1") {
    cfg.beta = 0.0;
    cfg.gamma = 1.0;
    CHECK(rerank(relevant, recent, cfg) == relevant);
    cfg.gamma = 0.0;
    CHECK(rerank(relevant, recent, cfg) == recent);
  }
}

TEST_CASE("beta = 0 ranks by channel membership with duplicates first") {
  RerankConfig cfg;
  cfg.k = 5;
  cfg.gamma = 0.5;
  cfg.beta = 0.0;
  auto scored = rerank_scored({"A", "B", "C"}, {"C", "D", "E"}, cfg);
  REQUIRE(scored.size() == 5);
  CHECK(scored[0].item_id == "C");  // in both channels, score 1
  CHECK(scored[0].score == doctest::Approx(1.0));
  for (std::size_t i = 1; i < scored.size(); ++i) {
    CHECK(scored[i].score == doctest::Approx(0.5));
  }
  // Singles tie at 0.5 and fall back to best rank, then id.
  CHECK(scored[1].item_id == "A");
  CHECK(scored[2].item_id == "B");
  CHECK(scored[3].item_id == "D");
  CHECK(scored[4].item_id == "E");
}

TEST_CASE("duplicate policy max keeps the larger channel score") {
  RerankConfig cfg;
  cfg.k = 3;
  cfg.gamma = 0.5;
  cfg.beta = 1.0;
  cfg.duplicate_policy = RerankConfig::DupPolicy::max;
  auto scored = rerank_scored({"X"}, {"Y", "X"}, cfg);
  // X: embedding 0.5/1, recency 0.5/2 -> max(0.5, 0.25) = 0.5
  REQUIRE(scored.size() == 2);
  CHECK(scored[0].item_id == "X");
  CHECK(scored[0].score == doctest::Approx(0.5));
  CHECK(scored[1].item_id == "Y");
}

TEST_CASE("output length and uniqueness invariants") {
  std::mt19937_64 rng(77);
  std::vector<std::string> ids;
  for (int i = 0; i < 30; ++i) ids.push_back("n" + std::to_string(i));

  for (int trial = 0; trial < 200; ++trial) {
    std::shuffle(ids.begin(), ids.end(), rng);
    RerankConfig cfg;
    cfg.k = 1 + static_cast<int>(rng() % 8);
    cfg.gamma = static_cast<double>(rng() % 101) / 100.0;
    cfg.beta = static_cast<double>(rng() % 30) / 10.0;
    const int n_rel = static_cast<int>(rng() % (cfg.k + 1));
    const int n_rec = static_cast<int>(rng() % (cfg.k + 1));
    std::vector<std::string> relevant(ids.begin(), ids.begin() + n_rel);
    std::shuffle(ids.begin(), ids.end(), rng);
    std::vector<std::string> recent(ids.begin(), ids.begin() + n_rec);

    auto out = rerank(relevant, recent, cfg);

    std::vector<std::string> uni = relevant;
    for (const auto& id : recent) {
      if (std::find(uni.begin(), uni.end(), id) == uni.end()) uni.push_back(id);
    }
    CHECK(out.size() == std::min<std::size_t>(uni.size(), static_cast<std::size_t>(cfg.k)));
    auto sorted = out;
    std::sort(sorted.begin(), sorted.end());
    CHECK(std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end());
  }
}

TEST_CASE("scores are invariant under id relabeling") {
  RerankConfig cfg;
  cfg.k = 4;
  cfg.gamma = 0.7;
  cfg.beta = 1.5;
  auto a = rerank_scored({"A", "B", "C"}, {"C", "D"}, cfg);
  auto b = rerank_scored({"P", "Q", "R"}, {"R", "S"}, cfg);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].score == doctest::Approx(b[i].score).epsilon(1e-12));
  }
}

TEST_CASE("channel lists longer than k are rejected") {
  RerankConfig cfg;
  cfg.k = 1;
  CHECK_THROWS_AS(rerank({"a", "b"}, {}, cfg), UsageError);
}
