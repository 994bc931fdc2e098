#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <string>
#include <vector>

#include "ragrec/corpus.hpp"
#include "ragrec/embedding_store.hpp"
#include "ragrec/text_template.hpp"

namespace ragrec {

struct ChatMessage {
  std::string role;
  std::string content;
};

struct ChatRequest {
  std::vector<ChatMessage> messages;
  double temperature = 0.6;
  int max_tokens = 1024;
  int n_samples = 1;
  std::optional<std::uint64_t> seed;
};

struct ChatResponse {
  std::vector<std::string> texts;        // one per sample
  std::vector<int> token_counts;         // parallel to texts
};

class ChatBackend {
 public:
  virtual ~ChatBackend() = default;
  virtual ChatResponse chat(const ChatRequest& req) = 0;
  virtual std::string model_name() const = 0;
};

class EmbedBackend {
 public:
  virtual ~EmbedBackend() = default;
  virtual std::vector<float> embed(const std::string& text) = 0;
  virtual int dim() const = 0;
};

// Scalar Yes-probability scorer; stands in for a tuned model's output layer.
class ScoreBackend {
 public:
  virtual ~ScoreBackend() = default;
  virtual double score(const std::string& prompt) = 0;
};

// ---------------------------------------------------------------------------
// Deterministic mock backends. Every output is a pure function of
// (request, seed); temperature 0 collapses all samples to one text.
// ---------------------------------------------------------------------------

enum class MockFlavor { general, reasoning };

struct MockChatConfig {
  std::uint64_t seed = 1;
  MockFlavor flavor = MockFlavor::general;
  std::string model = "mock-general";
};

class MockChatBackend : public ChatBackend {
 public:
  explicit MockChatBackend(MockChatConfig cfg) : cfg_(std::move(cfg)) {}
  ChatResponse chat(const ChatRequest& req) override;
  std::string model_name() const override { return cfg_.model; }

 private:
  MockChatConfig cfg_;
};

// Seeded hash-projection of the token multiset: each token contributes a
// reproducible direction in [-1,1)^dim, summed with multiplicity and
// L2-normalized.
class MockEmbedBackend : public EmbedBackend {
 public:
  MockEmbedBackend(int dim, std::uint64_t seed) : dim_(dim), seed_(seed) {}
  std::vector<float> embed(const std::string& text) override;
  int dim() const override { return dim_; }

 private:
  int dim_;
  std::uint64_t seed_;
};

class MockScoreBackend : public ScoreBackend {
 public:
  explicit MockScoreBackend(std::uint64_t seed) : seed_(seed) {}
  double score(const std::string& prompt) override;

 private:
  std::uint64_t seed_;
};

// ---------------------------------------------------------------------------
// OpenAI-compatible HTTP backends (POST /v1/chat/completions and
// /v1/embeddings). Timeouts and 5xx are retried with exponential backoff,
// then surfaced as BackendError.
// ---------------------------------------------------------------------------

struct HttpBackendConfig {
  std::string base_url;       // e.g. http://localhost:8000
  std::string api_key;
  std::string model;
  int timeout_s = 120;
  int max_attempts = 3;
  double backoff_base_s = 1.0;
};

class HttpChatBackend : public ChatBackend {
 public:
  explicit HttpChatBackend(HttpBackendConfig cfg) : cfg_(std::move(cfg)) {}
  ChatResponse chat(const ChatRequest& req) override;
  std::string model_name() const override { return cfg_.model; }

 private:
  HttpBackendConfig cfg_;
};

class HttpEmbedBackend : public EmbedBackend {
 public:
  HttpEmbedBackend(HttpBackendConfig cfg, int expected_dim)
      : cfg_(std::move(cfg)), dim_(expected_dim) {}
  std::vector<float> embed(const std::string& text) override;
  int dim() const override { return dim_; }

 private:
  HttpBackendConfig cfg_;
  int dim_;  // 0 = adopt the first response's dimension
};

// ---------------------------------------------------------------------------
// Description cache (desc.jsonl), keyed by (item_id, prompt_hash, model).
// ---------------------------------------------------------------------------

struct ItemDescription {
  std::string item_id;
  std::string text;
  std::string source_model;
  std::string prompt_hash;
};

class DescriptionCache {
 public:
  explicit DescriptionCache(std::filesystem::path dir);
  static DescriptionCache open(const std::filesystem::path& dir);

  std::optional<ItemDescription> get(const std::string& item_id,
                                     const std::string& prompt_hash,
                                     const std::string& model) const;
  void put(const ItemDescription& desc);
  std::size_t size() const { return records_.size(); }
  std::filesystem::path file_path() const;

 private:
  void load();
  static std::string key(const std::string& item_id, const std::string& prompt_hash,
                         const std::string& model);

  std::filesystem::path dir_;
  std::unique_ptr<std::mutex> write_mutex_ = std::make_unique<std::mutex>();
  std::unordered_map<std::string, ItemDescription> records_;
};

// ---------------------------------------------------------------------------
// Gateway: one seam in front of chat + embedding backends with persistent
// caches and a bound on concurrent in-flight requests.
// ---------------------------------------------------------------------------

struct GatewayConfig {
  int max_in_flight = 4;
};

class Gateway {
 public:
  Gateway(std::shared_ptr<ChatBackend> chat, std::shared_ptr<EmbedBackend> embed,
          std::filesystem::path cache_dir, GatewayConfig cfg = {});

  // Renders the description prompt for the item and returns the cached or
  // freshly generated description. Repeat calls are cache hits.
  ItemDescription describe(const Item& item, const TextTemplate& prompt_template);

  std::vector<float> embed_text(const std::string& text);

  // Store-backed embedding: a present record short-circuits the backend.
  std::vector<float> embed_cached(EmbeddingStore& store, const std::string& item_id,
                                  const std::string& text);

  ChatResponse chat(const ChatRequest& req);

  int embed_dim() const { return embed_->dim(); }
  std::string chat_model() const { return chat_->model_name(); }
  const DescriptionCache& descriptions() const { return desc_cache_; }

  // Number of requests that actually reached a backend (cache misses).
  std::size_t backend_calls() const { return backend_calls_.load(); }

  static std::string render_description_prompt(const Item& item,
                                               const TextTemplate& prompt_template);

 private:
  std::shared_ptr<ChatBackend> chat_;
  std::shared_ptr<EmbedBackend> embed_;
  DescriptionCache desc_cache_;
  std::counting_semaphore<4096> in_flight_;
  std::atomic<std::size_t> backend_calls_{0};
};

}  // namespace ragrec
