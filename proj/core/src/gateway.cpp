#include "ragrec/gateway.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "ragrec/error.hpp"
#include "ragrec/hash.hpp"

namespace ragrec {

using json = nlohmann::json;

namespace {

std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> tokens;
  std::string cur;
  for (char c : text) {
    if (std::isalnum(static_cast<unsigned char>(c))) {
      cur += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    } else if (!cur.empty()) {
      tokens.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) tokens.push_back(std::move(cur));
  return tokens;
}

int whitespace_token_count(const std::string& text) {
  std::istringstream in(text);
  std::string w;
  int n = 0;
  while (in >> w) ++n;
  return n;
}

std::uint64_t request_digest(const ChatRequest& req, std::uint64_t backend_seed) {
  std::uint64_t h = backend_seed;
  if (req.seed) h ^= *req.seed * 0x9e3779b97f4a7c15ULL;
  for (const auto& m : req.messages) {
    h ^= fnv1a64(m.role);
    h = h * 0x100000001b3ULL;
    h ^= fnv1a64(m.content);
    h = h * 0x100000001b3ULL;
  }
  return h;
}

const char* kFiller[] = {
    "signal",  "pattern",  "history", "preference", "genre",   "style",
    "theme",   "pace",     "tone",    "story",      "rating",  "match",
    "overlap", "contrast", "recent",  "earlier",    "similar", "distinct",
    "strong",  "weak",     "steady",  "shift",      "detail",  "context",
    "habit",   "trend",    "appeal",  "niche",      "broad",   "focus",
    "depth",   "balance"};
constexpr int kFillerCount = 32;

std::string filler_words(std::uint64_t& state, int count) {
  std::string out;
  for (int i = 0; i < count; ++i) {
    if (i) out += ' ';
    out += kFiller[splitmix64_next(state) % kFillerCount];
  }
  return out;
}

// Up to `cap` distinct informative tokens from the prompt, in order.
std::string salient_tokens(const std::string& prompt, int cap) {
  static const std::unordered_set<std::string> stop = {
      "the", "and", "for", "with", "that", "this", "will", "answer", "yes",
      "no",  "user", "item", "you", "are", "give", "only"};
  std::string out;
  std::unordered_set<std::string> seen;
  int n = 0;
  for (const auto& tok : tokenize(prompt)) {
    if (tok.size() < 3 || stop.count(tok)) continue;
    if (!seen.insert(tok).second) continue;
    if (n) out += ' ';
    out += tok;
    if (++n >= cap) break;
  }
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Mock backends
// ---------------------------------------------------------------------------

ChatResponse MockChatBackend::chat(const ChatRequest& req) {
  if (req.n_samples < 1) throw UsageError("n_samples must be >= 1");
  if (req.temperature < 0) throw UsageError("temperature must be >= 0");

  std::string prompt;
  for (const auto& m : req.messages) {
    prompt += m.content;
    prompt += '\n';
  }

  ChatResponse resp;
  resp.texts.reserve(req.n_samples);
  for (int i = 0; i < req.n_samples; ++i) {
    std::uint64_t digest = request_digest(req, cfg_.seed);
    if (req.temperature > 0) {
      digest ^= splitmix64_next(digest) + static_cast<std::uint64_t>(i) * 0xa0761d6478bd642fULL;
    }
    std::uint64_t state = digest;
    const bool yes = (splitmix64_next(state) & 1) != 0;

    std::string text;
    if (cfg_.flavor == MockFlavor::reasoning) {
      const int think_len = 40 + static_cast<int>(splitmix64_next(state) % 160);
      text = "<think>\nThe " + salient_tokens(prompt, 16) + " suggests a " +
             filler_words(state, think_len) + ".\n</think>\nFinal answer: " +
             (yes ? "Yes" : "No");
    } else {
      const int len = 8 + static_cast<int>(splitmix64_next(state) % 24);
      text = "A detailed description: " + salient_tokens(prompt, 24) + ". Notes: " +
             filler_words(state, len) + ". Answer: " + (yes ? "Yes" : "No");
    }
    resp.token_counts.push_back(whitespace_token_count(text));
    resp.texts.push_back(std::move(text));
  }
  return resp;
}

std::vector<float> MockEmbedBackend::embed(const std::string& text) {
  if (text.empty()) throw DataError("cannot embed empty text");
  auto tokens = tokenize(text);
  if (tokens.empty()) tokens.push_back(text);

  std::vector<double> acc(static_cast<std::size_t>(dim_), 0.0);
  for (const auto& tok : tokens) {
    std::uint64_t state = fnv1a64(tok) ^ seed_;
    for (int j = 0; j < dim_; ++j) {
      acc[static_cast<std::size_t>(j)] += u64_to_unit(splitmix64_next(state)) * 2.0 - 1.0;
    }
  }
  double norm = 0.0;
  for (double v : acc) norm += v * v;
  norm = std::sqrt(norm);
  if (norm == 0.0) norm = 1.0;

  std::vector<float> out(static_cast<std::size_t>(dim_));
  for (int j = 0; j < dim_; ++j) {
    out[static_cast<std::size_t>(j)] = static_cast<float>(acc[static_cast<std::size_t>(j)] / norm);
  }
  return out;
}

double MockScoreBackend::score(const std::string& prompt) {
  std::uint64_t state = fnv1a64(prompt) ^ seed_;
  return u64_to_unit(splitmix64_next(state));
}

// ---------------------------------------------------------------------------
// Description cache
// ---------------------------------------------------------------------------

DescriptionCache::DescriptionCache(std::filesystem::path dir) : dir_(std::move(dir)) {
  std::filesystem::create_directories(dir_);
}

std::filesystem::path DescriptionCache::file_path() const { return dir_ / "desc.jsonl"; }

DescriptionCache DescriptionCache::open(const std::filesystem::path& dir) {
  DescriptionCache cache(dir);
  cache.load();
  return cache;
}

void DescriptionCache::load() {
  std::ifstream in(file_path());
  if (!in) return;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& e) {
      throw DataError(file_path().string() + " line " + std::to_string(line_no) + ": " + e.what());
    }
    ItemDescription d;
    d.item_id = obj.at("item_id").get<std::string>();
    d.text = obj.at("text").get<std::string>();
    d.source_model = obj.at("source_model").get<std::string>();
    d.prompt_hash = obj.at("prompt_hash").get<std::string>();
    records_[key(d.item_id, d.prompt_hash, d.source_model)] = std::move(d);
  }
}

std::string DescriptionCache::key(const std::string& item_id, const std::string& prompt_hash,
                                  const std::string& model) {
  return item_id + '\x1f' + prompt_hash + '\x1f' + model;
}

std::optional<ItemDescription> DescriptionCache::get(const std::string& item_id,
                                                     const std::string& prompt_hash,
                                                     const std::string& model) const {
  auto it = records_.find(key(item_id, prompt_hash, model));
  if (it == records_.end()) return std::nullopt;
  return it->second;
}

void DescriptionCache::put(const ItemDescription& desc) {
  if (desc.text.empty()) throw DataError("refusing to cache empty description");
  std::lock_guard<std::mutex> lock(*write_mutex_);
  std::ofstream out(file_path(), std::ios::app);
  if (!out) throw DataError("cannot append to " + file_path().string());
  json obj{{"item_id", desc.item_id},
           {"text", desc.text},
           {"source_model", desc.source_model},
           {"prompt_hash", desc.prompt_hash}};
  out << obj.dump() << '\n';
  out.flush();
  if (!out) throw DataError("write failed on " + file_path().string());
  records_[key(desc.item_id, desc.prompt_hash, desc.source_model)] = desc;
}

// ---------------------------------------------------------------------------
// Gateway
// ---------------------------------------------------------------------------

Gateway::Gateway(std::shared_ptr<ChatBackend> chat, std::shared_ptr<EmbedBackend> embed,
                 std::filesystem::path cache_dir, GatewayConfig cfg)
    : chat_(std::move(chat)),
      embed_(std::move(embed)),
      desc_cache_(DescriptionCache::open(cache_dir)),
      in_flight_(std::max(1, cfg.max_in_flight)) {}

std::string Gateway::render_description_prompt(const Item& item,
                                               const TextTemplate& prompt_template) {
  std::map<std::string, std::string> slots;
  slots["title"] = item.title;
  slots["item_id"] = item.item_id;
  std::string joined;
  for (const auto& [k, v] : item.attributes) {
    if (!joined.empty()) joined += "; ";
    joined += k + ": " + v;
    slots[k] = v;
  }
  slots["attributes"] = joined.empty() ? "(none)" : joined;
  return prompt_template.render(slots);
}

ItemDescription Gateway::describe(const Item& item, const TextTemplate& prompt_template) {
  const std::string prompt = render_description_prompt(item, prompt_template);
  const std::string prompt_hash = to_hex(fnv1a64(prompt));
  const std::string model = chat_->model_name();

  if (auto hit = desc_cache_.get(item.item_id, prompt_hash, model)) return *hit;

  ChatRequest req;
  req.messages = {{"user", prompt}};
  req.temperature = 0.0;
  req.n_samples = 1;

  ChatResponse resp;
  {
    in_flight_.acquire();
    backend_calls_.fetch_add(1);
    try {
      resp = chat_->chat(req);
    } catch (...) {
      in_flight_.release();
      throw;
    }
    in_flight_.release();
  }
  if (resp.texts.empty() || resp.texts[0].empty()) {
    throw BackendError("empty completion for item '" + item.item_id + "'");
  }

  ItemDescription desc{item.item_id, resp.texts[0], model, prompt_hash};
  desc_cache_.put(desc);
  return desc;
}

std::vector<float> Gateway::embed_text(const std::string& text) {
  if (text.empty()) throw DataError("cannot embed empty text");
  in_flight_.acquire();
  backend_calls_.fetch_add(1);
  std::vector<float> vec;
  try {
    vec = embed_->embed(text);
  } catch (...) {
    in_flight_.release();
    throw;
  }
  in_flight_.release();
  if (embed_->dim() > 0 && static_cast<int>(vec.size()) != embed_->dim()) {
    throw BackendError("embedding dimension mismatch: got " + std::to_string(vec.size()) +
                       ", configured " + std::to_string(embed_->dim()));
  }
  return vec;
}

std::vector<float> Gateway::embed_cached(EmbeddingStore& store, const std::string& item_id,
                                         const std::string& text) {
  if (auto hit = store.get(item_id)) return *hit;
  auto vec = embed_text(text);
  store.put(item_id, vec);
  return vec;
}

ChatResponse Gateway::chat(const ChatRequest& req) {
  if (req.n_samples < 1) throw UsageError("n_samples must be >= 1");
  in_flight_.acquire();
  backend_calls_.fetch_add(1);
  ChatResponse resp;
  try {
    resp = chat_->chat(req);
  } catch (...) {
    in_flight_.release();
    throw;
  }
  in_flight_.release();
  if (resp.texts.size() != static_cast<std::size_t>(req.n_samples) ||
      resp.token_counts.size() != resp.texts.size()) {
    throw BackendError("backend returned " + std::to_string(resp.texts.size()) +
                       " samples, expected " + std::to_string(req.n_samples));
  }
  return resp;
}

}  // namespace ragrec
