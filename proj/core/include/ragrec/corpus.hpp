#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace ragrec {

struct Item {
  std::string item_id;
  std::string title;
  // Ordered attribute map (genre, author, year, ...). Order is preserved
  // because it feeds prompt rendering.
  std::vector<std::pair<std::string, std::string>> attributes;

  const std::string* attribute(const std::string& key) const;
};

struct Interaction {
  std::string user_id;
  std::string item_id;
  int rating = 0;
  std::int64_t timestamp = 0;
  int label = 0;  // set by binarize()
};

struct CorpusMeta {
  std::string name;
  int field_count = 0;
  int feature_count = 0;
};

// Catalog plus chronological interaction log. Interactions keep input order;
// items keep first-seen order.
class Corpus {
 public:
  CorpusMeta meta;

  void add_item(Item item);                  // rejects duplicate ids, empty titles
  void upsert_item(Item item);               // replaces placeholder metadata
  const Item* find_item(const std::string& item_id) const;
  const std::vector<Item>& items() const { return items_; }
  const std::vector<Interaction>& interactions() const { return interactions_; }
  std::vector<Interaction>& interactions() { return interactions_; }
  void add_interaction(Interaction x);       // synthesizes a placeholder item if unseen

  std::size_t item_count() const { return items_.size(); }
  std::size_t user_count() const;
  std::vector<std::string> users() const;    // first-seen order
  bool empty() const { return interactions_.empty(); }

 private:
  std::vector<Item> items_;
  std::unordered_map<std::string, std::size_t> item_index_;
  std::vector<Interaction> interactions_;
};

enum class CorpusFormat { csv, jsonl };
CorpusFormat corpus_format_from_string(const std::string& s);

struct LoadStats {
  std::size_t rows = 0;
  std::size_t duplicates_dropped = 0;  // duplicate (user, item, timestamp) rows
};

// Interaction log ingestion. CSV needs a header row with columns
// user_id,item_id,rating,timestamp; JSONL expects one object per line with
// the same keys. Malformed rows raise DataError naming the line.
Corpus load_corpus(const std::filesystem::path& path, CorpusFormat format,
                   LoadStats* stats = nullptr);

// Optional item metadata (item_id,title,<attr>...) merged into an existing
// corpus; unknown items are added to the catalog.
void attach_items(Corpus& corpus, const std::filesystem::path& path, CorpusFormat format);

// Canonical corpus dump: one JSON object per line, items first then
// interactions, both in corpus order.
void save_corpus(const Corpus& corpus, const std::filesystem::path& path);
Corpus load_corpus_dump(const std::filesystem::path& path);

// Maximal subcorpus where every user and every item has >= k interactions,
// computed by iterative peeling to the fixpoint. Idempotent; may be empty.
Corpus k_core_filter(const Corpus& corpus, int k);

// label = 1 iff rating >= threshold.
Corpus binarize(const Corpus& corpus, int threshold);

struct HistoryEvent {
  std::string item_id;
  int label = 0;
  std::int64_t timestamp = 0;
};

struct UserHistory {
  std::string user_id;
  std::vector<HistoryEvent> events;  // strictly chronological, ties by input order
  HistoryEvent target;               // held-out final event
};

// One history per user with >= 2 interactions: target is the
// chronologically last event, everything earlier is history. Users that
// cannot form history+target are reported via `skipped`.
std::vector<UserHistory> build_histories(const Corpus& corpus,
                                         std::vector<std::string>* skipped = nullptr);

}  // namespace ragrec
