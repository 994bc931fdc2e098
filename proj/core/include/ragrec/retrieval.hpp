#pragma once

#include <string>
#include <vector>

#include "ragrec/corpus.hpp"
#include "ragrec/embedding_store.hpp"

namespace ragrec {

// Top-k history items by dot product against the target's mixed embedding,
// descending; ties break by item id. Duplicate history items are considered
// once. Every involved item must have an embedding.
std::vector<std::string> retrieve_relevant(const UserHistory& history,
                                           const std::string& target_item, int k,
                                           const EmbeddingStore& mixed);

// Last k events, most recent first; equal timestamps keep input order.
// Repeated items are reported once, at their most recent position.
std::vector<std::string> retrieve_recent(const UserHistory& history, int k);

struct RerankConfig {
  int k = 30;
  double gamma = 2.0 / 3.0;   // embedding-channel weight; recency gets 1-gamma
  double beta = 1.0;          // position decay exponent
  enum class DupPolicy { sum, max } duplicate_policy = DupPolicy::sum;
};

RerankConfig::DupPolicy dup_policy_from_string(const std::string& s);
std::string to_string(RerankConfig::DupPolicy p);

struct ScoredItem {
  std::string item_id;
  double channel_score = 0.0;   // combined channel weight(s)
  double position_score = 0.0;  // of the best contributing rank
  double score = 0.0;           // final, after the duplicate policy
};

// Per-channel score = channel weight times 1/rank^beta with rank starting
// at 1; items present in both channels combine by the duplicate policy.
// Order: score desc, then best in-channel rank among positively weighted
// channels, then item id. Returns at most k items.
std::vector<ScoredItem> rerank_scored(const std::vector<std::string>& relevant,
                                      const std::vector<std::string>& recent,
                                      const RerankConfig& config);

std::vector<std::string> rerank(const std::vector<std::string>& relevant,
                                const std::vector<std::string>& recent,
                                const RerankConfig& config);

}  // namespace ragrec
