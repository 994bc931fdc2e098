#include "ragrec/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_map>
#include <unordered_set>

#include "ragrec/error.hpp"

namespace ragrec {

std::vector<std::string> retrieve_relevant(const UserHistory& history,
                                           const std::string& target_item, int k,
                                           const EmbeddingStore& mixed) {
  if (k < 1) throw UsageError("k must be >= 1");
  const std::vector<float>& target = mixed.at(target_item);

  std::vector<std::pair<double, std::string>> scored;
  std::unordered_set<std::string> seen;
  for (const auto& ev : history.events) {
    if (!seen.insert(ev.item_id).second) continue;
    const std::vector<float>& vec = mixed.at(ev.item_id);
    double dot = 0.0;
    for (std::size_t j = 0; j < vec.size(); ++j) {
      dot += static_cast<double>(target[j]) * static_cast<double>(vec[j]);
    }
    scored.emplace_back(dot, ev.item_id);
  }

  std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  if (static_cast<int>(scored.size()) > k) scored.resize(static_cast<std::size_t>(k));

  std::vector<std::string> out;
  out.reserve(scored.size());
  for (auto& [score, id] : scored) out.push_back(std::move(id));
  return out;
}

std::vector<std::string> retrieve_recent(const UserHistory& history, int k) {
  if (k < 1) throw UsageError("k must be >= 1");
  if (history.events.empty()) throw DataError("history is empty");

  std::vector<HistoryEvent> events = history.events;
  std::stable_sort(events.begin(), events.end(), [](const HistoryEvent& a, const HistoryEvent& b) {
    return a.timestamp > b.timestamp;
  });

  std::vector<std::string> out;
  std::unordered_set<std::string> seen;
  for (const auto& ev : events) {
    if (!seen.insert(ev.item_id).second) continue;
    out.push_back(ev.item_id);
    if (static_cast<int>(out.size()) == k) break;
  }
  return out;
}

RerankConfig::DupPolicy dup_policy_from_string(const std::string& s) {
  if (s == "sum") return RerankConfig::DupPolicy::sum;
  if (s == "max") return RerankConfig::DupPolicy::max;
  throw UsageError("unknown duplicate policy '" + s + "' (expected sum or max)");
}

std::string to_string(RerankConfig::DupPolicy p) {
  return p == RerankConfig::DupPolicy::sum ? "sum" : "max";
}

std::vector<ScoredItem> rerank_scored(const std::vector<std::string>& relevant,
                                      const std::vector<std::string>& recent,
                                      const RerankConfig& config) {
  if (config.k < 1) throw UsageError("rerank k must be >= 1");
  if (config.gamma < 0.0 || config.gamma > 1.0) throw UsageError("gamma must be in [0,1]");
  if (config.beta < 0.0) throw UsageError("beta must be >= 0");
  if (static_cast<int>(relevant.size()) > config.k || static_cast<int>(recent.size()) > config.k) {
    throw UsageError("channel lists must not exceed k items");
  }

  struct Entry {
    double score = 0.0;
    double channel_weight = 0.0;
    double best_position_score = 0.0;
    // Best rank within a channel that carries positive weight; used only
    // to break score ties deterministically.
    int effective_rank = std::numeric_limits<int>::max();
    std::size_t order = 0;  // first-appearance order across channels
  };
  std::unordered_map<std::string, Entry> entries;
  std::vector<std::string> order;

  auto add_channel = [&](const std::vector<std::string>& items, double weight) {
    int rank = 0;
    std::unordered_set<std::string> in_channel;
    for (const auto& id : items) {
      if (!in_channel.insert(id).second) continue;  // within-channel repeat
      ++rank;
      const double pos = 1.0 / std::pow(static_cast<double>(rank), config.beta);
      const double channel_score = weight * pos;

      auto [it, inserted] = entries.try_emplace(id);
      Entry& e = it->second;
      if (inserted) {
        e.order = order.size();
        order.push_back(id);
        e.score = channel_score;
      } else if (config.duplicate_policy == RerankConfig::DupPolicy::sum) {
        e.score += channel_score;
      } else {
        e.score = std::max(e.score, channel_score);
      }
      e.channel_weight += weight;
      if (weight > 0.0) {
        if (rank < e.effective_rank) {
          e.effective_rank = rank;
          e.best_position_score = pos;
        }
      } else if (e.best_position_score == 0.0) {
        e.best_position_score = pos;
      }
    }
  };

  add_channel(relevant, config.gamma);
  add_channel(recent, 1.0 - config.gamma);

  std::vector<ScoredItem> out;
  out.reserve(order.size());
  for (const auto& id : order) {
    const Entry& e = entries[id];
    out.push_back(ScoredItem{id, e.channel_weight, e.best_position_score, e.score});
  }

  std::vector<std::size_t> idx(out.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    const Entry& ea = entries[out[a].item_id];
    const Entry& eb = entries[out[b].item_id];
    if (out[a].score != out[b].score) return out[a].score > out[b].score;
    if (ea.effective_rank != eb.effective_rank) return ea.effective_rank < eb.effective_rank;
    return out[a].item_id < out[b].item_id;
  });

  std::vector<ScoredItem> sorted;
  sorted.reserve(std::min<std::size_t>(idx.size(), static_cast<std::size_t>(config.k)));
  for (std::size_t i = 0; i < idx.size() && i < static_cast<std::size_t>(config.k); ++i) {
    sorted.push_back(out[idx[i]]);
  }
  return sorted;
}

std::vector<std::string> rerank(const std::vector<std::string>& relevant,
                                const std::vector<std::string>& recent,
                                const RerankConfig& config) {
  auto scored = rerank_scored(relevant, recent, config);
  std::vector<std::string> out;
  out.reserve(scored.size());
  for (auto& s : scored) out.push_back(std::move(s.item_id));
  return out;
}

}  // namespace ragrec
