#pragma once

#include <cstdint>
#include <filesystem>

#include "ragrec/corpus.hpp"

namespace ragrec {
namespace synth {

struct ToySpec {
  int users = 100;
  int items = 60;
  int min_events = 8;
  int max_events = 18;
  std::uint64_t seed = 7;
};

// Small deterministic catalog + interaction log for demos and end-to-end
// runs. Titles are unique; items carry genre/year attributes.
Corpus make_toy_corpus(const ToySpec& spec = {});

void write_corpus_csv(const Corpus& corpus, const std::filesystem::path& interactions_path,
                      const std::filesystem::path& items_path);

// Interaction file with exactly the requested user/item/sample counts
// (every user and item appears at least once; timestamps are unique so no
// duplicate rows arise).
void write_scaled_interactions_csv(const std::filesystem::path& path, int users, int items,
                                   long long rows, std::uint64_t seed = 1);

}  // namespace synth
}  // namespace ragrec
