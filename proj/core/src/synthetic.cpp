#include "ragrec/synthetic.hpp"

#include <fstream>
#include <random>
#include <set>

#include "ragrec/error.hpp"
#include "ragrec/hash.hpp"

namespace ragrec {
namespace synth {

namespace {

const char* kAdjectives[] = {"Silent", "Crimson", "Golden",  "Hidden", "Broken",  "Distant",
                             "Frozen", "Burning", "Gentle",  "Savage", "Velvet",  "Hollow",
                             "Iron",   "Paper",   "Electric", "Wild",  "Quiet",   "Amber",
                             "Steel",  "Misty"};
const char* kNouns[] = {"Garden", "River",  "Signal",  "Harbor", "Engine", "Mirror",
                        "Forest", "Island", "Letter",  "Bridge", "Crown",  "Compass",
                        "Lantern", "Canyon", "Orchard", "Tower",  "Meadow", "Vault",
                        "Horizon", "Archive"};
const char* kGenres[] = {"drama", "comedy", "thriller", "romance", "sci-fi", "documentary"};

std::string two_digit(int v) { return (v < 10 ? "0" : "") + std::to_string(v); }

}  // namespace

Corpus make_toy_corpus(const ToySpec& spec) {
  if (spec.users < 1 || spec.items < 2 || spec.min_events < 2 ||
      spec.max_events < spec.min_events) {
    throw UsageError("invalid toy corpus spec");
  }

  std::mt19937_64 rng(spec.seed);
  Corpus corpus;
  corpus.meta.name = "toy";

  for (int i = 0; i < spec.items; ++i) {
    Item item;
    item.item_id = "m" + two_digit(i / 10) + std::to_string(i % 10);
    item.title = std::string(kAdjectives[i % 20]) + " " + kNouns[(i / 20 * 7 + i) % 20] + " " +
                 std::to_string(i);
    item.attributes.emplace_back("genre", kGenres[i % 6]);
    item.attributes.emplace_back("year", std::to_string(1980 + (i * 3) % 45));
    corpus.add_item(std::move(item));
  }

  std::uniform_int_distribution<int> count_dist(spec.min_events, spec.max_events);
  std::uniform_int_distribution<int> item_dist(0, spec.items - 1);
  std::uniform_int_distribution<int> rating_dist(1, 5);
  std::uniform_int_distribution<int> gap_dist(1, 50);

  for (int u = 0; u < spec.users; ++u) {
    const std::string user_id = "u" + two_digit(u / 10) + std::to_string(u % 10);
    const int events = count_dist(rng);
    std::set<int> chosen;
    while (static_cast<int>(chosen.size()) < events) chosen.insert(item_dist(rng));

    std::int64_t ts = 1000 + u;
    for (int idx : chosen) {
      Interaction x;
      x.user_id = user_id;
      x.item_id = corpus.items()[static_cast<std::size_t>(idx)].item_id;
      x.rating = rating_dist(rng);
      ts += gap_dist(rng);
      x.timestamp = ts;
      corpus.add_interaction(std::move(x));
    }
  }
  return corpus;
}

void write_corpus_csv(const Corpus& corpus, const std::filesystem::path& interactions_path,
                      const std::filesystem::path& items_path) {
  {
    std::ofstream out(interactions_path, std::ios::trunc);
    if (!out) throw DataError("cannot write " + interactions_path.string());
    out << "user_id,item_id,rating,timestamp\n";
    for (const auto& x : corpus.interactions()) {
      out << x.user_id << ',' << x.item_id << ',' << x.rating << ',' << x.timestamp << '\n';
    }
  }
  {
    std::ofstream out(items_path, std::ios::trunc);
    if (!out) throw DataError("cannot write " + items_path.string());
    out << "item_id,title,genre,year\n";
    for (const auto& item : corpus.items()) {
      const std::string* genre = item.attribute("genre");
      const std::string* year = item.attribute("year");
      out << item.item_id << ',' << item.title << ',' << (genre ? *genre : "") << ','
          << (year ? *year : "") << '\n';
    }
  }
}

void write_scaled_interactions_csv(const std::filesystem::path& path, int users, int items,
                                   long long rows, std::uint64_t seed) {
  if (rows < users || rows < items) {
    throw UsageError("row count must cover every user and item at least once");
  }
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << "user_id,item_id,rating,timestamp\n";

  std::string line;
  for (long long r = 0; r < rows; ++r) {
    std::uint64_t state = seed ^ static_cast<std::uint64_t>(r);
    const int user = static_cast<int>(r % users);
    // The first `items` rows enumerate the catalog so every item id occurs.
    const int item = r < items ? static_cast<int>(r)
                               : static_cast<int>(splitmix64_next(state) % static_cast<std::uint64_t>(items));
    const int rating = 1 + static_cast<int>(splitmix64_next(state) % 5);

    line.clear();
    line += 'u';
    line += std::to_string(user);
    line += ',';
    line += 'm';
    line += std::to_string(item);
    line += ',';
    line += std::to_string(rating);
    line += ',';
    line += std::to_string(r);  // unique timestamps: no duplicate rows
    line += '\n';
    out << line;
  }
}

}  // namespace synth
}  // namespace ragrec
