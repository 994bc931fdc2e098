#include "ragrec/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "ragrec/error.hpp"

namespace ragrec {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

const std::string* Item::attribute(const std::string& key) const {
  for (const auto& [k, v] : attributes) {
    if (k == key) return &v;
  }
  return nullptr;
}

void Corpus::add_item(Item item) {
  if (item.item_id.empty()) throw DataError("item with empty item_id");
  if (item.title.empty()) throw DataError("item '" + item.item_id + "' has empty title");
  if (item_index_.count(item.item_id)) {
    throw DataError("duplicate item_id '" + item.item_id + "'");
  }
  item_index_.emplace(item.item_id, items_.size());
  items_.push_back(std::move(item));
}

void Corpus::upsert_item(Item item) {
  auto it = item_index_.find(item.item_id);
  if (it == item_index_.end()) {
    add_item(std::move(item));
    return;
  }
  if (item.title.empty()) throw DataError("item '" + item.item_id + "' has empty title");
  items_[it->second] = std::move(item);
}

const Item* Corpus::find_item(const std::string& item_id) const {
  auto it = item_index_.find(item_id);
  return it == item_index_.end() ? nullptr : &items_[it->second];
}

void Corpus::add_interaction(Interaction x) {
  if (!item_index_.count(x.item_id)) {
    // Placeholder catalog entry; title falls back to the id so prompt
    // rendering always has something to show.
    add_item(Item{x.item_id, x.item_id, {}});
  }
  interactions_.push_back(std::move(x));
}

std::size_t Corpus::user_count() const {
  std::unordered_set<std::string> seen;
  for (const auto& x : interactions_) seen.insert(x.user_id);
  return seen.size();
}

std::vector<std::string> Corpus::users() const {
  std::vector<std::string> out;
  std::unordered_set<std::string> seen;
  for (const auto& x : interactions_) {
    if (seen.insert(x.user_id).second) out.push_back(x.user_id);
  }
  return out;
}

CorpusFormat corpus_format_from_string(const std::string& s) {
  if (s == "csv") return CorpusFormat::csv;
  if (s == "jsonl") return CorpusFormat::jsonl;
  throw UsageError("unknown corpus format '" + s + "' (expected csv or jsonl)");
}

namespace {

// Minimal RFC-4180-ish CSV: quoted fields may contain commas and doubled
// quotes. Returns one cell per column.
std::vector<std::string> split_csv_line(const std::string& line, std::size_t line_no) {
  std::vector<std::string> cells;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      cells.push_back(std::move(cur));
      cur.clear();
    } else if (c == '\r' && i + 1 == line.size()) {
      // tolerate CRLF
    } else {
      cur += c;
    }
  }
  if (quoted) throw DataError("line " + std::to_string(line_no) + ": unterminated quote");
  cells.push_back(std::move(cur));
  return cells;
}

long long parse_int_field(const std::string& s, const char* field, std::size_t line_no) {
  if (s.empty()) {
    throw DataError("line " + std::to_string(line_no) + ": empty " + field);
  }
  std::size_t pos = 0;
  long long v = 0;
  try {
    v = std::stoll(s, &pos);
  } catch (const std::exception&) {
    throw DataError("line " + std::to_string(line_no) + ": cannot parse " + field +
                    " from '" + s + "'");
  }
  if (pos != s.size()) {
    throw DataError("line " + std::to_string(line_no) + ": cannot parse " + field +
                    " from '" + s + "'");
  }
  return v;
}

struct DupKey {
  std::string user, item;
  std::int64_t ts;
  bool operator==(const DupKey&) const = default;
};

struct DupKeyHash {
  std::size_t operator()(const DupKey& k) const {
    std::size_t h = std::hash<std::string>{}(k.user);
    h ^= std::hash<std::string>{}(k.item) + 0x9e3779b9 + (h << 6) + (h >> 2);
    h ^= std::hash<std::int64_t>{}(k.ts) + 0x9e3779b9 + (h << 6) + (h >> 2);
    return h;
  }
};

}  // namespace

Corpus load_corpus(const std::filesystem::path& path, CorpusFormat format, LoadStats* stats) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open corpus file: " + path.string());

  Corpus corpus;
  corpus.meta.name = path.stem().string();
  LoadStats local;
  std::unordered_set<DupKey, DupKeyHash> seen;

  std::string line;
  std::size_t line_no = 0;

  auto push = [&](Interaction x, std::size_t at_line) {
    if (x.user_id.empty() || x.item_id.empty()) {
      throw DataError("line " + std::to_string(at_line) + ": empty user_id or item_id");
    }
    if (x.timestamp < 0) {
      throw DataError("line " + std::to_string(at_line) + ": negative timestamp");
    }
    if (!seen.insert(DupKey{x.user_id, x.item_id, x.timestamp}).second) {
      ++local.duplicates_dropped;
      return;
    }
    corpus.add_interaction(std::move(x));
    ++local.rows;
  };

  if (format == CorpusFormat::csv) {
    if (!std::getline(in, line)) throw DataError("empty corpus file: " + path.string());
    ++line_no;
    auto header = split_csv_line(line, line_no);
    std::unordered_map<std::string, std::size_t> col;
    for (std::size_t i = 0; i < header.size(); ++i) col[header[i]] = i;
    for (const char* req : {"user_id", "item_id", "rating", "timestamp"}) {
      if (!col.count(req)) {
        throw DataError(path.string() + ": missing required column '" + std::string(req) + "'");
      }
    }
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty() || (line.size() == 1 && line[0] == '\r')) continue;
      auto cells = split_csv_line(line, line_no);
      if (cells.size() != header.size()) {
        throw DataError("line " + std::to_string(line_no) + ": expected " +
                        std::to_string(header.size()) + " cells, got " +
                        std::to_string(cells.size()));
      }
      Interaction x;
      x.user_id = cells[col["user_id"]];
      x.item_id = cells[col["item_id"]];
      x.rating = static_cast<int>(parse_int_field(cells[col["rating"]], "rating", line_no));
      x.timestamp = parse_int_field(cells[col["timestamp"]], "timestamp", line_no);
      push(std::move(x), line_no);
    }
  } else {
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      json obj;
      try {
        obj = json::parse(line);
      } catch (const json::parse_error& e) {
        throw DataError("line " + std::to_string(line_no) + ": " + e.what());
      }
      for (const char* req : {"user_id", "item_id", "rating", "timestamp"}) {
        if (!obj.contains(req)) {
          throw DataError("line " + std::to_string(line_no) + ": missing field '" +
                          std::string(req) + "'");
        }
      }
      Interaction x;
      try {
        x.user_id = obj["user_id"].get<std::string>();
        x.item_id = obj["item_id"].get<std::string>();
        x.rating = obj["rating"].get<int>();
        x.timestamp = obj["timestamp"].get<std::int64_t>();
      } catch (const json::exception& e) {
        throw DataError("line " + std::to_string(line_no) + ": " + e.what());
      }
      push(std::move(x), line_no);
    }
  }

  if (stats) *stats = local;
  return corpus;
}

void attach_items(Corpus& corpus, const std::filesystem::path& path, CorpusFormat format) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open items file: " + path.string());

  std::string line;
  std::size_t line_no = 0;

  if (format == CorpusFormat::csv) {
    if (!std::getline(in, line)) throw DataError("empty items file: " + path.string());
    ++line_no;
    auto header = split_csv_line(line, line_no);
    std::unordered_map<std::string, std::size_t> col;
    for (std::size_t i = 0; i < header.size(); ++i) col[header[i]] = i;
    for (const char* req : {"item_id", "title"}) {
      if (!col.count(req)) {
        throw DataError(path.string() + ": missing required column '" + std::string(req) + "'");
      }
    }
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty() || (line.size() == 1 && line[0] == '\r')) continue;
      auto cells = split_csv_line(line, line_no);
      if (cells.size() != header.size()) {
        throw DataError("line " + std::to_string(line_no) + ": expected " +
                        std::to_string(header.size()) + " cells, got " +
                        std::to_string(cells.size()));
      }
      Item item;
      item.item_id = cells[col["item_id"]];
      item.title = cells[col["title"]];
      for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] == "item_id" || header[i] == "title") continue;
        if (!cells[i].empty()) item.attributes.emplace_back(header[i], cells[i]);
      }
      corpus.upsert_item(std::move(item));
    }
  } else {
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      ordered_json obj;
      try {
        obj = ordered_json::parse(line);
      } catch (const json::parse_error& e) {
        throw DataError("line " + std::to_string(line_no) + ": " + e.what());
      }
      Item item;
      item.item_id = obj.value("item_id", "");
      item.title = obj.value("title", "");
      if (obj.contains("attributes")) {
        for (auto it = obj["attributes"].begin(); it != obj["attributes"].end(); ++it) {
          item.attributes.emplace_back(it.key(), it.value().get<std::string>());
        }
      }
      corpus.upsert_item(std::move(item));
    }
  }
}

void save_corpus(const Corpus& corpus, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write corpus dump: " + path.string());
  for (const auto& item : corpus.items()) {
    ordered_json attrs = ordered_json::object();
    for (const auto& [k, v] : item.attributes) attrs[k] = v;
    ordered_json obj{{"kind", "item"},
                     {"item_id", item.item_id},
                     {"title", item.title},
                     {"attributes", attrs}};
    out << obj.dump() << '\n';
  }
  for (const auto& x : corpus.interactions()) {
    ordered_json obj{{"kind", "interaction"}, {"user_id", x.user_id},
                     {"item_id", x.item_id},  {"rating", x.rating},
                     {"timestamp", x.timestamp}, {"label", x.label}};
    out << obj.dump() << '\n';
  }
}

Corpus load_corpus_dump(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open corpus dump: " + path.string());
  Corpus corpus;
  corpus.meta.name = path.stem().string();
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    ordered_json obj;
    try {
      obj = ordered_json::parse(line);
    } catch (const json::parse_error& e) {
      throw DataError("line " + std::to_string(line_no) + ": " + e.what());
    }
    const std::string kind = obj.value("kind", "");
    if (kind == "item") {
      Item item;
      item.item_id = obj.value("item_id", "");
      item.title = obj.value("title", "");
      if (obj.contains("attributes")) {
        for (auto it = obj["attributes"].begin(); it != obj["attributes"].end(); ++it) {
          item.attributes.emplace_back(it.key(), it.value().get<std::string>());
        }
      }
      corpus.add_item(std::move(item));
    } else if (kind == "interaction") {
      Interaction x;
      x.user_id = obj.value("user_id", "");
      x.item_id = obj.value("item_id", "");
      x.rating = obj.value("rating", 0);
      x.timestamp = obj.value("timestamp", std::int64_t{0});
      x.label = obj.value("label", 0);
      corpus.add_interaction(std::move(x));
    } else {
      throw DataError("line " + std::to_string(line_no) + ": unknown record kind '" + kind + "'");
    }
  }
  return corpus;
}

Corpus k_core_filter(const Corpus& corpus, int k) {
  if (k < 1) throw UsageError("k-core requires k >= 1");

  std::vector<char> alive(corpus.interactions().size(), 1);
  bool changed = true;
  while (changed) {
    changed = false;
    std::unordered_map<std::string, int> user_deg, item_deg;
    for (std::size_t i = 0; i < alive.size(); ++i) {
      if (!alive[i]) continue;
      const auto& x = corpus.interactions()[i];
      ++user_deg[x.user_id];
      ++item_deg[x.item_id];
    }
    for (std::size_t i = 0; i < alive.size(); ++i) {
      if (!alive[i]) continue;
      const auto& x = corpus.interactions()[i];
      if (user_deg[x.user_id] < k || item_deg[x.item_id] < k) {
        alive[i] = 0;
        changed = true;
      }
    }
  }

  Corpus out;
  out.meta = corpus.meta;
  std::unordered_set<std::string> kept_items;
  for (std::size_t i = 0; i < alive.size(); ++i) {
    if (alive[i]) kept_items.insert(corpus.interactions()[i].item_id);
  }
  for (const auto& item : corpus.items()) {
    if (kept_items.count(item.item_id)) out.add_item(item);
  }
  for (std::size_t i = 0; i < alive.size(); ++i) {
    if (alive[i]) out.add_interaction(corpus.interactions()[i]);
  }
  return out;
}

Corpus binarize(const Corpus& corpus, int threshold) {
  Corpus out;
  out.meta = corpus.meta;
  for (const auto& item : corpus.items()) out.add_item(item);
  for (auto x : corpus.interactions()) {
    x.label = x.rating >= threshold ? 1 : 0;
    out.add_interaction(std::move(x));
  }
  return out;
}

std::vector<UserHistory> build_histories(const Corpus& corpus,
                                         std::vector<std::string>* skipped) {
  if (corpus.empty()) throw DataError("cannot build histories from an empty corpus");

  std::vector<std::string> order = corpus.users();
  std::unordered_map<std::string, std::vector<HistoryEvent>> per_user;
  for (const auto& x : corpus.interactions()) {
    per_user[x.user_id].push_back(HistoryEvent{x.item_id, x.label, x.timestamp});
  }

  std::vector<UserHistory> out;
  out.reserve(order.size());
  for (const auto& user : order) {
    auto& events = per_user[user];
    if (events.size() < 2) {
      if (skipped) skipped->push_back(user);
      continue;
    }
    // Ties broken by input order.
    std::stable_sort(events.begin(), events.end(),
                     [](const HistoryEvent& a, const HistoryEvent& b) {
                       return a.timestamp < b.timestamp;
                     });
    UserHistory h;
    h.user_id = user;
    h.target = events.back();
    h.events.assign(events.begin(), events.end() - 1);
    out.push_back(std::move(h));
  }
  return out;
}

}  // namespace ragrec
