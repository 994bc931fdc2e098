#pragma once

#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace ragrec {

enum class Space { title, desc, text, colla, ssl, mixed };

std::string to_string(Space space);
Space space_from_string(const std::string& s);

struct EmbeddingRecord {
  std::string item_id;
  Space space = Space::text;
  std::vector<float> vector;
};

// Append-only on-disk vector store, one per embedding space:
//   emb.<space>.bin        [u32 length LE][length x f32 LE] per record
//   emb.<space>.idx.jsonl  {"item_id":..., "offset":..., "dim":...} per record
// Re-putting an id appends a new record; the last one wins on load. Writes
// are serialized through one mutex; reads come from the in-memory map and
// may run concurrently with writers.
class EmbeddingStore {
 public:
  EmbeddingStore(std::filesystem::path dir, Space space);

  // Loads existing records from disk (no-op if files are absent).
  static EmbeddingStore open(const std::filesystem::path& dir, Space space);

  void put(const std::string& item_id, std::span<const float> vec);
  bool contains(const std::string& item_id) const;
  std::optional<std::vector<float>> get(const std::string& item_id) const;
  const std::vector<float>& at(const std::string& item_id) const;  // throws DataError

  std::size_t size() const;
  int dim() const { return dim_; }  // 0 while empty
  std::vector<std::string> ids() const;  // insertion order
  Space space() const { return space_; }
  std::filesystem::path bin_path() const;
  std::filesystem::path idx_path() const;

 private:
  void load();

  std::filesystem::path dir_;
  Space space_;
  int dim_ = 0;
  std::unique_ptr<std::mutex> write_mutex_ = std::make_unique<std::mutex>();
  std::vector<std::string> order_;
  std::unordered_map<std::string, std::vector<float>> records_;
};

}  // namespace ragrec
