#include "ragrec/embedding_store.hpp"

#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

#include "ragrec/error.hpp"

namespace ragrec {

using json = nlohmann::json;

std::string to_string(Space space) {
  switch (space) {
    case Space::title: return "title";
    case Space::desc: return "desc";
    case Space::text: return "text";
    case Space::colla: return "colla";
    case Space::ssl: return "ssl";
    case Space::mixed: return "mixed";
  }
  throw DataError("invalid embedding space");
}

Space space_from_string(const std::string& s) {
  if (s == "title") return Space::title;
  if (s == "desc") return Space::desc;
  if (s == "text") return Space::text;
  if (s == "colla") return Space::colla;
  if (s == "ssl") return Space::ssl;
  if (s == "mixed") return Space::mixed;
  throw DataError("unknown embedding space '" + s + "'");
}

namespace {

void write_u32_le(std::ofstream& out, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff),
                        static_cast<unsigned char>((v >> 16) & 0xff),
                        static_cast<unsigned char>((v >> 24) & 0xff)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t read_u32_le(std::ifstream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

void write_f32_le(std::ofstream& out, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  write_u32_le(out, bits);
}

float read_f32_le(std::ifstream& in) {
  std::uint32_t bits = read_u32_le(in);
  float v;
  std::memcpy(&v, &bits, 4);
  return v;
}

}  // namespace

EmbeddingStore::EmbeddingStore(std::filesystem::path dir, Space space)
    : dir_(std::move(dir)), space_(space) {
  std::filesystem::create_directories(dir_);
}

std::filesystem::path EmbeddingStore::bin_path() const {
  return dir_ / ("emb." + to_string(space_) + ".bin");
}

std::filesystem::path EmbeddingStore::idx_path() const {
  return dir_ / ("emb." + to_string(space_) + ".idx.jsonl");
}

EmbeddingStore EmbeddingStore::open(const std::filesystem::path& dir, Space space) {
  EmbeddingStore store(dir, space);
  store.load();
  return store;
}

void EmbeddingStore::load() {
  std::ifstream idx(idx_path());
  if (!idx) return;
  std::ifstream bin(bin_path(), std::ios::binary);
  if (!bin) throw DataError("index present but missing bin file: " + bin_path().string());

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(idx, line)) {
    ++line_no;
    if (line.empty()) continue;
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& e) {
      throw DataError(idx_path().string() + " line " + std::to_string(line_no) + ": " + e.what());
    }
    const std::string id = obj.at("item_id").get<std::string>();
    const std::uint64_t offset = obj.at("offset").get<std::uint64_t>();
    const std::uint32_t dim = obj.at("dim").get<std::uint32_t>();

    bin.seekg(static_cast<std::streamoff>(offset));
    const std::uint32_t stored = read_u32_le(bin);
    if (!bin || stored != dim) {
      throw DataError("corrupt embedding record for '" + id + "' in " + bin_path().string());
    }
    std::vector<float> vec(dim);
    for (std::uint32_t i = 0; i < dim; ++i) vec[i] = read_f32_le(bin);
    if (!bin) throw DataError("truncated embedding record for '" + id + "'");

    if (dim_ == 0) dim_ = static_cast<int>(dim);
    if (static_cast<int>(dim) != dim_) {
      throw DataError("dimension mismatch in space '" + to_string(space_) + "': " +
                      std::to_string(dim) + " vs " + std::to_string(dim_));
    }
    if (!records_.count(id)) order_.push_back(id);
    records_[id] = std::move(vec);
  }
}

void EmbeddingStore::put(const std::string& item_id, std::span<const float> vec) {
  if (vec.empty()) throw DataError("refusing to store empty vector for '" + item_id + "'");
  std::lock_guard<std::mutex> lock(*write_mutex_);
  if (dim_ == 0) dim_ = static_cast<int>(vec.size());
  if (static_cast<int>(vec.size()) != dim_) {
    throw DataError("dimension mismatch in space '" + to_string(space_) + "': put " +
                    std::to_string(vec.size()) + ", store has " + std::to_string(dim_));
  }

  std::uint64_t offset = 0;
  {
    std::ofstream bin(bin_path(), std::ios::binary | std::ios::app);
    if (!bin) throw DataError("cannot append to " + bin_path().string());
    offset = static_cast<std::uint64_t>(bin.tellp());
    write_u32_le(bin, static_cast<std::uint32_t>(vec.size()));
    for (float v : vec) write_f32_le(bin, v);
    bin.flush();
    if (!bin) throw DataError("write failed on " + bin_path().string());
  }
  {
    std::ofstream idx(idx_path(), std::ios::app);
    if (!idx) throw DataError("cannot append to " + idx_path().string());
    json obj{{"item_id", item_id}, {"offset", offset}, {"dim", vec.size()}};
    idx << obj.dump() << '\n';
    idx.flush();
    if (!idx) throw DataError("write failed on " + idx_path().string());
  }

  if (!records_.count(item_id)) order_.push_back(item_id);
  records_[item_id] = std::vector<float>(vec.begin(), vec.end());
}

bool EmbeddingStore::contains(const std::string& item_id) const {
  return records_.count(item_id) > 0;
}

std::optional<std::vector<float>> EmbeddingStore::get(const std::string& item_id) const {
  auto it = records_.find(item_id);
  if (it == records_.end()) return std::nullopt;
  return it->second;
}

const std::vector<float>& EmbeddingStore::at(const std::string& item_id) const {
  auto it = records_.find(item_id);
  if (it == records_.end()) {
    throw DataError("no '" + to_string(space_) + "' embedding for item '" + item_id + "'");
  }
  return it->second;
}

std::size_t EmbeddingStore::size() const { return records_.size(); }

std::vector<std::string> EmbeddingStore::ids() const { return order_; }

}  // namespace ragrec
