#include "ragrec/text_template.hpp"

#include <fstream>
#include <sstream>

#include "ragrec/error.hpp"

namespace ragrec {

TextTemplate TextTemplate::parse(std::string name, std::string body) {
  TextTemplate t;
  t.name_ = std::move(name);
  t.body_ = std::move(body);
  const std::string& b = t.body_;
  for (std::size_t i = 0; i < b.size(); ++i) {
    if (b[i] == '{') {
      if (i + 1 < b.size() && b[i + 1] == '{') {
        ++i;
        continue;
      }
      auto close = b.find('}', i + 1);
      if (close == std::string::npos) {
        throw DataError("template '" + t.name_ + "': unterminated '{' at offset " +
                        std::to_string(i));
      }
      std::string slot = b.substr(i + 1, close - i - 1);
      if (slot.empty() || slot.find_first_of("{} \t\n") != std::string::npos) {
        throw DataError("template '" + t.name_ + "': invalid slot name '" + slot + "'");
      }
      t.slots_.push_back(std::move(slot));
      i = close;
    } else if (b[i] == '}' && i + 1 < b.size() && b[i + 1] == '}') {
      ++i;
    }
  }
  return t;
}

TextTemplate TextTemplate::load_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open template file: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(path.stem().string(), buf.str());
}

std::string TextTemplate::render(const std::map<std::string, std::string>& slots) const {
  std::string out;
  out.reserve(body_.size());
  for (std::size_t i = 0; i < body_.size(); ++i) {
    char c = body_[i];
    if (c == '{') {
      if (i + 1 < body_.size() && body_[i + 1] == '{') {
        out += '{';
        ++i;
        continue;
      }
      auto close = body_.find('}', i + 1);
      std::string slot = body_.substr(i + 1, close - i - 1);
      auto it = slots.find(slot);
      if (it == slots.end()) {
        throw DataError("template '" + name_ + "': unbound slot '" + slot + "'");
      }
      out += it->second;
      i = close;
    } else if (c == '}' && i + 1 < body_.size() && body_[i + 1] == '}') {
      out += '}';
      ++i;
    } else {
      out += c;
    }
  }
  return out;
}

std::size_t TextTemplate::slot_count(const std::string& slot) const {
  std::size_t n = 0;
  for (const auto& s : slots_) {
    if (s == slot) ++n;
  }
  return n;
}

}  // namespace ragrec
