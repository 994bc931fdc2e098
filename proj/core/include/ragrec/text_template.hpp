#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace ragrec {

// Plain-text template with named {slot} placeholders. "{{" and "}}" render
// as literal braces.
class TextTemplate {
 public:
  static TextTemplate parse(std::string name, std::string body);
  static TextTemplate load_file(const std::filesystem::path& path);

  // Every slot must be bound; an unbound slot is a template error
  // (DataError). Extra bindings are ignored.
  std::string render(const std::map<std::string, std::string>& slots) const;

  const std::string& name() const { return name_; }
  const std::string& body() const { return body_; }
  const std::vector<std::string>& slots() const { return slots_; }
  std::size_t slot_count(const std::string& slot) const;

 private:
  std::string name_;
  std::string body_;
  std::vector<std::string> slots_;  // in order of appearance, with repeats
};

}  // namespace ragrec
