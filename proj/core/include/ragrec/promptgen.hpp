#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ragrec/text_template.hpp"

namespace ragrec {

// Task template for prediction prompts. The body must contain each of the
// slots {profile}, {history_block}, {target_item}, {instruction} exactly
// once.
class PromptTemplate {
 public:
  static PromptTemplate parse(std::string name, std::string body);
  static PromptTemplate load_file(const std::filesystem::path& path);
  static PromptTemplate builtin_default();

  std::string render(const std::string& profile, const std::string& history_block,
                     const std::string& target_item, const std::string& instruction) const;

  const std::string& name() const { return tmpl_.name(); }
  const std::string& body() const { return tmpl_.body(); }

 private:
  explicit PromptTemplate(TextTemplate tmpl) : tmpl_(std::move(tmpl)) {}
  TextTemplate tmpl_;
};

struct PromptLine {
  std::string item_id;
  std::string title;
  int label = 0;
  std::int64_t timestamp = 0;
};

struct PromptInstance {
  std::string user_id;
  std::string text;
  std::optional<int> label;            // present for training instances
  std::vector<std::string> provenance; // item ids in rendered order
};

// Default instruction used when the caller does not override it.
std::string default_instruction();

// Renders the history in the given order (callers sort beforehand), one
// "Title (liked|disliked)" line per item; an empty history renders an
// explicit no-prior-items line. Deterministic.
PromptInstance render_prompt(const std::vector<PromptLine>& history, const PromptLine& target,
                             const std::string& profile, const PromptTemplate& tmpl,
                             const std::string& instruction = default_instruction());

// Stable chronological ordering (ties keep input order).
std::vector<PromptLine> chronological(std::vector<PromptLine> lines);

// Order-based training augmentation: one instance in retrieval order, one
// in timestamp order; identical variants collapse to one. The target label
// becomes the instance label.
std::vector<PromptInstance> augment(const std::vector<PromptLine>& retrieval_order,
                                    const PromptLine& target, const std::string& profile,
                                    const PromptTemplate& tmpl,
                                    const std::string& instruction = default_instruction());

// Instruction-tuning dataset: JSONL of {"prompt":..., "completion":"Yes"|"No"}.
// Every instance must be labeled.
void emit_it_dataset(const std::vector<PromptInstance>& instances,
                     const std::filesystem::path& path);

struct ItExample {
  std::string prompt;
  std::string completion;
};
std::vector<ItExample> load_it_dataset(const std::filesystem::path& path);

}  // namespace ragrec
