#include "ragrec/promptgen.hpp"

#include <algorithm>
#include <fstream>

#include <nlohmann/json.hpp>

#include "ragrec/error.hpp"

namespace ragrec {

using json = nlohmann::json;

namespace {

constexpr const char* kDefaultTemplateBody =
    "{instruction}\n"
    "\n"
    "User profile: {profile}\n"
    "The user's rated items so far, in order:\n"
    "{history_block}\n"
    "Target item: {target_item}\n"
    "Question: Will the user give a positive rating to the target item? "
    "Answer \"Yes\" or \"No\".\n";

void check_slots(const TextTemplate& t) {
  for (const char* slot : {"profile", "history_block", "target_item", "instruction"}) {
    const std::size_t n = t.slot_count(slot);
    if (n != 1) {
      throw DataError("prompt template '" + t.name() + "': slot {" + slot + "} appears " +
                      std::to_string(n) + " times, expected exactly once");
    }
  }
}

}  // namespace

PromptTemplate PromptTemplate::parse(std::string name, std::string body) {
  TextTemplate t = TextTemplate::parse(std::move(name), std::move(body));
  check_slots(t);
  return PromptTemplate(std::move(t));
}

PromptTemplate PromptTemplate::load_file(const std::filesystem::path& path) {
  TextTemplate t = TextTemplate::load_file(path);
  check_slots(t);
  return PromptTemplate(std::move(t));
}

PromptTemplate PromptTemplate::builtin_default() {
  return parse("ctr_default", kDefaultTemplateBody);
}

std::string PromptTemplate::render(const std::string& profile, const std::string& history_block,
                                   const std::string& target_item,
                                   const std::string& instruction) const {
  return tmpl_.render({{"profile", profile},
                       {"history_block", history_block},
                       {"target_item", target_item},
                       {"instruction", instruction}});
}

std::string default_instruction() {
  return "You are a recommendation assistant. Given the user's behavior history, "
         "predict whether the user will enjoy the target item.";
}

PromptInstance render_prompt(const std::vector<PromptLine>& history, const PromptLine& target,
                             const std::string& profile, const PromptTemplate& tmpl,
                             const std::string& instruction) {
  std::string block;
  if (history.empty()) {
    block = "(no prior items)";
  } else {
    for (std::size_t i = 0; i < history.size(); ++i) {
      if (i) block += '\n';
      block += std::to_string(i + 1) + ". " + history[i].title + " (" +
               (history[i].label ? "liked" : "disliked") + ")";
    }
  }

  PromptInstance inst;
  inst.user_id = profile;
  inst.text = tmpl.render(profile, block, target.title, instruction);
  inst.provenance.reserve(history.size());
  for (const auto& line : history) inst.provenance.push_back(line.item_id);
  return inst;
}

std::vector<PromptLine> chronological(std::vector<PromptLine> lines) {
  std::stable_sort(lines.begin(), lines.end(), [](const PromptLine& a, const PromptLine& b) {
    return a.timestamp < b.timestamp;
  });
  return lines;
}

std::vector<PromptInstance> augment(const std::vector<PromptLine>& retrieval_order,
                                    const PromptLine& target, const std::string& profile,
                                    const PromptTemplate& tmpl, const std::string& instruction) {
  PromptInstance by_retrieval = render_prompt(retrieval_order, target, profile, tmpl, instruction);
  by_retrieval.label = target.label;

  PromptInstance by_time =
      render_prompt(chronological(retrieval_order), target, profile, tmpl, instruction);
  by_time.label = target.label;

  std::vector<PromptInstance> out;
  out.push_back(std::move(by_retrieval));
  if (out[0].text != by_time.text) out.push_back(std::move(by_time));
  return out;
}

void emit_it_dataset(const std::vector<PromptInstance>& instances,
                     const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write dataset: " + path.string());
  for (const auto& inst : instances) {
    if (!inst.label) {
      throw DataError("unlabeled instance for user '" + inst.user_id +
                      "' cannot join the instruction-tuning dataset");
    }
    json obj{{"prompt", inst.text}, {"completion", *inst.label ? "Yes" : "No"}};
    out << obj.dump() << '\n';
  }
}

std::vector<ItExample> load_it_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open dataset: " + path.string());
  std::vector<ItExample> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& e) {
      throw DataError(path.string() + " line " + std::to_string(line_no) + ": " + e.what());
    }
    out.push_back(ItExample{obj.at("prompt").get<std::string>(),
                            obj.at("completion").get<std::string>()});
  }
  return out;
}

}  // namespace ragrec
