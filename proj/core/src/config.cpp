#include "ragrec/config.hpp"

#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "ragrec/error.hpp"
#include "ragrec/hash.hpp"

namespace ragrec {

using ordered_json = nlohmann::ordered_json;

namespace {

template <typename T>
void read_if(const ordered_json& obj, const char* key, T& out) {
  if (obj.contains(key)) out = obj.at(key).get<T>();
}

}  // namespace

PipelineConfig PipelineConfig::load_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open config file: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return from_json_text(buf.str(), path.string());
}

PipelineConfig PipelineConfig::from_json_text(const std::string& text, const std::string& origin) {
  ordered_json obj;
  try {
    obj = ordered_json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(origin + ": " + e.what());
  }

  PipelineConfig cfg;
  read_if(obj, "name", cfg.name);
  read_if(obj, "seed", cfg.seed);
  read_if(obj, "output_dir", cfg.output_dir);

  if (obj.contains("corpus")) {
    const auto& c = obj["corpus"];
    read_if(c, "interactions", cfg.corpus.interactions);
    read_if(c, "items", cfg.corpus.items);
    read_if(c, "format", cfg.corpus.format);
    read_if(c, "k_core", cfg.corpus.k_core);
    read_if(c, "threshold", cfg.corpus.threshold);
  }
  if (obj.contains("gateway")) {
    const auto& g = obj["gateway"];
    read_if(g, "backend", cfg.gateway.backend);
    read_if(g, "base_url", cfg.gateway.base_url);
    read_if(g, "api_key_env", cfg.gateway.api_key_env);
    read_if(g, "chat_model", cfg.gateway.chat_model);
    read_if(g, "reasoning_model", cfg.gateway.reasoning_model);
    read_if(g, "embed_model", cfg.gateway.embed_model);
    read_if(g, "embed_dim", cfg.gateway.embed_dim);
    read_if(g, "max_in_flight", cfg.gateway.max_in_flight);
    read_if(g, "max_attempts", cfg.gateway.max_attempts);
    read_if(g, "backoff_base_s", cfg.gateway.backoff_base_s);
  }

  cfg.collab.seed = cfg.derived_seed("collab");
  if (obj.contains("collab")) {
    const auto& c = obj["collab"];
    read_if(c, "dim", cfg.collab.dim);
    read_if(c, "layers", cfg.collab.layers);
    read_if(c, "lr", cfg.collab.lr);
    read_if(c, "epochs", cfg.collab.epochs);
    read_if(c, "batch_size", cfg.collab.batch_size);
    read_if(c, "neg_samples", cfg.collab.neg_samples);
    read_if(c, "l2_reg", cfg.collab.l2_reg);
    read_if(c, "seed", cfg.collab.seed);
  }

  cfg.ssl.seed = cfg.derived_seed("ssl");
  if (obj.contains("ssl")) {
    const auto& s = obj["ssl"];
    read_if(s, "tau", cfg.ssl.tau);
    read_if(s, "lr", cfg.ssl.lr);
    read_if(s, "epochs", cfg.ssl.epochs);
    read_if(s, "batch_size", cfg.ssl.batch_size);
    read_if(s, "seed", cfg.ssl.seed);
  }
  if (obj.contains("rerank")) {
    const auto& r = obj["rerank"];
    read_if(r, "k", cfg.rerank.k);
    read_if(r, "gamma", cfg.rerank.gamma);
    read_if(r, "beta", cfg.rerank.beta);
    if (r.contains("duplicate_policy")) {
      cfg.rerank.duplicate_policy = dup_policy_from_string(r["duplicate_policy"].get<std::string>());
    }
  }
  if (obj.contains("fusion")) {
    const auto& f = obj["fusion"];
    read_if(f, "alpha", cfg.fusion.alpha);
    read_if(f, "epsilon", cfg.fusion.epsilon);
    read_if(f, "k_traces", cfg.fusion.k_traces);
    read_if(f, "temperature", cfg.fusion.temperature);
    read_if(f, "general_route", cfg.fusion.general_route);
  }
  if (obj.contains("prompt")) {
    const auto& p = obj["prompt"];
    read_if(p, "template", cfg.prompt.template_path);
    read_if(p, "desc_template", cfg.prompt.desc_template_path);
    read_if(p, "augment", cfg.prompt.augment);
  }
  if (obj.contains("eval")) {
    read_if(obj["eval"], "window", cfg.eval.window);
  }

  // Secrets stay out of config files; only the base URL may be overridden
  // from the environment alongside the API key.
  if (const char* url = std::getenv("RAGREC_BASE_URL")) {
    if (*url) cfg.gateway.base_url = url;
  }
  return cfg;
}

std::string PipelineConfig::to_json_text() const {
  ordered_json obj;
  obj["name"] = name;
  obj["seed"] = seed;
  obj["output_dir"] = output_dir;
  obj["corpus"] = {{"interactions", corpus.interactions},
                   {"items", corpus.items},
                   {"format", corpus.format},
                   {"k_core", corpus.k_core},
                   {"threshold", corpus.threshold}};
  obj["gateway"] = {{"backend", gateway.backend},
                    {"base_url", gateway.base_url},
                    {"api_key_env", gateway.api_key_env},
                    {"chat_model", gateway.chat_model},
                    {"reasoning_model", gateway.reasoning_model},
                    {"embed_model", gateway.embed_model},
                    {"embed_dim", gateway.embed_dim},
                    {"max_in_flight", gateway.max_in_flight},
                    {"max_attempts", gateway.max_attempts},
                    {"backoff_base_s", gateway.backoff_base_s}};
  obj["collab"] = {{"dim", collab.dim},     {"layers", collab.layers},
                   {"lr", collab.lr},       {"epochs", collab.epochs},
                   {"batch_size", collab.batch_size}, {"neg_samples", collab.neg_samples},
                   {"l2_reg", collab.l2_reg}, {"seed", collab.seed}};
  obj["ssl"] = {{"tau", ssl.tau},
                {"lr", ssl.lr},
                {"epochs", ssl.epochs},
                {"batch_size", ssl.batch_size},
                {"seed", ssl.seed}};
  obj["rerank"] = {{"k", rerank.k},
                   {"gamma", rerank.gamma},
                   {"beta", rerank.beta},
                   {"duplicate_policy", to_string(rerank.duplicate_policy)}};
  obj["fusion"] = {{"alpha", fusion.alpha},
                   {"epsilon", fusion.epsilon},
                   {"k_traces", fusion.k_traces},
                   {"temperature", fusion.temperature},
                   {"general_route", fusion.general_route}};
  obj["prompt"] = {{"template", prompt.template_path},
                   {"desc_template", prompt.desc_template_path},
                   {"augment", prompt.augment}};
  obj["eval"] = {{"window", eval.window}};
  return obj.dump(2);
}

std::uint64_t PipelineConfig::derived_seed(const std::string& stage_tag) const {
  std::uint64_t state = seed ^ fnv1a64(stage_tag);
  return splitmix64_next(state);
}

std::vector<std::string> validate(const PipelineConfig& cfg) {
  std::vector<std::string> out;
  auto bad = [&out](const std::string& msg) { out.push_back(msg); };

  if (cfg.output_dir.empty()) bad("output_dir: must not be empty");

  if (cfg.corpus.interactions.empty()) {
    bad("corpus.interactions: no input file configured");
  } else if (!std::filesystem::exists(cfg.corpus.interactions)) {
    bad("corpus.interactions: file not found: " + cfg.corpus.interactions);
  }
  if (!cfg.corpus.items.empty() && !std::filesystem::exists(cfg.corpus.items)) {
    bad("corpus.items: file not found: " + cfg.corpus.items);
  }
  if (cfg.corpus.format != "csv" && cfg.corpus.format != "jsonl") {
    bad("corpus.format: expected csv or jsonl, got '" + cfg.corpus.format + "'");
  }
  if (cfg.corpus.k_core < 1) bad("corpus.k_core: must be >= 1");

  if (cfg.gateway.backend != "mock" && cfg.gateway.backend != "http") {
    bad("gateway.backend: expected mock or http, got '" + cfg.gateway.backend + "'");
  }
  if (cfg.gateway.backend == "http" && cfg.gateway.base_url.empty()) {
    bad("gateway.base_url: required for the http backend (or set RAGREC_BASE_URL)");
  }
  if (cfg.gateway.embed_dim < 1) bad("gateway.embed_dim: must be >= 1");
  if (cfg.gateway.max_in_flight < 1) bad("gateway.max_in_flight: must be >= 1");
  if (cfg.gateway.max_attempts < 1) bad("gateway.max_attempts: must be >= 1");
  if (cfg.gateway.backoff_base_s < 0) bad("gateway.backoff_base_s: must be >= 0");

  if (cfg.collab.dim < 1) bad("collab.dim: must be >= 1");
  if (cfg.collab.layers < 0) bad("collab.layers: must be >= 0");
  if (cfg.collab.lr <= 0) bad("collab.lr: must be > 0");
  if (cfg.collab.epochs < 1) bad("collab.epochs: must be >= 1");
  if (cfg.collab.batch_size < 1) bad("collab.batch_size: must be >= 1");
  if (cfg.collab.neg_samples < 1) bad("collab.neg_samples: must be >= 1");
  if (cfg.collab.l2_reg < 0) bad("collab.l2_reg: must be >= 0");

  if (cfg.ssl.tau <= 0) bad("ssl.tau: must be > 0");
  if (cfg.ssl.lr <= 0) bad("ssl.lr: must be > 0");
  if (cfg.ssl.epochs < 1) bad("ssl.epochs: must be >= 1");
  if (cfg.ssl.batch_size < 2) bad("ssl.batch_size: must be >= 2 (in-batch negatives)");

  if (cfg.rerank.k < 1) bad("rerank.k: must be >= 1");
  if (cfg.rerank.gamma < 0 || cfg.rerank.gamma > 1) {
    bad("rerank.gamma: must be in [0,1], got " + std::to_string(cfg.rerank.gamma));
  }
  if (cfg.rerank.beta < 0) bad("rerank.beta: must be >= 0");

  if (cfg.fusion.alpha <= 0) bad("fusion.alpha: must be > 0");
  if (cfg.fusion.epsilon <= 0) bad("fusion.epsilon: must be > 0");
  if (cfg.fusion.k_traces < 1) bad("fusion.k_traces: must be >= 1");
  if (cfg.fusion.temperature < 0) bad("fusion.temperature: must be >= 0");
  if (cfg.fusion.general_route != "score" && cfg.fusion.general_route != "sample") {
    bad("fusion.general_route: expected score or sample");
  }
  if (cfg.fusion.general_route == "score" && cfg.gateway.backend == "http") {
    bad("fusion.general_route: the http backend exposes no scalar scorer; use 'sample'");
  }

  if (!cfg.prompt.template_path.empty() && !std::filesystem::exists(cfg.prompt.template_path)) {
    bad("prompt.template: file not found: " + cfg.prompt.template_path);
  }
  if (!cfg.prompt.desc_template_path.empty() &&
      !std::filesystem::exists(cfg.prompt.desc_template_path)) {
    bad("prompt.desc_template: file not found: " + cfg.prompt.desc_template_path);
  }

  if (cfg.eval.window < 1) bad("eval.window: must be >= 1");
  return out;
}

std::string config_hash(const PipelineConfig& config) {
  return to_hex(fnv1a64(config.to_json_text()));
}

}  // namespace ragrec
