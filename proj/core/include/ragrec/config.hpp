#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ragrec/collab.hpp"
#include "ragrec/fusion.hpp"
#include "ragrec/joint.hpp"
#include "ragrec/retrieval.hpp"

namespace ragrec {

struct CorpusConfig {
  std::string interactions;
  std::string items;  // optional metadata file
  std::string format = "csv";
  int k_core = 5;
  int threshold = 4;  // rating >= threshold reads as a positive label
};

struct GatewayStageConfig {
  std::string backend = "mock";  // mock | http
  std::string base_url;          // http only; env RAGREC_BASE_URL overrides
  std::string api_key_env = "RAGREC_API_KEY";
  std::string chat_model = "mock-general";
  std::string reasoning_model = "mock-reasoning";
  std::string embed_model = "mock-embed";
  int embed_dim = 32;
  int max_in_flight = 4;
  int max_attempts = 3;
  double backoff_base_s = 1.0;
};

struct PromptStageConfig {
  std::string template_path;       // empty = builtin task template
  std::string desc_template_path;  // empty = builtin description template
  bool augment = true;
};

struct EvalStageConfig {
  int window = 20;  // variance analysis window size
};

struct FusionStageConfig : FusionConfig {
  std::string general_route = "score";  // score | sample
};

// One structured file drives the whole pipeline. Per-stage seeds derive
// from the global seed unless set explicitly.
struct PipelineConfig {
  std::string name = "run";
  std::uint64_t seed = 42;
  std::string output_dir = "out";

  CorpusConfig corpus;
  GatewayStageConfig gateway;
  CollabTrainConfig collab;
  SslConfig ssl;
  RerankConfig rerank;
  FusionStageConfig fusion;
  PromptStageConfig prompt;
  EvalStageConfig eval;

  static PipelineConfig load_file(const std::filesystem::path& path);
  static PipelineConfig from_json_text(const std::string& text, const std::string& origin);

  // Canonical serialized form, also used for manifest hashing.
  std::string to_json_text() const;

  std::uint64_t derived_seed(const std::string& stage_tag) const;
};

// Checks every embedded config invariant and returns all violations
// (never just the first one).
std::vector<std::string> validate(const PipelineConfig& config);

std::string config_hash(const PipelineConfig& config);

}  // namespace ragrec
