#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "ragrec/config.hpp"

namespace ragrec {

struct StageResult {
  std::string stage;
  bool skipped = false;
  double seconds = 0.0;
};

// Stage runner: every stage reads its dependencies' artifacts from the
// output directory, writes its own plus a manifest (config hash, input
// content hashes, outputs, timing). A rerun whose manifest still matches
// is skipped.
class Pipeline {
 public:
  explicit Pipeline(PipelineConfig config, std::ostream* log = nullptr);

  // Topological order; `all` visits exactly this sequence.
  static const std::vector<std::string>& stage_names();
  static const std::vector<std::string>& dependencies(const std::string& stage);

  StageResult run_stage(const std::string& stage, bool force = false);
  std::vector<StageResult> run_all(bool force = false);

  // One analysis on demand (mode: length | variance), outside the manifest
  // flow; still requires the fuse stage's artifacts.
  void run_analysis(const std::string& mode, int window_override = 0);

  std::filesystem::path out(const std::string& rel) const;
  const PipelineConfig& config() const { return config_; }

 private:
  bool can_skip(const std::string& stage) const;
  void write_manifest(const std::string& stage, double seconds) const;
  std::vector<std::string> stage_inputs(const std::string& stage) const;   // files
  std::vector<std::string> stage_outputs(const std::string& stage) const;  // files
  void check_dependencies(const std::string& stage) const;

  void run_ingest();
  void run_describe();
  void run_embed_text();
  void run_train_collab();
  void run_train_ssl();
  void run_mix();
  void run_retrieve();
  void run_gen_prompts();
  void run_infer();
  void run_fuse();
  void run_eval();
  void run_analyze();

  PipelineConfig config_;
  std::ostream* log_;
};

}  // namespace ragrec
