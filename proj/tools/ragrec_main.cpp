#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "ragrec/config.hpp"
#include "ragrec/error.hpp"
#include "ragrec/evalkit.hpp"
#include "ragrec/pipeline.hpp"

namespace {

struct Overrides {
  std::optional<int> k_core, threshold;
  std::optional<int> collab_dim, collab_layers, collab_epochs;
  std::optional<std::uint64_t> collab_seed;
  std::optional<double> tau;
  std::optional<int> ssl_epochs;
  std::optional<std::uint64_t> ssl_seed;
  std::optional<int> k;
  std::optional<double> gamma, beta;
  std::optional<std::string> dup_policy;
  std::optional<std::string> template_path;
  std::optional<bool> augment;
  std::optional<std::string> backend;
  std::optional<int> k_traces;
  std::optional<double> temperature;
  std::optional<double> alpha, epsilon;
  std::optional<int> window;
  std::optional<std::string> output_dir;
};

void apply(const Overrides& o, ragrec::PipelineConfig& cfg) {
  if (o.k_core) cfg.corpus.k_core = *o.k_core;
  if (o.threshold) cfg.corpus.threshold = *o.threshold;
  if (o.collab_dim) cfg.collab.dim = *o.collab_dim;
  if (o.collab_layers) cfg.collab.layers = *o.collab_layers;
  if (o.collab_epochs) cfg.collab.epochs = *o.collab_epochs;
  if (o.collab_seed) cfg.collab.seed = *o.collab_seed;
  if (o.tau) cfg.ssl.tau = *o.tau;
  if (o.ssl_epochs) cfg.ssl.epochs = *o.ssl_epochs;
  if (o.ssl_seed) cfg.ssl.seed = *o.ssl_seed;
  if (o.k) cfg.rerank.k = *o.k;
  if (o.gamma) cfg.rerank.gamma = *o.gamma;
  if (o.beta) cfg.rerank.beta = *o.beta;
  if (o.dup_policy) cfg.rerank.duplicate_policy = ragrec::dup_policy_from_string(*o.dup_policy);
  if (o.template_path) cfg.prompt.template_path = *o.template_path;
  if (o.augment) cfg.prompt.augment = *o.augment;
  if (o.backend) cfg.gateway.backend = *o.backend;
  if (o.k_traces) cfg.fusion.k_traces = *o.k_traces;
  if (o.temperature) cfg.fusion.temperature = *o.temperature;
  if (o.alpha) cfg.fusion.alpha = *o.alpha;
  if (o.epsilon) cfg.fusion.epsilon = *o.epsilon;
  if (o.window) cfg.eval.window = *o.window;
  if (o.output_dir) cfg.output_dir = *o.output_dir;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Retrieval-augmented recommendation pipeline"};
  app.require_subcommand(1);

  std::string config_path;
  app.add_option("-c,--config", config_path, "Pipeline config file (JSON)")->required();

  Overrides o;
  std::string run_stage;
  bool force = false;
  std::string analyze_mode;

  auto add_stage = [&](const std::string& name, const std::string& desc) {
    CLI::App* sub = app.add_subcommand(name, desc);
    sub->callback([&run_stage, name] { run_stage = name; });
    sub->add_option("--output-dir", o.output_dir, "Override the output directory");
    sub->add_flag("--force", force, "Ignore manifests and recompute");
    return sub;
  };

  CLI::App* ingest = add_stage("ingest", "Load, k-core filter, and binarize the corpus");
  ingest->add_option("--k-core", o.k_core, "k-core threshold");
  ingest->add_option("--threshold", o.threshold, "Rating threshold for label=1");

  add_stage("describe", "Generate and cache item descriptions");
  add_stage("embed-text", "Embed titles and descriptions, build text embeddings");

  CLI::App* tc = add_stage("train-collab", "Train collaborative item embeddings");
  tc->add_option("--dim", o.collab_dim, "Embedding dimension");
  tc->add_option("--layers", o.collab_layers, "Propagation layers");
  tc->add_option("--epochs", o.collab_epochs, "Training epochs");
  tc->add_option("--seed", o.collab_seed, "Training seed");

  CLI::App* ts = add_stage("train-ssl", "Align text and collaborative embeddings");
  ts->add_option("--tau", o.tau, "Contrastive temperature");
  ts->add_option("--epochs", o.ssl_epochs, "Training epochs");
  ts->add_option("--seed", o.ssl_seed, "Training seed");

  add_stage("mix", "Build normalized mixed embeddings");

  CLI::App* rt = add_stage("retrieve", "Retrieve and rerank per-user history items");
  rt->add_option("--k", o.k, "History budget K");
  rt->add_option("--gamma", o.gamma, "Embedding channel weight");
  rt->add_option("--beta", o.beta, "Position decay exponent");
  rt->add_option("--dup-policy", o.dup_policy, "Cross-channel duplicate policy (sum|max)");

  CLI::App* gp = add_stage("gen-prompts", "Render prompts and the tuning dataset");
  gp->add_option("--template", o.template_path, "Task template file");
  gp->add_flag("--augment,!--no-augment", o.augment, "Order-based data augmentation");

  CLI::App* inf = add_stage("infer", "Sample model estimates per test prompt");
  inf->add_option("--backend", o.backend, "Gateway backend (mock|http)");
  inf->add_option("--k-traces", o.k_traces, "Reasoning traces per sample");
  inf->add_option("--temperature", o.temperature, "Sampling temperature");

  CLI::App* fu = add_stage("fuse", "Merge reasoning and general estimates");
  fu->add_option("--alpha", o.alpha, "Reasoning weight");
  fu->add_option("--epsilon", o.epsilon, "Variance stabilizer");

  add_stage("eval", "Compute AUC, log loss, and accuracy");

  CLI::App* an = add_stage("analyze", "Length and variance diagnostics");
  an->add_option("--mode", analyze_mode, "Restrict to one analysis (length|variance)")
      ->check(CLI::IsMember({"length", "variance"}));
  an->add_option("--window", o.window, "Variance window size");

  add_stage("all", "Run every stage in order");
  add_stage("validate", "Check the config and report every violation");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    ragrec::PipelineConfig cfg = ragrec::PipelineConfig::load_file(config_path);
    apply(o, cfg);

    if (run_stage == "validate") {
      auto problems = ragrec::validate(cfg);
      if (problems.empty()) {
        std::cout << "config ok\n";
        return 0;
      }
      for (const auto& p : problems) std::cout << p << '\n';
      return 2;
    }

    ragrec::Pipeline pipeline(cfg, &std::cerr);
    if (run_stage == "all") {
      for (const auto& r : pipeline.run_all(force)) {
        std::cout << r.stage << (r.skipped ? " skipped" : " ok") << '\n';
      }
    } else if (run_stage == "analyze" && !analyze_mode.empty()) {
      pipeline.run_analysis(analyze_mode, o.window.value_or(0));
      std::cout << "analyze (" << analyze_mode << ") ok\n";
    } else {
      auto result = pipeline.run_stage(run_stage, force);
      std::cout << result.stage << (result.skipped ? " skipped" : " ok") << '\n';
    }
    return 0;
  } catch (const ragrec::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}
