#include "ragrec/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <exception>
#include <fstream>
#include <map>
#include <ostream>
#include <thread>

#include <nlohmann/json.hpp>

#include "ragrec/collab.hpp"
#include "ragrec/error.hpp"
#include "ragrec/evalkit.hpp"
#include "ragrec/fusion.hpp"
#include "ragrec/gateway.hpp"
#include "ragrec/hash.hpp"
#include "ragrec/joint.hpp"
#include "ragrec/promptgen.hpp"
#include "ragrec/retrieval.hpp"

namespace ragrec {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

namespace {

constexpr const char* kDescTemplateBody =
    "Introduce the item titled \"{title}\" and write a detailed description "
    "covering its key attributes: {attributes}.";

struct StageSpec {
  const char* name;
  std::vector<std::string> deps;
};

const std::vector<StageSpec>& stage_specs() {
  static const std::vector<StageSpec> specs = {
      {"ingest", {}},
      {"describe", {"ingest"}},
      {"embed-text", {"describe"}},
      {"train-collab", {"ingest"}},
      {"train-ssl", {"embed-text", "train-collab"}},
      {"mix", {"embed-text", "train-collab", "train-ssl"}},
      {"retrieve", {"ingest", "mix"}},
      {"gen-prompts", {"ingest", "retrieve"}},
      {"infer", {"gen-prompts"}},
      {"fuse", {"infer"}},
      {"eval", {"fuse"}},
      {"analyze", {"fuse"}},
  };
  return specs;
}

const StageSpec& find_stage(const std::string& name) {
  for (const auto& s : stage_specs()) {
    if (name == s.name) return s;
  }
  throw UsageError("unknown stage '" + name + "'");
}

std::vector<float> to_float(const Eigen::VectorXd& v) {
  std::vector<float> out(static_cast<std::size_t>(v.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) out[static_cast<std::size_t>(i)] = static_cast<float>(v(i));
  return out;
}

Eigen::VectorXd to_vectorxd(const std::vector<float>& v) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) out(static_cast<Eigen::Index>(i)) = v[i];
  return out;
}

json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

json vector_to_json(const Eigen::VectorXd& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

}  // namespace

Pipeline::Pipeline(PipelineConfig config, std::ostream* log)
    : config_(std::move(config)), log_(log) {
  auto problems = validate(config_);
  if (!problems.empty()) {
    std::string msg = "invalid pipeline config:";
    for (const auto& p : problems) msg += "\n  - " + p;
    throw DataError(msg);
  }
  std::filesystem::create_directories(out(""));
  std::filesystem::create_directories(out("cache"));
  std::filesystem::create_directories(out("manifests"));
}

const std::vector<std::string>& Pipeline::stage_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out;
    for (const auto& s : stage_specs()) out.emplace_back(s.name);
    return out;
  }();
  return names;
}

const std::vector<std::string>& Pipeline::dependencies(const std::string& stage) {
  return find_stage(stage).deps;
}

std::filesystem::path Pipeline::out(const std::string& rel) const {
  return std::filesystem::path(config_.output_dir) / rel;
}

std::vector<std::string> Pipeline::stage_outputs(const std::string& stage) const {
  auto cache = [this](const std::string& name) { return out("cache/" + name).string(); };
  if (stage == "ingest") return {out("corpus.jsonl").string()};
  if (stage == "describe") return {cache("desc.jsonl")};
  if (stage == "embed-text") {
    return {cache("emb.title.bin"), cache("emb.title.idx.jsonl"),
            cache("emb.desc.bin"),  cache("emb.desc.idx.jsonl"),
            cache("emb.text.bin"),  cache("emb.text.idx.jsonl")};
  }
  if (stage == "train-collab") return {cache("emb.colla.bin"), cache("emb.colla.idx.jsonl")};
  if (stage == "train-ssl") {
    return {cache("emb.ssl.bin"), cache("emb.ssl.idx.jsonl"), out("projector.json").string()};
  }
  if (stage == "mix") return {cache("emb.mixed.bin"), cache("emb.mixed.idx.jsonl")};
  if (stage == "retrieve") return {out("retrieval.jsonl").string()};
  if (stage == "gen-prompts") return {out("prompts.jsonl").string(), out("it_dataset.jsonl").string()};
  if (stage == "infer") return {out("estimates.jsonl").string()};
  if (stage == "fuse") return {out("predictions.jsonl").string()};
  if (stage == "eval") return {out("metrics.json").string()};
  if (stage == "analyze") {
    return {out("analysis_length.csv").string(), out("analysis_variance.csv").string()};
  }
  throw UsageError("unknown stage '" + stage + "'");
}

std::vector<std::string> Pipeline::stage_inputs(const std::string& stage) const {
  std::vector<std::string> inputs;
  for (const auto& dep : dependencies(stage)) {
    for (const auto& f : stage_outputs(dep)) inputs.push_back(f);
  }
  if (stage == "ingest") {
    inputs.push_back(config_.corpus.interactions);
    if (!config_.corpus.items.empty()) inputs.push_back(config_.corpus.items);
  }
  if (stage == "describe" && !config_.prompt.desc_template_path.empty()) {
    inputs.push_back(config_.prompt.desc_template_path);
  }
  if (stage == "gen-prompts" && !config_.prompt.template_path.empty()) {
    inputs.push_back(config_.prompt.template_path);
  }
  return inputs;
}

void Pipeline::check_dependencies(const std::string& stage) const {
  for (const auto& dep : dependencies(stage)) {
    for (const auto& f : stage_outputs(dep)) {
      if (!std::filesystem::exists(f)) {
        throw DataError("stage '" + stage + "' needs artifacts from stage '" + dep +
                        "'; run `ragrec " + dep + "` first (missing " + f + ")");
      }
    }
  }
}

bool Pipeline::can_skip(const std::string& stage) const {
  const auto manifest_path = out("manifests/" + stage + ".json");
  std::ifstream in(manifest_path);
  if (!in) return false;
  json manifest;
  try {
    manifest = json::parse(in);
  } catch (const json::parse_error&) {
    return false;
  }
  if (manifest.value("config_hash", "") != config_hash(config_)) return false;
  if (!manifest.contains("inputs")) return false;
  for (const auto& [file, hash] : manifest["inputs"].items()) {
    if (!std::filesystem::exists(file)) return false;
    if (hash_file(file) != hash.get<std::string>()) return false;
  }
  for (const auto& f : stage_outputs(stage)) {
    if (!std::filesystem::exists(f)) return false;
  }
  return true;
}

void Pipeline::write_manifest(const std::string& stage, double seconds) const {
  ordered_json manifest;
  manifest["stage"] = stage;
  manifest["config_hash"] = config_hash(config_);
  ordered_json inputs = ordered_json::object();
  for (const auto& f : stage_inputs(stage)) inputs[f] = hash_file(f);
  manifest["inputs"] = inputs;
  manifest["outputs"] = stage_outputs(stage);
  manifest["duration_ms"] = static_cast<std::int64_t>(seconds * 1000.0);

  std::ofstream outf(out("manifests/" + stage + ".json"), std::ios::trunc);
  if (!outf) throw DataError("cannot write manifest for stage '" + stage + "'");
  outf << manifest.dump(2) << '\n';
}

StageResult Pipeline::run_stage(const std::string& stage, bool force) {
  find_stage(stage);  // validates the name
  check_dependencies(stage);

  if (!force && can_skip(stage)) {
    if (log_) *log_ << "[" << stage << "] up to date, skipped\n";
    return StageResult{stage, true, 0.0};
  }

  const auto t0 = std::chrono::steady_clock::now();
  if (stage == "ingest") run_ingest();
  else if (stage == "describe") run_describe();
  else if (stage == "embed-text") run_embed_text();
  else if (stage == "train-collab") run_train_collab();
  else if (stage == "train-ssl") run_train_ssl();
  else if (stage == "mix") run_mix();
  else if (stage == "retrieve") run_retrieve();
  else if (stage == "gen-prompts") run_gen_prompts();
  else if (stage == "infer") run_infer();
  else if (stage == "fuse") run_fuse();
  else if (stage == "eval") run_eval();
  else if (stage == "analyze") run_analyze();
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  write_manifest(stage, seconds);
  if (log_) *log_ << "[" << stage << "] done in " << seconds << "s\n";
  return StageResult{stage, false, seconds};
}

std::vector<StageResult> Pipeline::run_all(bool force) {
  std::vector<StageResult> results;
  for (const auto& stage : stage_names()) results.push_back(run_stage(stage, force));
  return results;
}

// ---------------------------------------------------------------------------
// Stage bodies
// ---------------------------------------------------------------------------

namespace {

struct Backends {
  std::shared_ptr<ChatBackend> general_chat;
  std::shared_ptr<ChatBackend> reasoning_chat;
  std::shared_ptr<EmbedBackend> embed;
  std::shared_ptr<ScoreBackend> score;  // null for http
};

Backends make_backends(const PipelineConfig& cfg) {
  Backends b;
  if (cfg.gateway.backend == "mock") {
    b.general_chat = std::make_shared<MockChatBackend>(MockChatConfig{
        cfg.derived_seed("chat-general"), MockFlavor::general, cfg.gateway.chat_model});
    b.reasoning_chat = std::make_shared<MockChatBackend>(MockChatConfig{
        cfg.derived_seed("chat-reasoning"), MockFlavor::reasoning, cfg.gateway.reasoning_model});
    b.embed =
        std::make_shared<MockEmbedBackend>(cfg.gateway.embed_dim, cfg.derived_seed("embed"));
    b.score = std::make_shared<MockScoreBackend>(cfg.derived_seed("score"));
  } else {
    HttpBackendConfig http;
    http.base_url = cfg.gateway.base_url;
    if (const char* key = std::getenv(cfg.gateway.api_key_env.c_str())) http.api_key = key;
    http.max_attempts = cfg.gateway.max_attempts;
    http.backoff_base_s = cfg.gateway.backoff_base_s;
    http.model = cfg.gateway.chat_model;
    b.general_chat = std::make_shared<HttpChatBackend>(http);
    http.model = cfg.gateway.reasoning_model;
    b.reasoning_chat = std::make_shared<HttpChatBackend>(http);
    http.model = cfg.gateway.embed_model;
    b.embed = std::make_shared<HttpEmbedBackend>(http, cfg.gateway.embed_dim);
  }
  return b;
}

TextTemplate description_template(const PipelineConfig& cfg) {
  if (!cfg.prompt.desc_template_path.empty()) {
    return TextTemplate::load_file(cfg.prompt.desc_template_path);
  }
  return TextTemplate::parse("desc_default", kDescTemplateBody);
}

PromptTemplate task_template(const PipelineConfig& cfg) {
  if (!cfg.prompt.template_path.empty()) {
    return PromptTemplate::load_file(cfg.prompt.template_path);
  }
  return PromptTemplate::builtin_default();
}

// The latest (title, label, timestamp) per item in this user's history.
std::map<std::string, PromptLine> history_lines(const Corpus& corpus, const UserHistory& hist) {
  std::map<std::string, PromptLine> lines;
  for (const auto& ev : hist.events) {
    const Item* item = corpus.find_item(ev.item_id);
    PromptLine line{ev.item_id, item ? item->title : ev.item_id, ev.label, ev.timestamp};
    lines[ev.item_id] = line;  // later events overwrite earlier ones
  }
  return lines;
}

}  // namespace

void Pipeline::run_ingest() {
  LoadStats stats;
  Corpus raw = load_corpus(config_.corpus.interactions,
                           corpus_format_from_string(config_.corpus.format), &stats);
  if (!config_.corpus.items.empty()) {
    attach_items(raw, config_.corpus.items, corpus_format_from_string(config_.corpus.format));
  }
  if (log_ && stats.duplicates_dropped > 0) {
    *log_ << "[ingest] dropped " << stats.duplicates_dropped << " duplicate rows\n";
  }
  Corpus filtered = k_core_filter(raw, config_.corpus.k_core);
  Corpus labeled = binarize(filtered, config_.corpus.threshold);
  if (log_) {
    *log_ << "[ingest] " << labeled.interactions().size() << " interactions, "
          << labeled.user_count() << " users, " << labeled.item_count() << " items after "
          << config_.corpus.k_core << "-core\n";
  }
  save_corpus(labeled, out("corpus.jsonl"));
}

void Pipeline::run_describe() {
  Corpus corpus = load_corpus_dump(out("corpus.jsonl"));
  Backends backends = make_backends(config_);
  Gateway gateway(backends.general_chat, backends.embed, out("cache"),
                  GatewayConfig{config_.gateway.max_in_flight});
  TextTemplate tmpl = description_template(config_);
  for (const auto& item : corpus.items()) gateway.describe(item, tmpl);
  if (log_) {
    *log_ << "[describe] " << corpus.items().size() << " items, " << gateway.backend_calls()
          << " backend calls\n";
  }
}

void Pipeline::run_embed_text() {
  Corpus corpus = load_corpus_dump(out("corpus.jsonl"));
  Backends backends = make_backends(config_);
  Gateway gateway(backends.general_chat, backends.embed, out("cache"),
                  GatewayConfig{config_.gateway.max_in_flight});
  TextTemplate tmpl = description_template(config_);

  auto title_store = EmbeddingStore::open(out("cache"), Space::title);
  auto desc_store = EmbeddingStore::open(out("cache"), Space::desc);
  auto text_store = EmbeddingStore::open(out("cache"), Space::text);

  for (const auto& item : corpus.items()) {
    const auto title_vec = gateway.embed_cached(title_store, item.item_id, item.title);
    // describe() is a cache hit here; the description must already exist.
    const ItemDescription desc = gateway.describe(item, tmpl);
    const auto desc_vec = gateway.embed_cached(desc_store, item.item_id, desc.text);
    if (!text_store.contains(item.item_id)) {
      const auto text_vec = concat_text(title_vec, desc_vec);
      text_store.put(item.item_id, text_vec);
    }
  }
}

void Pipeline::run_train_collab() {
  Corpus corpus = load_corpus_dump(out("corpus.jsonl"));
  BipartiteGraph graph = BipartiteGraph::from_corpus(corpus);
  CollabTrainLog train_log;
  CollabParams params = train_bpr(graph, config_.collab, &train_log);
  if (log_ && !train_log.epoch_loss.empty()) {
    *log_ << "[train-collab] loss " << train_log.epoch_loss.front() << " -> "
          << train_log.epoch_loss.back() << " over " << train_log.epoch_loss.size()
          << " epochs\n";
  }
  Eigen::MatrixXd item_emb = final_item_embeddings(graph, params);
  auto store = EmbeddingStore::open(out("cache"), Space::colla);
  for (int i = 0; i < graph.item_count(); ++i) {
    if (!store.contains(graph.item_ids[static_cast<std::size_t>(i)])) {
      store.put(graph.item_ids[static_cast<std::size_t>(i)], to_float(item_emb.row(i)));
    }
  }
}

void Pipeline::run_train_ssl() {
  auto text_store = EmbeddingStore::open(out("cache"), Space::text);
  auto colla_store = EmbeddingStore::open(out("cache"), Space::colla);

  std::vector<std::string> ids;
  std::vector<EmbeddingPair> pairs;
  for (const auto& id : text_store.ids()) {
    if (!colla_store.contains(id)) continue;
    pairs.emplace_back(to_vectorxd(text_store.at(id)), to_vectorxd(colla_store.at(id)));
    ids.push_back(id);
  }

  SslTrainLog train_log;
  ProjectorParams params = train_projector(pairs, config_.ssl, &train_log);
  if (log_ && !train_log.epoch_loss.empty()) {
    *log_ << "[train-ssl] loss " << train_log.epoch_loss.front() << " -> "
          << train_log.epoch_loss.back() << " over " << train_log.epoch_loss.size()
          << " epochs\n";
  }

  auto ssl_store = EmbeddingStore::open(out("cache"), Space::ssl);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (!ssl_store.contains(ids[i])) {
      ssl_store.put(ids[i], to_float(project(params, pairs[i].first)));
    }
  }

  ordered_json pj;
  pj["input_dim"] = params.input_dim();
  pj["hidden_dim"] = params.hidden_dim();
  pj["output_dim"] = params.output_dim();
  pj["W1"] = matrix_to_json(params.W1);
  pj["b1"] = vector_to_json(params.b1);
  pj["W2"] = matrix_to_json(params.W2);
  pj["b2"] = vector_to_json(params.b2);
  std::ofstream pout(out("projector.json"), std::ios::trunc);
  pout << pj.dump() << '\n';
}

void Pipeline::run_mix() {
  auto text_store = EmbeddingStore::open(out("cache"), Space::text);
  auto colla_store = EmbeddingStore::open(out("cache"), Space::colla);
  auto ssl_store = EmbeddingStore::open(out("cache"), Space::ssl);
  auto mixed_store = EmbeddingStore::open(out("cache"), Space::mixed);

  for (const auto& id : text_store.ids()) {
    if (!colla_store.contains(id) || !ssl_store.contains(id)) continue;
    if (mixed_store.contains(id)) continue;
    MixedEmbedding m = mix(text_store.at(id), colla_store.at(id), ssl_store.at(id));
    mixed_store.put(id, m.vector);
  }
}

void Pipeline::run_retrieve() {
  Corpus corpus = load_corpus_dump(out("corpus.jsonl"));
  auto mixed = EmbeddingStore::open(out("cache"), Space::mixed);
  std::vector<std::string> skipped;
  auto histories = build_histories(corpus, &skipped);
  if (log_ && !skipped.empty()) {
    *log_ << "[retrieve] skipped " << skipped.size() << " users with < 2 interactions\n";
  }

  std::ofstream outf(out("retrieval.jsonl"), std::ios::trunc);
  if (!outf) throw DataError("cannot write retrieval records");
  for (const auto& hist : histories) {
    auto relevant = retrieve_relevant(hist, hist.target.item_id, config_.rerank.k, mixed);
    auto recent = retrieve_recent(hist, config_.rerank.k);
    auto reranked = rerank(relevant, recent, config_.rerank);
    ordered_json obj{{"user_id", hist.user_id},
                     {"target_item", hist.target.item_id},
                     {"label", hist.target.label},
                     {"relevant", relevant},
                     {"recent", recent},
                     {"reranked", reranked}};
    outf << obj.dump() << '\n';
  }
}

void Pipeline::run_gen_prompts() {
  Corpus corpus = load_corpus_dump(out("corpus.jsonl"));
  PromptTemplate tmpl = task_template(config_);
  std::vector<std::string> skipped;
  auto histories = build_histories(corpus, &skipped);
  std::map<std::string, UserHistory> by_user;
  for (auto& h : histories) by_user[h.user_id] = h;

  std::ifstream rin(out("retrieval.jsonl"));
  if (!rin) throw DataError("missing retrieval records");

  auto mixed = EmbeddingStore::open(out("cache"), Space::mixed);
  std::ofstream pout(out("prompts.jsonl"), std::ios::trunc);
  std::vector<PromptInstance> it_instances;

  std::string line;
  while (std::getline(rin, line)) {
    if (line.empty()) continue;
    json rec = json::parse(line);
    const std::string user_id = rec.at("user_id").get<std::string>();
    const UserHistory& hist = by_user.at(user_id);
    auto lines = history_lines(corpus, hist);

    std::vector<PromptLine> selected;
    for (const auto& id : rec.at("reranked")) selected.push_back(lines.at(id.get<std::string>()));

    const Item* target_item = corpus.find_item(hist.target.item_id);
    PromptLine target{hist.target.item_id,
                      target_item ? target_item->title : hist.target.item_id, hist.target.label,
                      hist.target.timestamp};

    // Inference prompts list the reranked items chronologically.
    PromptInstance inst =
        render_prompt(chronological(selected), target, "User " + user_id, tmpl);
    inst.user_id = user_id;
    inst.label = hist.target.label;
    ordered_json obj{{"user_id", user_id},
                     {"text", inst.text},
                     {"label", *inst.label},
                     {"provenance", inst.provenance}};
    pout << obj.dump() << '\n';

    // Instruction-tuning data comes from the next-to-last event so the
    // evaluation target stays held out.
    if (hist.events.size() >= 2) {
      UserHistory train_hist;
      train_hist.user_id = hist.user_id;
      train_hist.target = hist.events.back();
      train_hist.events.assign(hist.events.begin(), hist.events.end() - 1);

      auto relevant =
          retrieve_relevant(train_hist, train_hist.target.item_id, config_.rerank.k, mixed);
      auto recent = retrieve_recent(train_hist, config_.rerank.k);
      auto order = rerank(relevant, recent, config_.rerank);

      auto train_lines = history_lines(corpus, train_hist);
      std::vector<PromptLine> train_selected;
      for (const auto& id : order) train_selected.push_back(train_lines.at(id));
      const Item* t_item = corpus.find_item(train_hist.target.item_id);
      PromptLine t_line{train_hist.target.item_id,
                        t_item ? t_item->title : train_hist.target.item_id,
                        train_hist.target.label, train_hist.target.timestamp};

      if (config_.prompt.augment) {
        for (auto& v : augment(train_selected, t_line, "User " + user_id, tmpl)) {
          v.user_id = user_id;
          it_instances.push_back(std::move(v));
        }
      } else {
        PromptInstance v =
            render_prompt(chronological(train_selected), t_line, "User " + user_id, tmpl);
        v.user_id = user_id;
        v.label = t_line.label;
        it_instances.push_back(std::move(v));
      }
    }
  }
  emit_it_dataset(it_instances, out("it_dataset.jsonl"));
}

void Pipeline::run_infer() {
  Backends backends = make_backends(config_);
  Gateway general(backends.general_chat, backends.embed, out("cache"),
                  GatewayConfig{config_.gateway.max_in_flight});
  Gateway reasoning(backends.reasoning_chat, backends.embed, out("cache"),
                    GatewayConfig{config_.gateway.max_in_flight});

  std::ifstream pin(out("prompts.jsonl"));
  if (!pin) throw DataError("missing prompts");
  struct Sample {
    std::string user_id;
    std::string text;
    int label = 0;
  };
  std::vector<Sample> samples;
  std::string line;
  while (std::getline(pin, line)) {
    if (line.empty()) continue;
    json rec = json::parse(line);
    samples.push_back(Sample{rec.at("user_id").get<std::string>(),
                             rec.at("text").get<std::string>(), rec.at("label").get<int>()});
  }

  std::vector<ordered_json> results(samples.size());
  std::vector<std::exception_ptr> failures(samples.size());

  auto process = [&](std::size_t idx) {
    const Sample& s = samples[idx];
    ordered_json rec;
    rec["sample_id"] = s.user_id;
    rec["label"] = s.label;

    PredictionEstimate g_est;
    int g_abstentions = 0;
    if (config_.fusion.general_route == "score") {
      g_est = general_estimate_from_score(backends.score->score(s.text));
    } else {
      EstimateOutcome g = estimate(general, s.text, config_.fusion.k_traces,
                                   config_.fusion.temperature, EstimateSource::general);
      g_est = g.estimate;
      g_abstentions = g.abstentions;
    }
    const bool k_g = knowledge_verdict(g_est);
    rec["general_mean"] = g_est.mean;
    rec["general_var"] = g_est.variance;
    rec["general_abstentions"] = g_abstentions;
    rec["k_g"] = k_g ? "Yes" : "No";

    PromptInstance inst;
    inst.user_id = s.user_id;
    inst.text = s.text;
    AugmentedPrompt aug = inject_knowledge(inst, k_g);

    try {
      EstimateOutcome r = estimate(reasoning, aug.text(), config_.fusion.k_traces,
                                   config_.fusion.temperature, EstimateSource::reasoning);
      rec["reasoning_mean"] = r.estimate.mean;
      rec["reasoning_var"] = r.estimate.variance;
      rec["reasoning_n"] = r.estimate.n_samples;
      rec["abstentions"] = r.abstentions;
      double tokens = 0.0;
      for (int t : r.token_counts) tokens += t;
      rec["response_tokens_mean"] =
          static_cast<int>(std::lround(tokens / static_cast<double>(r.token_counts.size())));
      rec["flagged"] = false;
    } catch (const DataError&) {
      // Every trace abstained; flag and keep going.
      rec["abstentions"] = config_.fusion.k_traces;
      rec["flagged"] = true;
    }
    results[idx] = std::move(rec);
  };

  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const std::size_t n_threads = std::min<std::size_t>(
      {samples.size(), static_cast<std::size_t>(config_.gateway.max_in_flight),
       static_cast<std::size_t>(hw)});
  if (n_threads <= 1) {
    for (std::size_t i = 0; i < samples.size(); ++i) process(i);
  } else {
    std::vector<std::thread> workers;
    for (std::size_t t = 0; t < n_threads; ++t) {
      workers.emplace_back([&, t] {
        for (std::size_t i = t; i < samples.size(); i += n_threads) {
          try {
            process(i);
          } catch (...) {
            failures[i] = std::current_exception();
          }
        }
      });
    }
    for (auto& w : workers) w.join();
    for (auto& f : failures) {
      if (f) std::rethrow_exception(f);
    }
  }

  // Aggregated in sample order regardless of completion order.
  std::ofstream outf(out("estimates.jsonl"), std::ios::trunc);
  for (const auto& rec : results) outf << rec.dump() << '\n';
}

void Pipeline::run_fuse() {
  std::ifstream in(out("estimates.jsonl"));
  if (!in) throw DataError("missing estimates");
  std::ofstream outf(out("predictions.jsonl"), std::ios::trunc);

  std::string line;
  std::size_t flagged = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json rec = json::parse(line);
    if (rec.value("flagged", false)) {
      ++flagged;
      ordered_json obj{{"sample_id", rec.at("sample_id")},
                       {"label", rec.at("label")},
                       {"flagged", true}};
      outf << obj.dump() << '\n';
      continue;
    }
    PredictionEstimate r;
    r.mean = rec.at("reasoning_mean").get<double>();
    r.variance = rec.at("reasoning_var").get<double>();
    r.n_samples = rec.at("reasoning_n").get<int>();
    r.source = EstimateSource::reasoning;
    PredictionEstimate g;
    g.mean = rec.at("general_mean").get<double>();
    g.variance = rec.at("general_var").get<double>();
    g.n_samples = 1;
    g.source = EstimateSource::general;

    const double fused = merge(r, g, config_.fusion);
    ordered_json obj{{"sample_id", rec.at("sample_id")},
                     {"label", rec.at("label")},
                     {"score", fused},
                     {"reasoning_mean", r.mean},
                     {"general_mean", g.mean},
                     {"variance", r.variance},
                     {"response_length", rec.at("response_tokens_mean")},
                     {"abstentions", rec.at("abstentions")},
                     {"flagged", false}};
    outf << obj.dump() << '\n';
  }
  if (log_ && flagged > 0) *log_ << "[fuse] " << flagged << " samples flagged (all abstained)\n";
}

namespace {

std::vector<EvalRecord> load_predictions(const std::filesystem::path& path, std::size_t* flagged) {
  std::ifstream in(path);
  if (!in) throw DataError("missing predictions: " + path.string());
  std::vector<EvalRecord> records;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json rec = json::parse(line);
    if (rec.value("flagged", false)) {
      if (flagged) ++*flagged;
      continue;
    }
    EvalRecord r;
    r.sample_id = rec.at("sample_id").get<std::string>();
    r.score = rec.at("score").get<double>();
    r.label = rec.at("label").get<int>();
    if (rec.contains("response_length")) r.response_length = rec["response_length"].get<int>();
    if (rec.contains("variance")) r.variance = rec["variance"].get<double>();
    records.push_back(std::move(r));
  }
  return records;
}

}  // namespace

void Pipeline::run_eval() {
  std::size_t flagged = 0;
  auto records = load_predictions(out("predictions.jsonl"), &flagged);
  MetricReport report = evaluate(records);

  ordered_json obj;
  obj["auc"] = report.auc;
  obj["logloss"] = report.logloss;
  obj["acc"] = report.acc;
  obj["n"] = report.n;
  obj["flagged"] = flagged;
  std::ofstream outf(out("metrics.json"), std::ios::trunc);
  outf << obj.dump(2) << '\n';
  if (log_) {
    *log_ << "[eval] auc=" << report.auc << " logloss=" << report.logloss
          << " acc=" << report.acc << " n=" << report.n << "\n";
  }
}

namespace {

void write_length_csv(const std::filesystem::path& path, const std::vector<EvalRecord>& records) {
  auto groups = length_quintile_analysis(records);
  std::ofstream outf(path, std::ios::trunc);
  outf << "group,accuracy\n";
  for (std::size_t g = 0; g < groups.size(); ++g) {
    outf << (g + 1) << ',' << groups[g] << '\n';
  }
}

void write_variance_csv(const std::filesystem::path& path, const std::vector<EvalRecord>& records,
                        int window) {
  auto windows = variance_window_analysis(records, window);
  std::ofstream outf(path, std::ios::trunc);
  outf << "window,accuracy,size,partial\n";
  for (const auto& w : windows) {
    outf << w.index << ',' << w.mean_accuracy << ',' << w.size << ',' << (w.partial ? 1 : 0)
         << '\n';
  }
}

}  // namespace

void Pipeline::run_analyze() {
  auto records = load_predictions(out("predictions.jsonl"), nullptr);
  write_length_csv(out("analysis_length.csv"), records);
  const int window = std::min<int>(config_.eval.window, static_cast<int>(records.size()));
  write_variance_csv(out("analysis_variance.csv"), records, window);
}

void Pipeline::run_analysis(const std::string& mode, int window_override) {
  check_dependencies("analyze");
  auto records = load_predictions(out("predictions.jsonl"), nullptr);
  if (mode == "length") {
    write_length_csv(out("analysis_length.csv"), records);
  } else if (mode == "variance") {
    int window = window_override > 0 ? window_override : config_.eval.window;
    window = std::min<int>(window, static_cast<int>(records.size()));
    write_variance_csv(out("analysis_variance.csv"), records, window);
  } else {
    throw UsageError("unknown analysis mode '" + mode + "' (expected length or variance)");
  }
}

}  // namespace ragrec
