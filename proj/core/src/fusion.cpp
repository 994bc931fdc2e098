#include "ragrec/fusion.hpp"

#include <algorithm>
#include <cctype>

#include "ragrec/error.hpp"

namespace ragrec {

namespace {

std::string lowercase(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

}  // namespace

Verdict parse_verdict(const std::string& text) {
  std::string body = lowercase(text);
  if (auto pos = body.rfind("</think>"); pos != std::string::npos) {
    body = body.substr(pos + 8);
  }

  Verdict last = Verdict::abstain;
  std::string word;
  auto consider = [&](const std::string& w) {
    if (w == "yes") last = Verdict::yes;
    else if (w == "no") last = Verdict::no;
  };
  for (char c : body) {
    if (std::isalpha(static_cast<unsigned char>(c))) {
      word += c;
    } else if (!word.empty()) {
      consider(word);
      word.clear();
    }
  }
  if (!word.empty()) consider(word);
  return last;
}

EstimateOutcome estimate_from_verdicts(const std::vector<Verdict>& verdicts,
                                       EstimateSource source) {
  if (verdicts.empty()) throw UsageError("need at least one trace");

  int yes = 0, used = 0, abstained = 0;
  for (Verdict v : verdicts) {
    if (v == Verdict::abstain) {
      ++abstained;
    } else {
      ++used;
      if (v == Verdict::yes) ++yes;
    }
  }
  if (used == 0) {
    throw DataError("all " + std::to_string(verdicts.size()) + " traces abstained");
  }

  EstimateOutcome out;
  out.verdicts = verdicts;
  out.abstentions = abstained;
  out.estimate.source = source;
  out.estimate.n_samples = used;
  const double mean = static_cast<double>(yes) / static_cast<double>(used);
  out.estimate.mean = mean;
  // Population variance of a {0,1} sample.
  double var = 0.0;
  for (Verdict v : verdicts) {
    if (v == Verdict::abstain) continue;
    const double x = v == Verdict::yes ? 1.0 : 0.0;
    var += (x - mean) * (x - mean);
  }
  out.estimate.variance = var / static_cast<double>(used);
  return out;
}

EstimateOutcome estimate(Gateway& gateway, const std::string& prompt, int k_traces,
                         double temperature, EstimateSource source) {
  if (k_traces < 1) throw UsageError("k_traces must be >= 1");
  ChatRequest req;
  req.messages = {{"user", prompt}};
  req.temperature = temperature;
  req.n_samples = k_traces;

  ChatResponse resp = gateway.chat(req);
  std::vector<Verdict> verdicts;
  verdicts.reserve(resp.texts.size());
  for (const auto& text : resp.texts) verdicts.push_back(parse_verdict(text));

  EstimateOutcome out = estimate_from_verdicts(verdicts, source);
  out.token_counts = resp.token_counts;
  return out;
}

PredictionEstimate general_estimate_from_score(double p) {
  if (p < 0.0 || p > 1.0) throw DataError("score out of [0,1]: " + std::to_string(p));
  PredictionEstimate est;
  est.mean = p;
  est.variance = p * (1.0 - p);
  est.n_samples = 1;
  est.source = EstimateSource::general;
  return est;
}

std::string knowledge_sentence(bool yes) {
  return std::string("Another one think the answer might be \"") + (yes ? "Yes" : "No") + "\".";
}

AugmentedPrompt inject_knowledge(const PromptInstance& input, bool k_g_yes) {
  static const std::string marker = "Another one think the answer might be";
  if (input.text.find(marker) != std::string::npos) {
    throw DataError("prompt already carries injected knowledge");
  }
  return AugmentedPrompt{input.text, knowledge_sentence(k_g_yes)};
}

bool knowledge_verdict(const PredictionEstimate& general) { return general.mean >= 0.5; }

double merge(const PredictionEstimate& reasoning, const PredictionEstimate& general,
             const FusionConfig& config) {
  if (config.alpha <= 0.0) throw UsageError("alpha must be > 0");
  if (config.epsilon <= 0.0) throw UsageError("epsilon must be > 0");
  if (reasoning.variance < 0.0 || general.variance < 0.0) {
    throw DataError("negative variance in estimate");
  }
  const double w_r = config.alpha / (reasoning.variance + config.epsilon);
  const double w_g = 1.0 / (general.variance + config.epsilon);
  return (w_r * reasoning.mean + w_g * general.mean) / (w_r + w_g);
}

}  // namespace ragrec
