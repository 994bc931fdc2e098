#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ragrec/gateway.hpp"
#include "ragrec/promptgen.hpp"

namespace ragrec {

enum class Verdict { yes, no, abstain };

// Strips any think-section, then takes the final standalone yes/no word,
// case-insensitively. No match means abstain.
Verdict parse_verdict(const std::string& text);

enum class EstimateSource { reasoning, general };

struct PredictionEstimate {
  double mean = 0.0;      // fraction of Yes among non-abstaining verdicts
  double variance = 0.0;  // population variance of the verdict indicator
  int n_samples = 0;      // non-abstaining trace count
  EstimateSource source = EstimateSource::reasoning;
};

struct EstimateOutcome {
  PredictionEstimate estimate;
  int abstentions = 0;
  std::vector<Verdict> verdicts;
  std::vector<int> token_counts;
};

// Mean/variance over the non-abstaining verdicts. All-abstain is an error;
// the caller flags the sample instead of scoring it.
EstimateOutcome estimate_from_verdicts(const std::vector<Verdict>& verdicts,
                                       EstimateSource source);

// Samples k traces through the gateway and aggregates the parsed verdicts.
EstimateOutcome estimate(Gateway& gateway, const std::string& prompt, int k_traces,
                         double temperature, EstimateSource source);

// Scalar-score route for the general model: Bernoulli variance p(1-p).
PredictionEstimate general_estimate_from_score(double p);

struct FusionConfig {
  double alpha = 0.1;
  double epsilon = 1e-3;
  int k_traces = 5;
  double temperature = 0.6;
};

// The injected-knowledge sentence, verbatim.
std::string knowledge_sentence(bool yes);

struct AugmentedPrompt {
  std::string base;       // instruction + input, already rendered
  std::string knowledge;  // the injected sentence
  std::string text() const { return base + "\n" + knowledge; }
};

// Appends the general model's verdict sentence after the input. Double
// injection is rejected.
AugmentedPrompt inject_knowledge(const PromptInstance& input, bool k_g_yes);

// Renders the general-model verdict for injection: mean >= 0.5 reads Yes.
bool knowledge_verdict(const PredictionEstimate& general);

// Consistency-calibrated fusion of the two estimates:
//   P = [a*PR/(vR+e) + PG/(vG+e)] / [a/(vR+e) + 1/(vG+e)].
// Always lies between the two means.
double merge(const PredictionEstimate& reasoning, const PredictionEstimate& general,
             const FusionConfig& config);

}  // namespace ragrec
