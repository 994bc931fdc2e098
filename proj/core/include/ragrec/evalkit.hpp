#pragma once

#include <optional>
#include <string>
#include <vector>

namespace ragrec {

struct EvalRecord {
  std::string sample_id;
  double score = 0.0;  // in [0,1]
  int label = 0;       // {0,1}
  std::optional<int> response_length;
  std::optional<double> variance;
};

struct MetricReport {
  double auc = 0.0;
  double logloss = 0.0;
  double acc = 0.0;
  std::size_t n = 0;
};

// ROC-AUC via tie-aware rank statistics; equals the pairwise
// probability that a random positive outscores a random negative with ties
// counted 1/2. Needs at least one record of each class.
double auc(const std::vector<EvalRecord>& records);

// Mean cross-entropy with scores clamped to [1e-7, 1-1e-7].
double logloss(const std::vector<EvalRecord>& records);

// Fraction of records where (score >= threshold) matches the label; a
// score exactly at the threshold predicts positive.
double acc(const std::vector<EvalRecord>& records, double threshold = 0.5);

MetricReport evaluate(const std::vector<EvalRecord>& records);

// Stable ascending sort by response length, split into 5 near-equal groups
// (remainder to the earliest groups); returns mean accuracy per group.
std::vector<double> length_quintile_analysis(const std::vector<EvalRecord>& records);

struct VarianceWindow {
  int index = 0;
  double mean_accuracy = 0.0;
  int size = 0;
  bool partial = false;
};

// Stable ascending sort by variance, cut into consecutive non-overlapping
// windows; the final partial window is kept and flagged.
std::vector<VarianceWindow> variance_window_analysis(const std::vector<EvalRecord>& records,
                                                     int window);

}  // namespace ragrec
