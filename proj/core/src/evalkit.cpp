#include "ragrec/evalkit.hpp"

#include <algorithm>
#include <cmath>

#include "ragrec/error.hpp"

namespace ragrec {

namespace {

bool predicted_positive(double score, double threshold) { return score >= threshold; }

bool correct(const EvalRecord& r, double threshold = 0.5) {
  return predicted_positive(r.score, threshold) == (r.label == 1);
}

}  // namespace

double auc(const std::vector<EvalRecord>& records) {
  std::size_t n_pos = 0, n_neg = 0;
  for (const auto& r : records) (r.label == 1 ? n_pos : n_neg)++;
  if (n_pos == 0 || n_neg == 0) {
    throw DataError("auc needs both classes; got " + std::to_string(n_pos) + " positives and " +
                    std::to_string(n_neg) + " negatives");
  }

  std::vector<std::pair<double, int>> sorted;
  sorted.reserve(records.size());
  for (const auto& r : records) sorted.emplace_back(r.score, r.label);
  std::sort(sorted.begin(), sorted.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });

  // Tie-group average ranks stay in exact halves, so this matches the
  // pairwise count (wins + ties/2) bit for bit.
  double rank_sum_pos = 0.0;
  std::size_t i = 0;
  while (i < sorted.size()) {
    std::size_t j = i;
    while (j < sorted.size() && sorted[j].first == sorted[i].first) ++j;
    const double avg_rank =
        static_cast<double>(i + 1) + static_cast<double>(j - i - 1) / 2.0;  // 1-based
    for (std::size_t k = i; k < j; ++k) {
      if (sorted[k].second == 1) rank_sum_pos += avg_rank;
    }
    i = j;
  }

  const double u = rank_sum_pos - static_cast<double>(n_pos) * (static_cast<double>(n_pos) + 1.0) / 2.0;
  return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

double logloss(const std::vector<EvalRecord>& records) {
  if (records.empty()) throw DataError("logloss needs at least one record");
  constexpr double kClamp = 1e-7;
  double sum = 0.0;
  for (const auto& r : records) {
    const double p = std::clamp(r.score, kClamp, 1.0 - kClamp);
    sum += r.label == 1 ? -std::log(p) : -std::log(1.0 - p);
  }
  return sum / static_cast<double>(records.size());
}

double acc(const std::vector<EvalRecord>& records, double threshold) {
  if (records.empty()) throw DataError("acc needs at least one record");
  std::size_t hits = 0;
  for (const auto& r : records) {
    if (correct(r, threshold)) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(records.size());
}

MetricReport evaluate(const std::vector<EvalRecord>& records) {
  MetricReport report;
  report.auc = auc(records);
  report.logloss = logloss(records);
  report.acc = acc(records);
  report.n = records.size();
  return report;
}

std::vector<double> length_quintile_analysis(const std::vector<EvalRecord>& records) {
  if (records.size() < 5) {
    throw DataError("length analysis needs at least 5 records, got " +
                    std::to_string(records.size()));
  }
  for (const auto& r : records) {
    if (!r.response_length) {
      throw DataError("record '" + r.sample_id + "' has no response_length");
    }
  }

  std::vector<const EvalRecord*> sorted;
  sorted.reserve(records.size());
  for (const auto& r : records) sorted.push_back(&r);
  std::stable_sort(sorted.begin(), sorted.end(), [](const EvalRecord* a, const EvalRecord* b) {
    return *a->response_length < *b->response_length;
  });

  const std::size_t n = sorted.size();
  const std::size_t base = n / 5;
  const std::size_t rem = n % 5;

  std::vector<double> out;
  out.reserve(5);
  std::size_t start = 0;
  for (std::size_t g = 0; g < 5; ++g) {
    const std::size_t size = base + (g < rem ? 1 : 0);
    std::size_t hits = 0;
    for (std::size_t k = start; k < start + size; ++k) {
      if (correct(*sorted[k])) ++hits;
    }
    out.push_back(static_cast<double>(hits) / static_cast<double>(size));
    start += size;
  }
  return out;
}

std::vector<VarianceWindow> variance_window_analysis(const std::vector<EvalRecord>& records,
                                                     int window) {
  if (window <= 0) throw UsageError("window must be positive");
  if (static_cast<std::size_t>(window) > records.size()) {
    throw UsageError("window " + std::to_string(window) + " exceeds record count " +
                     std::to_string(records.size()));
  }
  for (const auto& r : records) {
    if (!r.variance) throw DataError("record '" + r.sample_id + "' has no variance");
  }

  std::vector<const EvalRecord*> sorted;
  sorted.reserve(records.size());
  for (const auto& r : records) sorted.push_back(&r);
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const EvalRecord* a, const EvalRecord* b) { return *a->variance < *b->variance; });

  std::vector<VarianceWindow> out;
  for (std::size_t start = 0; start < sorted.size(); start += static_cast<std::size_t>(window)) {
    const std::size_t end = std::min(sorted.size(), start + static_cast<std::size_t>(window));
    std::size_t hits = 0;
    for (std::size_t k = start; k < end; ++k) {
      if (correct(*sorted[k])) ++hits;
    }
    VarianceWindow w;
    w.index = static_cast<int>(out.size());
    w.size = static_cast<int>(end - start);
    w.mean_accuracy = static_cast<double>(hits) / static_cast<double>(end - start);
    w.partial = w.size < window;
    out.push_back(w);
  }
  return out;
}

}  // namespace ragrec
