#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "gamic/promptllm.h"

namespace gamic {

/// Lowercases, splits on whitespace, and emits each punctuation character as
/// its own token.
std::vector<std::string> tokenize(std::string_view text);

/// Sentence BLEU with uniform weights over n = 1..max_n. A zero clipped
/// count (or an order with no candidate n-grams) contributes precision
/// 1e-9 instead of 0. Empty candidate scores 0.
double bleu(const std::vector<std::string>& candidate, const std::vector<std::string>& reference, int max_n);

enum class RougeVariant { One, Two, L };

/// F-measure. Both empty: 1; one empty: 0.
double rouge(const std::vector<std::string>& candidate, const std::vector<std::string>& reference,
             RougeVariant variant);

std::size_t lcs_length(const std::vector<std::string>& a, const std::vector<std::string>& b);

/// Exact then Porter-stem unigram alignment (no synonym stage).
/// F_mean = 10PR / (R + 9P); penalty = 0.5 (chunks / matches)^3.
double meteor_lite(const std::vector<std::string>& candidate, const std::vector<std::string>& reference);

struct BinaryCounts {
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
  std::size_t unparseable = 0;
  double f1 = 0.0;
};

/// Unparseable predictions count as wrong: FN on positive labels, FP on
/// negative ones. F1 = 2TP / (2TP + FP + FN), 0 when the denominator is 0.
/// Throws DataError on a length mismatch.
BinaryCounts f1_binary(const std::vector<Label>& predictions, const std::vector<bool>& labels);

/// Per-example caption scores keyed by metric name
/// (bleu2, bleu4, rouge1, rouge2, rougeL, meteor).
std::map<std::string, double> caption_scores(std::string_view candidate, std::string_view reference);
std::vector<std::string> caption_metric_names();

struct MetricSummary {
  std::vector<double> repeats;
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation, 0 for a single repeat
};

/// Scores per metric across repeats.
class ScoreReport {
 public:
  void add_repeat(const std::map<std::string, double>& values);
  const std::map<std::string, MetricSummary>& metrics() const noexcept { return metrics_; }
  std::size_t repeats() const noexcept { return repeats_; }
  const MetricSummary& at(const std::string& metric) const;

  /// "metric,mean,std,r1,...,rn" rows in metric-name order.
  std::string to_csv() const;
  std::string to_json() const;

 private:
  std::size_t repeats_ = 0;
  std::map<std::string, MetricSummary> metrics_;
};

double mean_of(const std::vector<double>& v);
double sample_std(const std::vector<double>& v);

}  // namespace gamic
