#include "gamic/metrics.h"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <json.hpp>

#include "gamic/errors.h"
#include "gamic/porter.h"

namespace gamic {

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) out.push_back(std::move(cur));
    cur.clear();
  };
  for (const char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isspace(c)) {
      flush();
    } else if (std::ispunct(c)) {
      flush();
      out.emplace_back(1, ch);
    } else {
      cur.push_back(static_cast<char>(std::tolower(c)));
    }
  }
  flush();
  return out;
}

namespace {

using Counts = std::map<std::vector<std::string>, std::size_t>;

Counts ngrams(const std::vector<std::string>& toks, std::size_t n) {
  Counts c;
  if (toks.size() < n) return c;
  for (std::size_t i = 0; i + n <= toks.size(); ++i) ++c[std::vector<std::string>(toks.begin() + i, toks.begin() + i + n)];
  return c;
}

std::size_t total(const Counts& c) {
  std::size_t t = 0;
  for (const auto& [g, n] : c) t += n;
  return t;
}

std::size_t clipped_overlap(const Counts& cand, const Counts& ref) {
  std::size_t o = 0;
  for (const auto& [g, n] : cand) {
    auto it = ref.find(g);
    if (it != ref.end()) o += std::min(n, it->second);
  }
  return o;
}

double f_measure(double overlap, double cand_total, double ref_total) {
  if (overlap == 0.0) return 0.0;
  const double p = overlap / cand_total, r = overlap / ref_total;
  return 2.0 * p * r / (p + r);
}

constexpr double kBleuEpsilon = 1e-9;

}  // namespace

double bleu(const std::vector<std::string>& candidate, const std::vector<std::string>& reference, int max_n) {
  if (max_n < 1) throw ConfigError("BLEU order must be >= 1");
  if (candidate.empty()) return 0.0;
  double log_sum = 0.0;
  for (int n = 1; n <= max_n; ++n) {
    const auto cand = ngrams(candidate, static_cast<std::size_t>(n));
    const auto ref = ngrams(reference, static_cast<std::size_t>(n));
    const std::size_t t = total(cand);
    const std::size_t m = clipped_overlap(cand, ref);
    const double p = m == 0 ? kBleuEpsilon / static_cast<double>(std::max<std::size_t>(t, 1))
                            : static_cast<double>(m) / static_cast<double>(t);
    log_sum += std::log(p);
  }
  const double c = static_cast<double>(candidate.size()), r = static_cast<double>(reference.size());
  const double bp = c < r ? std::exp(1.0 - r / c) : 1.0;
  return bp * std::exp(log_sum / max_n);
}

std::size_t lcs_length(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

double rouge(const std::vector<std::string>& candidate, const std::vector<std::string>& reference,
             RougeVariant variant) {
  if (candidate.empty() && reference.empty()) return 1.0;
  if (candidate.empty() || reference.empty()) return 0.0;
  if (variant == RougeVariant::L) {
    return f_measure(static_cast<double>(lcs_length(candidate, reference)), static_cast<double>(candidate.size()),
                     static_cast<double>(reference.size()));
  }
  const std::size_t n = variant == RougeVariant::One ? 1 : 2;
  const auto cand = ngrams(candidate, n), ref = ngrams(reference, n);
  if (cand.empty() && ref.empty()) return candidate == reference ? 1.0 : 0.0;
  if (cand.empty() || ref.empty()) return 0.0;
  return f_measure(static_cast<double>(clipped_overlap(cand, ref)), static_cast<double>(total(cand)),
                   static_cast<double>(total(ref)));
}

double meteor_lite(const std::vector<std::string>& candidate, const std::vector<std::string>& reference) {
  if (candidate.empty() || reference.empty()) return 0.0;
  std::vector<int> align(candidate.size(), -1);
  std::vector<char> used(reference.size(), 0);
  auto stage = [&](auto&& key) {
    std::vector<std::string> rk(reference.size());
    for (std::size_t j = 0; j < reference.size(); ++j) rk[j] = key(reference[j]);
    for (std::size_t i = 0; i < candidate.size(); ++i) {
      if (align[i] >= 0) continue;
      const std::string ck = key(candidate[i]);
      for (std::size_t j = 0; j < reference.size(); ++j) {
        if (!used[j] && rk[j] == ck) {
          align[i] = static_cast<int>(j);
          used[j] = 1;
          break;
        }
      }
    }
  };
  stage([](const std::string& w) { return w; });
  stage([](const std::string& w) { return porter_stem(w); });

  std::size_t matches = 0, chunks = 0;
  int prev = -2;
  bool prev_matched = false;
  for (std::size_t i = 0; i < candidate.size(); ++i) {
    if (align[i] < 0) {
      prev_matched = false;
      continue;
    }
    ++matches;
    if (!prev_matched || align[i] != prev + 1) ++chunks;
    prev = align[i];
    prev_matched = true;
  }
  if (matches == 0) return 0.0;
  const double m = static_cast<double>(matches);
  const double p = m / static_cast<double>(candidate.size());
  const double r = m / static_cast<double>(reference.size());
  const double fmean = 10.0 * p * r / (r + 9.0 * p);
  const double penalty = 0.5 * std::pow(static_cast<double>(chunks) / m, 3.0);
  return fmean * (1.0 - penalty);
}

BinaryCounts f1_binary(const std::vector<Label>& predictions, const std::vector<bool>& labels) {
  if (predictions.size() != labels.size()) {
    throw DataError("F1: " + std::to_string(predictions.size()) + " predictions for " + std::to_string(labels.size()) +
                    " labels");
  }
  BinaryCounts c;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const Label p = predictions[i];
    if (p == Label::Unparseable) ++c.unparseable;
    if (labels[i]) {
      if (p == Label::Positive) ++c.tp;
      else ++c.fn;
    } else {
      if (p == Label::Negative) ++c.tn;
      else ++c.fp;
    }
  }
  const std::size_t denom = 2 * c.tp + c.fp + c.fn;
  c.f1 = denom == 0 ? 0.0 : 2.0 * static_cast<double>(c.tp) / static_cast<double>(denom);
  return c;
}

std::vector<std::string> caption_metric_names() { return {"bleu2", "bleu4", "rouge1", "rouge2", "rougeL", "meteor"}; }

std::map<std::string, double> caption_scores(std::string_view candidate, std::string_view reference) {
  const auto c = tokenize(candidate), r = tokenize(reference);
  return {{"bleu2", bleu(c, r, 2)},
          {"bleu4", bleu(c, r, 4)},
          {"rouge1", rouge(c, r, RougeVariant::One)},
          {"rouge2", rouge(c, r, RougeVariant::Two)},
          {"rougeL", rouge(c, r, RougeVariant::L)},
          {"meteor", meteor_lite(c, r)}};
}

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double sample_std(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

void ScoreReport::add_repeat(const std::map<std::string, double>& values) {
  if (repeats_ > 0 && values.size() != metrics_.size()) throw DataError("repeat reports a different metric set");
  for (const auto& [name, v] : values) {
    if (repeats_ > 0 && !metrics_.count(name)) throw DataError("repeat reports unknown metric '" + name + "'");
    auto& m = metrics_[name];
    m.repeats.push_back(v);
    m.mean = mean_of(m.repeats);
    m.std = sample_std(m.repeats);
  }
  ++repeats_;
}

const MetricSummary& ScoreReport::at(const std::string& metric) const {
  auto it = metrics_.find(metric);
  if (it == metrics_.end()) throw DataError("no metric '" + metric + "' in report");
  return it->second;
}

namespace {
std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}
}  // namespace

std::string ScoreReport::to_csv() const {
  std::string out = "metric,mean,std";
  for (std::size_t r = 1; r <= repeats_; ++r) out += ",repeat_" + std::to_string(r);
  out += "\n";
  for (const auto& [name, m] : metrics_) {
    out += name + "," + fmt(m.mean) + "," + fmt(m.std);
    for (double v : m.repeats) out += "," + fmt(v);
    out += "\n";
  }
  return out;
}

std::string ScoreReport::to_json() const {
  nlohmann::ordered_json j;
  j["repeats"] = repeats_;
  j["metrics"] = nlohmann::ordered_json::object();
  for (const auto& [name, m] : metrics_) {
    j["metrics"][name] = {{"mean", m.mean}, {"std", m.std}, {"values", m.repeats}};
  }
  return j.dump(2) + "\n";
}

}  // namespace gamic
