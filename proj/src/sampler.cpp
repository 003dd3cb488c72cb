#include "gamic/sampler.h"

#include <algorithm>
#include <numeric>

#include "gamic/errors.h"

namespace gamic {

void SamplerConfig::validate() const {
  if (positives < 1) throw ConfigError("sampler needs at least one positive (the anchor)");
  if (negatives < 1) throw ConfigError("sampler needs at least one negative");
  if (tau_neg < 0.0) throw ConfigError("tau_neg must be >= 0");
}

std::vector<std::string> PairSample::positive_ids(const std::vector<PoolItem>& pool) const {
  std::vector<std::string> out;
  for (auto i : positives) out.push_back(pool.at(i).id);
  return out;
}

std::vector<std::string> PairSample::negative_ids(const std::vector<PoolItem>& pool) const {
  std::vector<std::string> out;
  for (auto i : negatives) out.push_back(pool.at(i).id);
  return out;
}

std::vector<double> similarity_row(std::size_t anchor, const std::vector<PoolItem>& pool) {
  std::vector<double> row(pool.size());
  for (std::size_t i = 0; i < pool.size(); ++i) row[i] = tanimoto(pool.at(anchor).fingerprint, pool[i].fingerprint);
  return row;
}

namespace {

// K distinct items from `candidates` by partial Fisher-Yates, kept in draw order.
std::vector<std::size_t> draw(std::vector<std::size_t> candidates, std::size_t k, Rng& rng) {
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + rng.uniform_index(candidates.size() - i);
    std::swap(candidates[i], candidates[j]);
  }
  candidates.resize(k);
  return candidates;
}

}  // namespace

PairSample sample_pairs(std::size_t anchor, const std::vector<double>& sim, const SamplerConfig& cfg, Rng& rng) {
  cfg.validate();
  const std::size_t n = sim.size();
  if (anchor >= n) throw ConfigError("anchor index out of range");
  const std::size_t p = cfg.morgan_sampling ? cfg.positives : 1;
  if (n < cfg.negatives + p) {
    throw ConfigError("pool of " + std::to_string(n) + " items is smaller than K + p = " +
                      std::to_string(cfg.negatives + p));
  }
  PairSample s;
  s.anchor = anchor;
  s.positives.push_back(anchor);

  std::vector<char> taken(n, 0);
  taken[anchor] = 1;
  if (cfg.morgan_sampling && cfg.positives > 1) {
    std::vector<std::size_t> close;
    for (std::size_t i = 0; i < n; ++i) {
      if (i != anchor && sim[i] >= cfg.tau_pos) close.push_back(i);
    }
    std::stable_sort(close.begin(), close.end(), [&](std::size_t a, std::size_t b) { return sim[a] > sim[b]; });
    close.resize(std::min(close.size(), cfg.positives - 1));
    for (auto i : close) {
      s.positives.push_back(i);
      taken[i] = 1;
    }
  }

  std::vector<std::size_t> rest;
  for (std::size_t i = 0; i < n; ++i) {
    if (!taken[i]) rest.push_back(i);
  }
  if (!cfg.morgan_sampling) {
    s.negatives = draw(std::move(rest), cfg.negatives, rng);
    return s;
  }
  std::vector<std::size_t> eligible;
  for (auto i : rest) {
    if (sim[i] < cfg.tau_neg) eligible.push_back(i);
  }
  if (eligible.size() < cfg.negatives) {
    std::vector<double> sorted;
    for (auto i : rest) sorted.push_back(sim[i]);
    std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(cfg.negatives - 1), sorted.end());
    const double relaxed = sorted[cfg.negatives - 1];
    eligible.clear();
    for (auto i : rest) {
      if (sim[i] <= relaxed) eligible.push_back(i);
    }
  }
  s.negatives = draw(std::move(eligible), cfg.negatives, rng);
  return s;
}

PairSample sample_pairs(std::size_t anchor, const std::vector<PoolItem>& pool, const SamplerConfig& cfg, Rng& rng) {
  return sample_pairs(anchor, similarity_row(anchor, pool), cfg, rng);
}

}  // namespace gamic
