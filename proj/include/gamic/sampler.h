#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gamic/fingerprint.h"
#include "gamic/rng.h"

namespace gamic {

struct SamplerConfig {
  std::size_t positives = 2;   // p, including the anchor itself
  double tau_pos = 0.7;
  double tau_neg = 0.3;
  std::size_t negatives = 8;   // K
  /// false: positives are just the anchor and negatives are uniform over
  /// the rest of the pool.
  bool morgan_sampling = true;

  void validate() const;
};

struct PoolItem {
  std::string id;
  FingerprintVector fingerprint;
};

/// Indices into the pool the sample was drawn from.
struct PairSample {
  std::size_t anchor = 0;
  std::vector<std::size_t> positives;  // anchor first
  std::vector<std::size_t> negatives;

  std::vector<std::string> positive_ids(const std::vector<PoolItem>& pool) const;
  std::vector<std::string> negative_ids(const std::vector<PoolItem>& pool) const;
};

/// Tanimoto of the anchor against every pool item.
std::vector<double> similarity_row(std::size_t anchor, const std::vector<PoolItem>& pool);

/// Selects positives and negatives from a precomputed similarity row
/// (similarities[i] = tanimoto(anchor, pool[i])). Positives are the anchor
/// plus up to p-1 others at or above tau_pos, most similar first. Negatives
/// are K distinct draws from the items below tau_neg; when fewer than K
/// qualify the threshold is raised to the K-th smallest similarity.
/// Throws ConfigError when the pool holds fewer than K + p items.
PairSample sample_pairs(std::size_t anchor, const std::vector<double>& similarities, const SamplerConfig& cfg,
                        Rng& rng);
PairSample sample_pairs(std::size_t anchor, const std::vector<PoolItem>& pool, const SamplerConfig& cfg, Rng& rng);

/// Seed for one anchor in one epoch; independent of evaluation order.
inline std::uint64_t epoch_anchor_seed(std::uint64_t seed, std::uint64_t epoch, std::uint64_t anchor) {
  return derive_seed(seed ^ 0x53414D50ULL, epoch, anchor);
}

}  // namespace gamic
