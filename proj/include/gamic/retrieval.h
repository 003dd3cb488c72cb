#pragma once

#include <functional>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "gamic/fingerprint.h"
#include "gamic/molgraph.h"

namespace gamic {

struct PoolEntry {
  std::string id;
  std::string smiles;
  std::string payload;  // caption text or label
  FingerprintVector fingerprint;
  std::vector<float> embedding;  // empty when absent; unit length otherwise

  bool has_embedding() const noexcept { return !embedding.empty(); }
  bool operator==(const PoolEntry&) const = default;
};

/// Immutable once built. Ids are unique; embeddings share one width.
class DemonstrationPool {
 public:
  DemonstrationPool() = default;
  DemonstrationPool(std::string strategy, MorganConfig fp) : strategy_(std::move(strategy)), fp_(fp) {}

  /// Throws ConfigError on a duplicate id, fingerprint shape mismatch or
  /// embedding width mismatch.
  void add(PoolEntry entry);

  const std::vector<PoolEntry>& entries() const noexcept { return entries_; }
  const PoolEntry& operator[](std::size_t i) const { return entries_[i]; }
  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }
  std::size_t dim() const noexcept { return dim_; }
  const std::string& strategy() const noexcept { return strategy_; }
  const MorganConfig& fingerprint_config() const noexcept { return fp_; }
  bool operator==(const DemonstrationPool&) const = default;

 private:
  std::string strategy_;
  MorganConfig fp_;
  std::size_t dim_ = 0;
  std::vector<PoolEntry> entries_;
  std::map<std::string, std::size_t> by_id_;
};

struct PoolRecord {
  std::string id;
  std::string smiles;
  std::string payload;
};

using GraphEmbedder = std::function<std::vector<double>(const MolecularGraph&)>;

struct PoolBuildReport {
  std::vector<std::string> skipped;  // "id: reason"
};

/// Parses, fingerprints and (when `embed` is set) embeds each record.
/// Records that fail to parse or embed are skipped and reported.
DemonstrationPool build_pool(const std::vector<PoolRecord>& records, const GraphEmbedder& embed, const MorganConfig& fp,
                             std::string strategy, PoolBuildReport* report = nullptr);

enum class Strategy { Random, Scaffold, Embedding };
Strategy parse_strategy(std::string_view name);
std::string_view strategy_name(Strategy s);

struct RetrievalQuery {
  FingerprintVector fingerprint;
  std::vector<double> embedding;
};

/// Pool indices, most similar first. Scaffold ranks by tanimoto, embedding
/// by Euclidean distance; ties go to the smaller id. Random draws k
/// distinct entries from `seed`. Throws ConfigError when k > pool size,
/// StrategyError when the embedding strategy meets missing embeddings.
std::vector<std::size_t> select_topk(const RetrievalQuery& query, const DemonstrationPool& pool, std::size_t k,
                                     Strategy strategy, std::uint64_t seed = 0);

enum class Aggregation { Min, Sum };

struct MMRConfig {
  std::size_t k = 2;
  double lambda = 0.3;
  Aggregation aggregation = Aggregation::Min;

  void validate() const;
};

/// Greedy selection: the first pick minimizes ||z - z_t||; later picks
/// minimize ||z - z_t|| - lambda * agg_j ||z - z_j|| over the remaining
/// entries, agg being min (default) or sum over the picks so far. Ties go
/// to the smaller id. Returns indices in selection order.
std::vector<std::size_t> select_mmr(const std::vector<double>& query, const DemonstrationPool& pool,
                                    const MMRConfig& cfg);

double euclidean(const std::vector<double>& a, const std::vector<float>& b);

// Index file: "GIDX\x01", u32 strategy length + strategy, u32 count, u32 dim,
// u32 radius, u32 nbits, then per entry u16 id, u32 smiles, u32 payload,
// nbits/64 u64 fingerprint words, u8 has_embedding, dim f32 values.
std::string serialize_pool(const DemonstrationPool& pool);
DemonstrationPool deserialize_pool(std::string_view bytes);
void write_pool(const std::string& path, const DemonstrationPool& pool);
DemonstrationPool read_pool(const std::string& path);

}  // namespace gamic
