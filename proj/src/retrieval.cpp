#include "gamic/retrieval.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "gamic/binary_io.h"
#include "gamic/errors.h"
#include "gamic/rng.h"

namespace gamic {

void DemonstrationPool::add(PoolEntry entry) {
  if (by_id_.count(entry.id)) throw ConfigError("duplicate pool id '" + entry.id + "'");
  if (entry.fingerprint.radius != fp_.radius || entry.fingerprint.nbits != fp_.nbits) {
    throw ConfigError("fingerprint of '" + entry.id + "' does not match the pool configuration");
  }
  if (entry.has_embedding()) {
    if (dim_ == 0) dim_ = entry.embedding.size();
    if (entry.embedding.size() != dim_) {
      throw ConfigError("embedding of '" + entry.id + "' has width " + std::to_string(entry.embedding.size()) +
                        ", pool width is " + std::to_string(dim_));
    }
  }
  by_id_.emplace(entry.id, entries_.size());
  entries_.push_back(std::move(entry));
}

DemonstrationPool build_pool(const std::vector<PoolRecord>& records, const GraphEmbedder& embed, const MorganConfig& fp,
                             std::string strategy, PoolBuildReport* report) {
  DemonstrationPool pool(std::move(strategy), fp);
  for (const auto& rec : records) {
    PoolEntry e{rec.id, rec.smiles, rec.payload, {}, {}};
    try {
      const MolecularGraph g = parse_smiles(rec.smiles);
      e.fingerprint = morgan_fingerprint(g, fp);
      if (embed) {
        const auto z = embed(g);
        e.embedding.assign(z.begin(), z.end());
      }
    } catch (const Error& err) {
      if (report) report->skipped.push_back(rec.id + ": " + err.what());
      continue;
    }
    pool.add(std::move(e));
  }
  return pool;
}

Strategy parse_strategy(std::string_view name) {
  if (name == "random") return Strategy::Random;
  if (name == "scaffold") return Strategy::Scaffold;
  if (name == "embedding") return Strategy::Embedding;
  throw ConfigError("unknown retrieval strategy '" + std::string(name) + "'");
}

std::string_view strategy_name(Strategy s) {
  switch (s) {
    case Strategy::Random: return "random";
    case Strategy::Scaffold: return "scaffold";
    case Strategy::Embedding: return "embedding";
  }
  return "?";
}

double euclidean(const std::vector<double>& a, const std::vector<float>& b) {
  if (a.size() != b.size()) throw ConfigError("embedding widths differ");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - static_cast<double>(b[i]);
    s += d * d;
  }
  return std::sqrt(s);
}

namespace {

void require_embeddings(const DemonstrationPool& pool, const std::vector<double>& query) {
  for (const auto& e : pool.entries()) {
    if (!e.has_embedding()) throw StrategyError("pool entry '" + e.id + "' has no embedding");
  }
  if (query.empty()) throw StrategyError("query has no embedding");
  if (!pool.empty() && query.size() != pool.dim()) {
    throw StrategyError("query embedding width " + std::to_string(query.size()) + " differs from pool width " +
                        std::to_string(pool.dim()));
  }
}

std::vector<double> to_double(const std::vector<float>& v) { return {v.begin(), v.end()}; }

}  // namespace

std::vector<std::size_t> select_topk(const RetrievalQuery& query, const DemonstrationPool& pool, std::size_t k,
                                     Strategy strategy, std::uint64_t seed) {
  if (k > pool.size()) {
    throw ConfigError("k = " + std::to_string(k) + " exceeds pool size " + std::to_string(pool.size()));
  }
  std::vector<std::size_t> idx(pool.size());
  std::iota(idx.begin(), idx.end(), 0);
  if (strategy == Strategy::Random) {
    Rng rng(seed);
    for (std::size_t i = 0; i < k; ++i) std::swap(idx[i], idx[i + rng.uniform_index(idx.size() - i)]);
    idx.resize(k);
    return idx;
  }
  std::vector<double> key(pool.size());
  if (strategy == Strategy::Scaffold) {
    for (std::size_t i = 0; i < pool.size(); ++i) key[i] = -tanimoto(query.fingerprint, pool[i].fingerprint);
  } else {
    require_embeddings(pool, query.embedding);
    for (std::size_t i = 0; i < pool.size(); ++i) key[i] = euclidean(query.embedding, pool[i].embedding);
  }
  auto before = [&](std::size_t a, std::size_t b) {
    if (key[a] != key[b]) return key[a] < key[b];
    return pool[a].id < pool[b].id;
  };
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(), before);
  idx.resize(k);
  return idx;
}

void MMRConfig::validate() const {
  if (k < 1) throw ConfigError("MMR k must be >= 1");
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw ConfigError("MMR lambda must lie in [0, 1]");
}

std::vector<std::size_t> select_mmr(const std::vector<double>& query, const DemonstrationPool& pool,
                                    const MMRConfig& cfg) {
  cfg.validate();
  if (cfg.k > pool.size()) {
    throw ConfigError("k = " + std::to_string(cfg.k) + " exceeds pool size " + std::to_string(pool.size()));
  }
  require_embeddings(pool, query);
  const std::size_t n = pool.size();
  std::vector<double> relevance(n);
  for (std::size_t i = 0; i < n; ++i) relevance[i] = euclidean(query, pool[i].embedding);
  // Running min (or sum) of distances to the picks so far.
  std::vector<double> diversity(n, cfg.aggregation == Aggregation::Min ? std::numeric_limits<double>::infinity() : 0.0);
  std::vector<char> chosen(n, 0);
  std::vector<std::size_t> out;
  while (out.size() < cfg.k) {
    std::size_t best = n;
    double best_score = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (chosen[i]) continue;
      const double score = out.empty() ? relevance[i] : relevance[i] - cfg.lambda * diversity[i];
      if (best == n || score < best_score || (score == best_score && pool[i].id < pool[best].id)) {
        best = i;
        best_score = score;
      }
    }
    chosen[best] = 1;
    out.push_back(best);
    const auto picked = to_double(pool[best].embedding);
    for (std::size_t i = 0; i < n; ++i) {
      if (chosen[i]) continue;
      const double d = euclidean(picked, pool[i].embedding);
      diversity[i] = cfg.aggregation == Aggregation::Min ? std::min(diversity[i], d) : diversity[i] + d;
    }
  }
  return out;
}

namespace {
constexpr std::string_view kMagic{"GIDX\x01", 5};
}

std::string serialize_pool(const DemonstrationPool& pool) {
  io::ByteWriter w;
  w.bytes(kMagic);
  w.long_string(pool.strategy());
  w.u32(static_cast<std::uint32_t>(pool.size()));
  w.u32(static_cast<std::uint32_t>(pool.dim()));
  w.u32(pool.fingerprint_config().radius);
  w.u32(pool.fingerprint_config().nbits);
  for (const auto& e : pool.entries()) {
    w.short_string(e.id);
    w.long_string(e.smiles);
    w.long_string(e.payload);
    for (auto word : e.fingerprint.words) w.u64(word);
    w.u8(e.has_embedding() ? 1 : 0);
    for (float x : e.embedding) w.f32(x);
  }
  return w.release();
}

DemonstrationPool deserialize_pool(std::string_view bytes) {
  io::ByteReader r(bytes);
  r.expect_magic(kMagic);
  std::string strategy = r.long_string();
  const std::uint32_t count = r.u32();
  const std::uint32_t dim = r.u32();
  MorganConfig fp;
  fp.radius = r.u32();
  fp.nbits = r.u32();
  if (fp.nbits == 0 || fp.nbits % 64 != 0) throw FormatError("index fingerprint width is not a multiple of 64");
  DemonstrationPool pool(std::move(strategy), fp);
  for (std::uint32_t i = 0; i < count; ++i) {
    PoolEntry e;
    e.id = r.short_string();
    e.smiles = r.long_string();
    e.payload = r.long_string();
    e.fingerprint = FingerprintVector(fp.radius, fp.nbits);
    for (auto& word : e.fingerprint.words) word = r.u64();
    const auto has = r.u8();
    if (has > 1) throw FormatError("bad embedding flag in index entry '" + e.id + "'");
    if (has) {
      e.embedding.resize(dim);
      for (auto& x : e.embedding) x = r.f32();
    }
    try {
      pool.add(std::move(e));
    } catch (const ConfigError& err) {
      throw FormatError(std::string("index file: ") + err.what());
    }
  }
  if (!r.at_end()) throw FormatError("trailing bytes after index entries");
  return pool;
}

void write_pool(const std::string& path, const DemonstrationPool& pool) {
  io::write_file_atomic(path, serialize_pool(pool));
}

DemonstrationPool read_pool(const std::string& path) { return deserialize_pool(io::read_file(path)); }

}  // namespace gamic
