#include "gamic/fingerprint.h"

#include <algorithm>
#include <bit>
#include <set>
#include <tuple>

#include "gamic/binary_io.h"
#include "gamic/errors.h"
#include "gamic/rng.h"

namespace gamic {

namespace {

constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;
constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;
constexpr std::string_view kCacheMagic{"GFPR\x01", 5};

using BondMask = std::vector<std::uint64_t>;

void set_bit(BondMask& m, int bond) { m[static_cast<std::size_t>(bond) / 64] |= std::uint64_t{1} << (bond % 64); }

std::vector<int> mask_to_bonds(const BondMask& m) {
  std::vector<int> out;
  for (std::size_t w = 0; w < m.size(); ++w)
    for (int b = 0; b < 64; ++b)
      if ((m[w] >> b) & 1U) out.push_back(static_cast<int>(w * 64) + b);
  return out;
}

}  // namespace

std::size_t FingerprintVector::popcount() const noexcept {
  std::size_t n = 0;
  for (auto w : words) n += static_cast<std::size_t>(std::popcount(w));
  return n;
}

std::vector<std::size_t> FingerprintVector::on_bits() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < nbits; ++i)
    if (test(i)) out.push_back(i);
  return out;
}

std::uint64_t stable_hash(std::span<const std::uint64_t> words, std::uint64_t seed) {
  std::uint64_t h = kFnvOffset ^ seed;
  for (std::uint64_t w : words) {
    for (int i = 0; i < 8; ++i) {
      h ^= (w >> (8 * i)) & 0xFF;
      h *= kFnvPrime;
    }
  }
  return mix64(h);
}

std::uint64_t atom_invariant(const Atom& atom) {
  const auto& elements = supported_elements();
  const auto it = std::find(elements.begin(), elements.end(), atom.element);
  const std::uint64_t element_code = static_cast<std::uint64_t>(it - elements.begin()) + 1;
  const std::uint64_t words[] = {element_code,
                                 static_cast<std::uint64_t>(atom.degree),
                                 static_cast<std::uint64_t>(atom.total_h()),
                                 static_cast<std::uint64_t>(static_cast<std::int64_t>(atom.formal_charge)),
                                 atom.aromatic ? 1U : 0U,
                                 atom.in_ring ? 1U : 0U};
  return stable_hash(words);
}

std::vector<MorganEnvironment> morgan_environments(const MolecularGraph& graph, std::uint32_t radius) {
  const std::size_t n = graph.num_atoms();
  const std::size_t mask_words = (graph.num_bonds() + 63) / 64;
  const auto nbrs = graph.neighbors();

  std::vector<MorganEnvironment> out;
  std::vector<std::uint64_t> ids(n);
  std::vector<BondMask> env(n, BondMask(mask_words, 0));
  for (std::size_t a = 0; a < n; ++a) {
    ids[a] = atom_invariant(graph.atoms[a]);
    out.push_back({ids[a], static_cast<int>(a), 0, {}});
  }

  std::set<BondMask> seen;
  for (std::uint32_t round = 1; round <= radius; ++round) {
    std::vector<std::uint64_t> next_ids = ids;
    std::vector<BondMask> next_env = env;
    struct Candidate {
      BondMask mask;
      std::uint64_t id;
      int atom;
    };
    std::vector<Candidate> candidates;
    for (std::size_t a = 0; a < n; ++a) {
      if (nbrs[a].empty()) continue;
      std::vector<std::pair<std::uint64_t, std::uint64_t>> pairs;
      for (const auto& [to, bond] : nbrs[a]) {
        pairs.emplace_back(static_cast<std::uint64_t>(bond_order_code(graph.bonds[bond].order)), ids[to]);
        set_bit(next_env[a], bond);
        for (std::size_t w = 0; w < mask_words; ++w) next_env[a][w] |= env[to][w];
      }
      std::sort(pairs.begin(), pairs.end());
      std::vector<std::uint64_t> words{round, ids[a]};
      for (const auto& [code, id] : pairs) {
        words.push_back(code);
        words.push_back(id);
      }
      next_ids[a] = stable_hash(words);
      candidates.push_back({next_env[a], next_ids[a], static_cast<int>(a)});
    }
    std::sort(candidates.begin(), candidates.end(), [](const Candidate& x, const Candidate& y) {
      return std::tie(x.mask, x.id, x.atom) < std::tie(y.mask, y.id, y.atom);
    });
    for (const auto& c : candidates) {
      if (!seen.insert(c.mask).second) continue;
      out.push_back({c.id, c.atom, static_cast<int>(round), mask_to_bonds(c.mask)});
    }
    ids = std::move(next_ids);
    env = std::move(next_env);
  }
  return out;
}

FingerprintVector morgan_fingerprint(const MolecularGraph& graph, std::uint32_t radius, std::uint32_t nbits) {
  if (nbits < 512 || nbits > 4096 || !std::has_single_bit(nbits)) {
    throw ConfigError("nbits must be a power of two in [512, 4096], got " + std::to_string(nbits));
  }
  FingerprintVector fp(radius, nbits);
  for (const auto& e : morgan_environments(graph, radius)) fp.set(e.identifier % nbits);
  return fp;
}

double tanimoto(const FingerprintVector& a, const FingerprintVector& b) {
  if (a.nbits != b.nbits || a.radius != b.radius || a.words.size() != b.words.size()) {
    throw ConfigMismatch("fingerprint configs differ: radius " + std::to_string(a.radius) + "/" + std::to_string(b.radius) +
                         ", nbits " + std::to_string(a.nbits) + "/" + std::to_string(b.nbits));
  }
  std::size_t both = 0, either = 0;
  for (std::size_t i = 0; i < a.words.size(); ++i) {
    both += static_cast<std::size_t>(std::popcount(a.words[i] & b.words[i]));
    either += static_cast<std::size_t>(std::popcount(a.words[i] | b.words[i]));
  }
  return either == 0 ? 1.0 : static_cast<double>(both) / static_cast<double>(either);
}

std::string serialize_fingerprints(std::span<const FingerprintRecord> records) {
  io::ByteWriter w;
  w.bytes(kCacheMagic);
  w.u32(static_cast<std::uint32_t>(records.size()));
  for (const auto& r : records) {
    w.short_string(r.id);
    w.u32(r.fingerprint.radius);
    w.u32(r.fingerprint.nbits);
    for (auto word : r.fingerprint.words) w.u64(word);
  }
  return w.release();
}

std::vector<FingerprintRecord> deserialize_fingerprints(std::string_view bytes) {
  io::ByteReader r(bytes);
  r.expect_magic(kCacheMagic);
  const auto count = r.u32();
  std::vector<FingerprintRecord> out;
  out.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    FingerprintRecord rec;
    rec.id = r.short_string();
    const auto radius = r.u32();
    const auto nbits = r.u32();
    if (nbits == 0 || nbits % 64 != 0) throw FormatError("fingerprint width not a multiple of 64");
    rec.fingerprint = FingerprintVector(radius, nbits);
    for (auto& word : rec.fingerprint.words) word = r.u64();
    out.push_back(std::move(rec));
  }
  if (!r.at_end()) throw FormatError("trailing bytes after fingerprint records");
  return out;
}

void write_fingerprint_cache(const std::string& path, std::span<const FingerprintRecord> records) {
  io::write_file_atomic(path, serialize_fingerprints(records));
}

std::vector<FingerprintRecord> read_fingerprint_cache(const std::string& path) {
  return deserialize_fingerprints(io::read_file(path));
}

}  // namespace gamic
