#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "gamic/molgraph.h"

namespace gamic {

/// Fixed-width bit vector from the circular (Morgan/ECFP) algorithm. The
/// radius and width travel with the bits so that vectors built under
/// different settings are never compared.
struct FingerprintVector {
  std::uint32_t radius = 2;
  std::uint32_t nbits = 2048;
  std::vector<std::uint64_t> words;

  FingerprintVector() = default;
  FingerprintVector(std::uint32_t r, std::uint32_t n) : radius(r), nbits(n), words(n / 64, 0) {}

  void set(std::size_t bit) { words[bit / 64] |= std::uint64_t{1} << (bit % 64); }
  bool test(std::size_t bit) const { return (words[bit / 64] >> (bit % 64)) & 1U; }
  std::size_t popcount() const noexcept;
  std::vector<std::size_t> on_bits() const;

  bool operator==(const FingerprintVector&) const = default;
};

struct MorganConfig {
  std::uint32_t radius = 2;
  std::uint32_t nbits = 2048;

  bool operator==(const MorganConfig&) const = default;
};

/// Seed of the identifier hash. Changing it changes every fingerprint.
inline constexpr std::uint64_t kFingerprintHashSeed = 0x47414D4943ULL;

/// Stable 64-bit hash of a word sequence: FNV-1a over the little-endian bytes
/// of each word (offset basis xor `seed`), followed by the splitmix64
/// finalizer. Identical on every platform.
std::uint64_t stable_hash(std::span<const std::uint64_t> words, std::uint64_t seed = kFingerprintHashSeed);

/// Round-0 identifier: hash of (element, degree, hydrogen count, formal
/// charge, aromatic flag, ring membership).
std::uint64_t atom_invariant(const Atom& atom);

/// One environment that survived duplicate removal.
struct MorganEnvironment {
  std::uint64_t identifier = 0;
  int atom = 0;
  int radius = 0;
  std::vector<int> bonds;  // sorted bond indices covered by the environment
};

/// All environments up to `radius`, in round order. Within a round,
/// environments covering a bond set already seen (this round or earlier) are
/// dropped; for ties inside a round the lowest identifier wins. Atoms with no
/// neighbours contribute only their round-0 identifier.
std::vector<MorganEnvironment> morgan_environments(const MolecularGraph& graph, std::uint32_t radius);

/// Throws ConfigError unless nbits is a power of two in [512, 4096].
FingerprintVector morgan_fingerprint(const MolecularGraph& graph, std::uint32_t radius = 2, std::uint32_t nbits = 2048);
inline FingerprintVector morgan_fingerprint(const MolecularGraph& graph, const MorganConfig& cfg) {
  return morgan_fingerprint(graph, cfg.radius, cfg.nbits);
}

/// |a AND b| / |a OR b|, 1.0 when both are empty. Throws ConfigMismatch when
/// radius or width differ.
double tanimoto(const FingerprintVector& a, const FingerprintVector& b);

struct FingerprintRecord {
  std::string id;
  FingerprintVector fingerprint;

  bool operator==(const FingerprintRecord&) const = default;
};

// Cache container: "GFPR\x01", u32 count, then per record u16 id length,
// id bytes, u32 radius, u32 nbits, nbits/64 u64 words (all little-endian).
std::string serialize_fingerprints(std::span<const FingerprintRecord> records);
std::vector<FingerprintRecord> deserialize_fingerprints(std::string_view bytes);
void write_fingerprint_cache(const std::string& path, std::span<const FingerprintRecord> records);
std::vector<FingerprintRecord> read_fingerprint_cache(const std::string& path);

}  // namespace gamic
