#include <doctest.h>

#include <set>

#include "fingerprint_oracle.h"
#include "gamic/errors.h"
#include "gamic/fingerprint.h"
#include "test_support.h"

using namespace gamic;

namespace {

std::set<std::size_t> bit_set(const FingerprintVector& fp) {
  const auto bits = fp.on_bits();
  return {bits.begin(), bits.end()};
}

FingerprintVector from_bits(std::initializer_list<std::size_t> bits, std::uint32_t nbits = 512) {
  FingerprintVector fp(2, nbits);
  for (auto b : bits) fp.set(b);
  return fp;
}

}  // namespace

TEST_CASE("stable hash matches frozen reference values") {
  // Computed with an independent Python transcription of the documented hash.
  const std::uint64_t w123[] = {1, 2, 3};
  CHECK(stable_hash(w123) == 0x872c831f6e401086ULL);
  CHECK(stable_hash({}) == 0x8b9b034afb88d7deULL);
  const std::uint64_t ones[] = {0xFFFFFFFFFFFFFFFFULL};
  CHECK(stable_hash(ones, 0) == 0x9eecb3fe70d312a5ULL);
}

TEST_CASE("single atom sets exactly one bit") {
  const auto g = parse_smiles("C");
  for (std::uint32_t r : {0U, 1U, 2U, 3U}) {
    const auto fp = morgan_fingerprint(g, r, 2048);
    CHECK(fp.popcount() == 1);
    CHECK(morgan_environments(g, r).size() == 1);
  }
}

TEST_CASE("fingerprints are deterministic") {
  for (const auto& s : testing::sample_smiles()) {
    CHECK(morgan_fingerprint(parse_smiles(s)) == morgan_fingerprint(parse_smiles(s)));
  }
}

TEST_CASE("benzene: one identifier per round") {
  const auto g = parse_smiles("c1ccccc1");
  const auto envs = morgan_environments(g, 2);
  std::set<std::uint64_t> distinct;
  for (const auto& e : envs) distinct.insert(e.identifier);
  CHECK(distinct.size() <= 3);
  CHECK(distinct.size() == 3);
  CHECK(testing::oracle_identifiers(g, 2) == distinct);
}

TEST_CASE("on-bits match the brute-force oracle") {
  Rng rng(2024);
  std::vector<std::string> corpus = testing::sample_smiles();
  for (int i = 0; i < 100; ++i) corpus.push_back(testing::random_smiles(rng));
  for (const auto& s : corpus) {
    CAPTURE(s);
    const auto g = parse_smiles(s);
    for (std::uint32_t radius : {0U, 1U, 2U, 3U}) {
      const auto fp = morgan_fingerprint(g, radius, 1024);
      CHECK(bit_set(fp) == testing::oracle_on_bits(g, static_cast<int>(radius), 1024));
    }
  }
}

TEST_CASE("larger radius only adds bits") {
  Rng rng(99);
  for (int i = 0; i < 50; ++i) {
    const auto g = parse_smiles(testing::random_smiles(rng));
    for (std::uint32_t r = 1; r <= 3; ++r) {
      const auto bigger = bit_set(morgan_fingerprint(g, r, 2048));
      for (const auto& e : morgan_environments(g, r - 1)) CHECK(bigger.count(e.identifier % 2048) == 1);
    }
  }
}

TEST_CASE("environment bond sets grow with radius") {
  const auto g = parse_smiles("CCCCC");
  const auto envs = morgan_environments(g, 2);
  for (const auto& e : envs) {
    if (e.radius == 1) CHECK(e.bonds.size() == static_cast<std::size_t>(g.atoms[e.atom].degree));
  }
}

TEST_CASE("nbits validation") {
  const auto g = parse_smiles("CCO");
  CHECK_THROWS_AS(morgan_fingerprint(g, 2, 1000), ConfigError);
  CHECK_THROWS_AS(morgan_fingerprint(g, 2, 256), ConfigError);
  CHECK_THROWS_AS(morgan_fingerprint(g, 2, 8192), ConfigError);
  CHECK_NOTHROW(morgan_fingerprint(g, 2, 512));
  CHECK_NOTHROW(morgan_fingerprint(g, 2, 4096));
}

TEST_CASE("tanimoto arithmetic") {
  const auto a = from_bits({1, 2, 3});
  CHECK(tanimoto(a, a) == 1.0);
  CHECK(tanimoto(from_bits({1, 2}), from_bits({3, 4})) == 0.0);
  CHECK(tanimoto(from_bits({1, 2, 3}), from_bits({2, 3, 4})) == 0.5);
  CHECK(tanimoto(from_bits({}), from_bits({})) == 1.0);
  CHECK(tanimoto(from_bits({}), from_bits({5})) == 0.0);
}

TEST_CASE("tanimoto rejects mismatched configs") {
  CHECK_THROWS_AS(tanimoto(FingerprintVector(2, 512), FingerprintVector(2, 1024)), ConfigMismatch);
  CHECK_THROWS_AS(tanimoto(FingerprintVector(2, 512), FingerprintVector(3, 512)), ConfigMismatch);
}

TEST_CASE("tanimoto agrees with set arithmetic and is symmetric") {
  Rng rng(5);
  std::vector<FingerprintVector> fps;
  for (int i = 0; i < 40; ++i) fps.push_back(morgan_fingerprint(parse_smiles(testing::random_smiles(rng)), 2, 512));
  for (const auto& a : fps) {
    for (const auto& b : fps) {
      const auto sa = bit_set(a), sb = bit_set(b);
      std::size_t inter = 0;
      for (auto x : sa) inter += sb.count(x);
      const std::size_t uni = sa.size() + sb.size() - inter;
      const double expected = uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
      CHECK(tanimoto(a, b) == expected);
      CHECK(tanimoto(a, b) == tanimoto(b, a));
    }
  }
}

TEST_CASE("fingerprint cache round trip") {
  std::vector<FingerprintRecord> recs;
  for (const auto& s : testing::sample_smiles()) recs.push_back({s, morgan_fingerprint(parse_smiles(s), 2, 1024)});
  const auto bytes = serialize_fingerprints(recs);
  CHECK(bytes.substr(0, 5) == std::string("GFPR\x01", 5));
  CHECK(deserialize_fingerprints(bytes) == recs);
  CHECK(serialize_fingerprints(deserialize_fingerprints(bytes)) == bytes);
  CHECK_THROWS_AS(deserialize_fingerprints("GFPR\x02"), FormatError);
  CHECK_THROWS_AS(deserialize_fingerprints(bytes.substr(0, bytes.size() - 3)), FormatError);
}
