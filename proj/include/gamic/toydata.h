#pragma once

// Synthetic molecules for offline runs: substituted ring and chain scaffolds
// with captions stated from their structure, caption embeddings from hashed
// n-gram counts, and a binary property set with clustered duplicates.

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "gamic/textemb.h"

namespace gamic {

struct ToyMolecule {
  std::string id;
  std::string smiles;
  std::string caption;
  bool label = false;        // property set: no polar substituent
  std::size_t cluster = 0;   // property set: members share scaffold and substituents
};

inline constexpr std::uint64_t kToySeed = 0x70795EEDULL;

/// `count` distinct molecules with captions.
std::vector<ToyMolecule> toy_caption_molecules(std::size_t count = 200, std::uint64_t seed = kToySeed);

/// Property set of `clusters` scaffold/substituent combinations, each with
/// one to four members (positional isomers, exact repeats allowed). Labels
/// are flipped per cluster with probability `noise`.
std::vector<ToyMolecule> toy_property_molecules(std::size_t clusters = 80, double noise = 0.2,
                                                std::uint64_t seed = kToySeed + 1);

/// Signed feature hashing of lowercased word tokens (plus adjacent-pair
/// tokens when `bigrams`), normalized.
std::vector<float> hashed_text_embedding(std::string_view text, std::size_t dim, bool bigrams);

TextEmbeddingIndex toy_caption_embeddings(const std::vector<ToyMolecule>& mols, std::size_t dim, bool bigrams,
                                          std::string provenance);

/// Writes captions.jsonl, scibert.gemb (uni+bigram), bert.gemb (unigram)
/// and property.jsonl into `dir`, creating it if needed.
void write_toy_data(const std::string& dir, std::size_t embedding_dim = 64);

}  // namespace gamic
