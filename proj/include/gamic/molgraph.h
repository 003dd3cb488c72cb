#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "gamic/tensor.h"

namespace gamic {

enum class BondOrder : std::uint8_t { Single = 0, Double = 1, Triple = 2, Aromatic = 3 };

/// Small integer code used by the fingerprint hash (1..4).
constexpr int bond_order_code(BondOrder o) noexcept { return static_cast<int>(o) + 1; }

struct Atom {
  std::string element;  // canonical capitalisation, e.g. "C", "Cl"
  bool aromatic = false;
  int formal_charge = 0;
  std::optional<int> explicit_h;  // bracket atoms only
  int degree = 0;
  int implicit_h = 0;  // from the default-valence table; 0 for bracket atoms
  bool in_ring = false;

  int total_h() const noexcept { return explicit_h.value_or(0) + implicit_h; }
};

struct Bond {
  int begin = 0;
  int end = 0;
  BondOrder order = BondOrder::Single;
  bool in_ring = false;

  int other(int atom) const noexcept { return atom == begin ? end : begin; }
};

/// Neighbour entry: (neighbour atom index, bond index).
using Neighbor = std::pair<int, int>;

struct MolecularGraph {
  std::vector<Atom> atoms;
  std::vector<Bond> bonds;
  Tensor2 node_features;  // N x kNodeFeatureDim
  Tensor2 adjacency;      // N x N, symmetric 0/1, zero diagonal
  Tensor2 edge_features;  // M x kEdgeFeatureDim, row b describes bonds[b]

  std::size_t num_atoms() const noexcept { return atoms.size(); }
  std::size_t num_bonds() const noexcept { return bonds.size(); }
  bool featurized() const noexcept { return node_features.rows == atoms.size() && !atoms.empty(); }

  std::vector<std::vector<Neighbor>> neighbors() const;
  /// Number of connected components ("." separated fragments).
  std::size_t num_components() const;
};

/// Elements accepted anywhere in the input. The first ten (the SMILES organic
/// subset) get their own one-hot slot; the rest share the "other" slot.
const std::vector<std::string>& supported_elements();
inline constexpr std::size_t kOrganicSubsetSize = 10;

inline constexpr std::size_t kElementSlots = kOrganicSubsetSize + 1;
inline constexpr std::size_t kDegreeSlots = 7;
inline constexpr std::size_t kHydrogenSlots = 5;
inline constexpr std::size_t kNodeFeatureDim = kElementSlots + kDegreeSlots + 1 + 1 + kHydrogenSlots;
inline constexpr std::size_t kEdgeFeatureDim = 5;

/// Index of `element` in the element one-hot block (kOrganicSubsetSize for "other").
std::size_t element_slot(std::string_view element);

/// Parses the supported SMILES subset into a featurized graph.
///
/// Throws ParseError, UnsupportedElement, RingClosureError or ValenceError.
MolecularGraph parse_smiles(std::string_view smiles);

/// Fills node_features, adjacency and edge_features from atoms/bonds.
///
/// Node row layout: element one-hot (11) | degree one-hot 0..6 (7) |
/// formal charge (1) | aromatic flag (1) | hydrogen count one-hot 0..4 (5).
/// Edge row layout: bond order one-hot single/double/triple/aromatic (4) |
/// in-ring flag (1). Values past the last slot clamp into it.
MolecularGraph featurize(MolecularGraph graph);

/// Returns a copy of `graph` with atoms reordered so that new atom i is old
/// atom perm[i]. Bonds are remapped and features recomputed.
MolecularGraph permute_atoms(const MolecularGraph& graph, const std::vector<int>& perm);

}  // namespace gamic
