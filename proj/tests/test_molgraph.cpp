#include <doctest.h>

#include <algorithm>
#include <tuple>

#include "gamic/errors.h"
#include "gamic/molgraph.h"
#include "test_support.h"

using namespace gamic;

namespace {

std::size_t count_order(const MolecularGraph& g, BondOrder o) {
  return static_cast<std::size_t>(std::count_if(g.bonds.begin(), g.bonds.end(), [o](const Bond& b) { return b.order == o; }));
}

std::vector<std::tuple<std::string, int, int>> atom_multiset(const MolecularGraph& g) {
  std::vector<std::tuple<std::string, int, int>> out;
  for (const auto& a : g.atoms) out.emplace_back(a.element, a.degree, a.total_h());
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<int> bond_multiset(const MolecularGraph& g) {
  std::vector<int> out;
  for (const auto& b : g.bonds) out.push_back(static_cast<int>(b.order));
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

TEST_CASE("methane has four implicit hydrogens") {
  const auto g = parse_smiles("C");
  REQUIRE(g.num_atoms() == 1);
  CHECK(g.num_bonds() == 0);
  CHECK(g.atoms[0].element == "C");
  CHECK(g.atoms[0].implicit_h == 4);
  CHECK(g.atoms[0].degree == 0);
}

TEST_CASE("benzene ring closure and aromaticity") {
  const auto g = parse_smiles("c1ccccc1");
  REQUIRE(g.num_atoms() == 6);
  REQUIRE(g.num_bonds() == 6);
  CHECK(count_order(g, BondOrder::Aromatic) == 6);
  for (const auto& a : g.atoms) {
    CHECK(a.aromatic);
    CHECK(a.in_ring);
    CHECK(a.implicit_h == 1);
    CHECK(a.degree == 2);
  }
  for (const auto& b : g.bonds) CHECK(b.in_ring);
}

TEST_CASE("acetic acid") {
  const auto g = parse_smiles("CC(=O)O");
  REQUIRE(g.num_atoms() == 4);
  CHECK(g.num_bonds() == 3);
  CHECK(count_order(g, BondOrder::Double) == 1);
  CHECK(g.atoms[0].implicit_h == 3);
  CHECK(g.atoms[1].implicit_h == 0);
  CHECK(g.atoms[2].implicit_h == 0);
  CHECK(g.atoms[3].implicit_h == 1);
}

TEST_CASE("aromatic heteroatoms take the right hydrogen counts") {
  CHECK(parse_smiles("c1ccncc1").atoms[3].implicit_h == 0);
  CHECK(parse_smiles("c1ccoc1").atoms[3].implicit_h == 0);
  CHECK(parse_smiles("c1ccsc1").atoms[3].implicit_h == 0);
  const auto pyrrole = parse_smiles("c1cc[nH]c1");
  CHECK(pyrrole.atoms[3].total_h() == 1);
  CHECK(pyrrole.atoms[3].aromatic);
  const auto naphthalene = parse_smiles("c1ccc2ccccc2c1");
  CHECK(naphthalene.atoms[3].implicit_h == 0);  // fusion atom
  CHECK(naphthalene.atoms[0].implicit_h == 1);
}

TEST_CASE("bracket atoms carry charge and explicit hydrogens") {
  const auto g = parse_smiles("C[N+](C)(C)C.[Cl-]");
  CHECK(g.atoms[1].formal_charge == 1);
  CHECK(g.atoms[1].implicit_h == 0);
  CHECK(g.atoms[5].formal_charge == -1);
  CHECK(g.num_components() == 2);
  CHECK(parse_smiles("[NH4+]").atoms[0].total_h() == 4);
  CHECK(parse_smiles("[13CH3]O").atoms[0].total_h() == 3);
  CHECK(parse_smiles("[O--]").atoms[0].formal_charge == -2);
}

TEST_CASE("stereo markers are discarded") {
  const auto g = parse_smiles("F/C=C/F");
  CHECK(g.num_atoms() == 4);
  CHECK(count_order(g, BondOrder::Double) == 1);
  const auto chiral = parse_smiles("N[C@@H](C)C(=O)O");
  CHECK(chiral.atoms[1].total_h() == 1);
  CHECK(chiral.num_atoms() == 6);
}

TEST_CASE("two-digit ring closures") {
  const auto g = parse_smiles("C%10CCCCC%10");
  CHECK(g.num_bonds() == 6);
  for (const auto& a : g.atoms) CHECK(a.in_ring);
}

TEST_CASE("ring membership excludes chains and bridges between rings") {
  const auto g = parse_smiles("C1CCCCC1CC");
  for (int i = 0; i < 6; ++i) CHECK(g.atoms[i].in_ring);
  CHECK_FALSE(g.atoms[6].in_ring);
  CHECK_FALSE(g.atoms[7].in_ring);
  const auto biphenyl = parse_smiles("c1ccccc1-c1ccccc1");
  CHECK(count_order(biphenyl, BondOrder::Single) == 1);
  for (const auto& b : biphenyl.bonds) CHECK(b.in_ring == (b.order == BondOrder::Aromatic));
}

TEST_CASE("parse errors") {
  SUBCASE("unclosed branch reports end position") {
    try {
      parse_smiles("C(");
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(e.position() == 2);
    }
  }
  SUBCASE("stray close paren") {
    try {
      parse_smiles("C)C");
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(e.position() == 1);
    }
  }
  CHECK_THROWS_AS(parse_smiles(""), ParseError);
  CHECK_THROWS_AS(parse_smiles("C[C"), ParseError);
  CHECK_THROWS_AS(parse_smiles("C="), ParseError);
  CHECK_THROWS_AS(parse_smiles("C$C"), ParseError);
  CHECK_THROWS_AS(parse_smiles("(C)"), ParseError);
  CHECK_THROWS_AS(parse_smiles("C%1"), ParseError);
}

TEST_CASE("unsupported elements") {
  CHECK_THROWS_AS(parse_smiles("[Xx]"), UnsupportedElement);
  CHECK_THROWS_AS(parse_smiles("C[Fe]C"), UnsupportedElement);
  CHECK_THROWS_AS(parse_smiles("*C"), UnsupportedElement);
  CHECK_THROWS_AS(parse_smiles("CX"), UnsupportedElement);
  try {
    parse_smiles("CC[Pt]");
    FAIL("expected UnsupportedElement");
  } catch (const UnsupportedElement& e) {
    CHECK(e.symbol() == "Pt");
  }
}

TEST_CASE("ring closure errors") {
  CHECK_THROWS_AS(parse_smiles("C1CC"), RingClosureError);
  CHECK_THROWS_AS(parse_smiles("C11"), RingClosureError);
  CHECK_THROWS_AS(parse_smiles("C1C1"), RingClosureError);
  CHECK_THROWS_AS(parse_smiles("C=1CC#1"), RingClosureError);
}

TEST_CASE("valence errors") {
  CHECK_THROWS_AS(parse_smiles("C(=O)(=O)C"), ValenceError);
  CHECK_THROWS_AS(parse_smiles("FC(F)(F)(F)F"), ValenceError);
  CHECK_THROWS_AS(parse_smiles("O(C)(C)C"), ValenceError);
  CHECK_NOTHROW(parse_smiles("CS(=O)(=O)C"));  // S takes valence 6
  CHECK(parse_smiles("CS(=O)C").atoms[1].implicit_h == 0);
  CHECK(parse_smiles("OP(=O)(O)O").atoms[1].implicit_h == 0);
}

TEST_CASE("featurize: methane node row") {
  const auto g = parse_smiles("C");
  REQUIRE(g.node_features.rows == 1);
  REQUIRE(g.node_features.cols == kNodeFeatureDim);
  const auto row = g.node_features.row(0);
  const std::size_t deg_off = kElementSlots;
  const std::size_t charge_off = deg_off + kDegreeSlots;
  const std::size_t arom_off = charge_off + 1;
  const std::size_t h_off = arom_off + 1;
  for (std::size_t i = 0; i < kElementSlots; ++i) CHECK(row[i] == (i == element_slot("C") ? 1.0 : 0.0));
  for (std::size_t i = 0; i < kDegreeSlots; ++i) CHECK(row[deg_off + i] == (i == 0 ? 1.0 : 0.0));
  CHECK(row[charge_off] == 0.0);
  CHECK(row[arom_off] == 0.0);
  for (std::size_t i = 0; i < kHydrogenSlots; ++i) CHECK(row[h_off + i] == (i == 4 ? 1.0 : 0.0));
}

TEST_CASE("featurize: benzene bond row and non-organic element slot") {
  const auto g = parse_smiles("c1ccccc1");
  REQUIRE(g.edge_features.rows == 6);
  for (std::size_t b = 0; b < 6; ++b) {
    CHECK(g.edge_features(b, 0) == 0.0);
    CHECK(g.edge_features(b, 3) == 1.0);
    CHECK(g.edge_features(b, 4) == 1.0);
  }
  const auto si = parse_smiles("C[Si](C)(C)C");
  CHECK(si.node_features(1, kOrganicSubsetSize) == 1.0);
}

TEST_CASE("feature width is fixed across molecules") {
  for (const auto& s : testing::sample_smiles()) {
    const auto g = parse_smiles(s);
    CHECK(g.node_features.cols == kNodeFeatureDim);
    CHECK(g.edge_features.cols == kEdgeFeatureDim);
    CHECK(g.node_features.rows == g.num_atoms());
    CHECK(g.edge_features.rows == g.num_bonds());
  }
}

TEST_CASE("equivalent SMILES give isomorphic graphs") {
  const std::vector<std::pair<std::string, std::string>> pairs = {
      {"CCO", "OCC"}, {"CC(=O)O", "OC(C)=O"}, {"c1ccncc1", "n1ccccc1"}, {"OC(=O)c1ccccc1O", "Oc1ccccc1C(O)=O"}};
  for (const auto& [a, b] : pairs) {
    const auto ga = parse_smiles(a);
    const auto gb = parse_smiles(b);
    CHECK(atom_multiset(ga) == atom_multiset(gb));
    CHECK(bond_multiset(ga) == bond_multiset(gb));
  }
}

TEST_CASE("graph invariants over the sample corpus and random molecules") {
  Rng rng(7);
  std::vector<std::string> corpus = testing::sample_smiles();
  for (int i = 0; i < 200; ++i) corpus.push_back(testing::random_smiles(rng));
  for (const auto& s : corpus) {
    CAPTURE(s);
    const auto g = parse_smiles(s);
    const auto again = parse_smiles(s);
    CHECK(g.node_features == again.node_features);
    CHECK(g.adjacency == again.adjacency);
    CHECK(g.edge_features == again.edge_features);
    for (std::size_t i = 0; i < g.num_atoms(); ++i) {
      CHECK(g.adjacency(i, i) == 0.0);
      double row_sum = 0.0;
      for (std::size_t j = 0; j < g.num_atoms(); ++j) {
        CHECK(g.adjacency(i, j) == g.adjacency(j, i));
        row_sum += g.adjacency(i, j);
      }
      CHECK(row_sum == doctest::Approx(g.atoms[i].degree));
      CHECK(g.atoms[i].implicit_h >= 0);
    }
    CHECK(g.num_components() >= 1);
  }
}

TEST_CASE("permute_atoms preserves structure") {
  const auto g = parse_smiles("CC(=O)Nc1ccc(O)cc1");
  std::vector<int> perm(g.num_atoms());
  for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = static_cast<int>(perm.size() - 1 - i);
  const auto p = permute_atoms(g, perm);
  CHECK(atom_multiset(p) == atom_multiset(g));
  CHECK(bond_multiset(p) == bond_multiset(g));
  for (std::size_t i = 0; i < g.num_atoms(); ++i) CHECK(p.atoms[i].in_ring == g.atoms[perm[i]].in_ring);
}
