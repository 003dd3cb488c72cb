#pragma once

// Shared fixtures for the unit and acceptance suites.

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "gamic/rng.h"

namespace gamic::testing {

/// Hand-picked SMILES covering rings, branches, aromatics, charges and
/// disconnected fragments.
inline const std::vector<std::string>& sample_smiles() {
  static const std::vector<std::string> smiles = {
      "C",
      "CC",
      "CCO",
      "CC(=O)O",
      "c1ccccc1",
      "c1ccncc1",
      "c1ccoc1",
      "c1ccsc1",
      "c1cc[nH]c1",
      "c1ccc2ccccc2c1",
      "C1CCCCC1",
      "C1CCNCC1",
      "CC(C)(C)O",
      "OC(=O)c1ccccc1O",
      "CN1CCC[C@H]1c1cccnc1",
      "N#Cc1ccc(Cl)cc1",
      "C[N+](C)(C)C.[Cl-]",
      "O=[N+]([O-])c1ccccc1",
      "FC(F)(F)c1ccc(Br)cc1",
      "CC(=O)Nc1ccc(O)cc1",
      "C1CC2CCC1C2",
      "C=CC=C",
      "C#CC",
      "COc1ccc(CC(N)C(=O)O)cc1",
      "c1ccccc1-c1ccccc1",
      "CCCCCCCCCC(=O)O",
      "OCC(O)CO",
      "S=C(N)N",
      "CS(=O)(=O)C",
      "OP(=O)(O)O",
      "C%10CCCCC%10",
      "F/C=C/F",
  };
  return smiles;
}

/// Random acyclic-or-ring small molecule written as SMILES. Valence is kept
/// legal by construction: halogens are terminal and each atom's bond count
/// stays within its default valence.
inline std::string random_smiles(Rng& rng, std::size_t min_atoms = 2, std::size_t max_atoms = 12) {
  struct Node {
    std::string symbol;
    int valence;
    int used = 0;
    std::vector<int> children;
    std::vector<char> child_bond;
    std::vector<std::string> ring_marks;
  };
  static const std::vector<std::pair<std::string, int>> elements = {
      {"C", 4}, {"C", 4}, {"C", 4}, {"C", 4}, {"N", 3}, {"O", 2}, {"S", 2}, {"Cl", 1}, {"F", 1}};
  const std::size_t n = min_atoms + rng.uniform_index(max_atoms - min_atoms + 1);
  std::vector<Node> nodes;
  nodes.push_back({"C", 4});
  for (std::size_t i = 1; i < n; ++i) {
    std::vector<int> open;
    for (std::size_t j = 0; j < nodes.size(); ++j)
      if (nodes[j].used < nodes[j].valence) open.push_back(static_cast<int>(j));
    if (open.empty()) break;
    const int parent = open[rng.uniform_index(open.size())];
    const auto& [sym, val] = elements[rng.uniform_index(elements.size())];
    Node child{sym, val};
    char bond = '-';
    if (val >= 2 && nodes[parent].valence - nodes[parent].used >= 2 && rng.uniform01() < 0.15) bond = '=';
    const int order = bond == '=' ? 2 : 1;
    nodes[parent].used += order;
    child.used += order;
    nodes[parent].children.push_back(static_cast<int>(nodes.size()));
    nodes[parent].child_bond.push_back(bond);
    nodes.push_back(child);
  }
  // Up to two ring closures between atoms with spare valence.
  int label = 1;
  std::vector<std::pair<std::size_t, std::size_t>> closed;
  for (int attempt = 0; attempt < 6 && label <= 2; ++attempt) {
    const std::size_t a = rng.uniform_index(nodes.size());
    const std::size_t b = rng.uniform_index(nodes.size());
    if (a == b || nodes[a].used >= nodes[a].valence || nodes[b].used >= nodes[b].valence) continue;
    bool adjacent = false;
    for (int c : nodes[a].children) adjacent = adjacent || c == static_cast<int>(b);
    for (int c : nodes[b].children) adjacent = adjacent || c == static_cast<int>(a);
    for (const auto& [x, y] : closed) adjacent = adjacent || (x == a && y == b) || (x == b && y == a);
    if (adjacent) continue;
    closed.emplace_back(a, b);
    nodes[a].used++;
    nodes[b].used++;
    nodes[a].ring_marks.push_back(std::to_string(label));
    nodes[b].ring_marks.push_back(std::to_string(label));
    ++label;
  }
  std::function<std::string(int)> write = [&](int i) {
    std::string s = nodes[i].symbol;
    for (const auto& m : nodes[i].ring_marks) s += m;
    const auto& ch = nodes[i].children;
    for (std::size_t k = 0; k < ch.size(); ++k) {
      const std::string bond = nodes[i].child_bond[k] == '=' ? "=" : "";
      if (k + 1 < ch.size()) {
        s += "(" + bond + write(ch[k]) + ")";
      } else {
        s += bond + write(ch[k]);
      }
    }
    return s;
  };
  return write(0);
}

/// Empty directory under the system temp dir, recreated on every call.
inline std::string scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("gamic_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir.string();
}

}  // namespace gamic::testing
