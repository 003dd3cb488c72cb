#include "gamic/molgraph.h"

#include <algorithm>
#include <array>
#include <cctype>
#include <map>
#include <set>

#include "gamic/errors.h"

namespace gamic {

namespace {

const std::set<std::string, std::less<>>& periodic_table() {
  static const std::set<std::string, std::less<>> table = {
      "H",  "He", "Li", "Be", "B",  "C",  "N",  "O",  "F",  "Ne", "Na", "Mg", "Al", "Si", "P",  "S",  "Cl", "Ar", "K",
      "Ca", "Sc", "Ti", "V",  "Cr", "Mn", "Fe", "Co", "Ni", "Cu", "Zn", "Ga", "Ge", "As", "Se", "Br", "Kr", "Rb", "Sr",
      "Y",  "Zr", "Nb", "Mo", "Tc", "Ru", "Rh", "Pd", "Ag", "Cd", "In", "Sn", "Sb", "Te", "I",  "Xe", "Cs", "Ba", "La",
      "Ce", "Pr", "Nd", "Pm", "Sm", "Eu", "Gd", "Tb", "Dy", "Ho", "Er", "Tm", "Yb", "Lu", "Hf", "Ta", "W",  "Re", "Os",
      "Ir", "Pt", "Au", "Hg", "Tl", "Pb", "Bi", "Po", "At", "Rn", "Fr", "Ra", "Ac", "Th", "Pa", "U",  "Np", "Pu", "Am",
      "Cm", "Bk", "Cf", "Es", "Fm", "Md", "No", "Lr"};
  return table;
}

bool is_supported(std::string_view element) {
  const auto& s = supported_elements();
  return std::find(s.begin(), s.end(), element) != s.end();
}

// Allowed valences for atoms written without brackets.
const std::vector<int>& default_valences(std::string_view element) {
  static const std::map<std::string, std::vector<int>, std::less<>> table = {
      {"B", {3}}, {"C", {4}}, {"N", {3}}, {"O", {2}}, {"P", {3, 5}}, {"S", {2, 4, 6}},
      {"F", {1}}, {"Cl", {1}}, {"Br", {1}}, {"I", {1}}};
  return table.at(std::string(element));
}

// Bond orders in half units so aromatic bonds stay integral.
int half_order(BondOrder o) {
  switch (o) {
    case BondOrder::Single: return 2;
    case BondOrder::Double: return 4;
    case BondOrder::Triple: return 6;
    case BondOrder::Aromatic: return 3;
  }
  return 2;
}

struct PendingRing {
  int atom;
  std::optional<BondOrder> order;
  std::size_t position;
};

class SmilesParser {
 public:
  explicit SmilesParser(std::string_view s) : s_(s) {}

  MolecularGraph run() {
    if (s_.empty()) throw ParseError(0, "empty SMILES");
    int prev = -1;
    std::optional<BondOrder> pending_bond;
    std::vector<int> branch_stack;
    std::vector<std::size_t> branch_pos;

    while (pos_ < s_.size()) {
      const char ch = s_[pos_];
      if (ch == '(') {
        if (prev < 0) throw ParseError(pos_, "branch without preceding atom");
        if (pending_bond) throw ParseError(pos_, "bond symbol before branch");
        branch_stack.push_back(prev);
        branch_pos.push_back(pos_);
        ++pos_;
      } else if (ch == ')') {
        if (branch_stack.empty()) throw ParseError(pos_, "unbalanced ')'");
        if (pending_bond) throw ParseError(pos_, "dangling bond symbol");
        if (pos_ > 0 && s_[pos_ - 1] == '(') throw ParseError(pos_, "empty branch");
        prev = branch_stack.back();
        branch_stack.pop_back();
        branch_pos.pop_back();
        ++pos_;
      } else if (ch == '.') {
        if (pending_bond) throw ParseError(pos_, "bond symbol before '.'");
        if (!branch_stack.empty()) throw ParseError(pos_, "'.' inside branch");
        prev = -1;
        ++pos_;
      } else if (ch == '-' || ch == '=' || ch == '#' || ch == ':' || ch == '/' || ch == '\\') {
        if (pending_bond) throw ParseError(pos_, "consecutive bond symbols");
        if (prev < 0) throw ParseError(pos_, "bond symbol without preceding atom");
        pending_bond = ch == '=' ? BondOrder::Double
                       : ch == '#' ? BondOrder::Triple
                       : ch == ':' ? BondOrder::Aromatic
                                   : BondOrder::Single;
        ++pos_;
      } else if (std::isdigit(static_cast<unsigned char>(ch)) || ch == '%') {
        if (prev < 0) throw ParseError(pos_, "ring closure without preceding atom");
        const std::size_t at = pos_;
        const int label = read_ring_label();
        ring_closure(prev, label, pending_bond, at);
        pending_bond.reset();
      } else {
        const std::size_t at = pos_;
        const int atom = read_atom();
        if (prev >= 0) add_bond(prev, atom, pending_bond, at);
        pending_bond.reset();
        prev = atom;
      }
    }
    if (pending_bond) throw ParseError(s_.size(), "dangling bond symbol at end of input");
    if (!branch_stack.empty()) throw ParseError(s_.size(), "unclosed '(' opened at position " + std::to_string(branch_pos.back()));
    if (!open_rings_.empty()) {
      throw RingClosureError("unclosed ring bond " + std::to_string(open_rings_.begin()->first) + " opened at position " +
                             std::to_string(open_rings_.begin()->second.position));
    }
    assign_hydrogens();
    return std::move(g_);
  }

 private:
  int read_ring_label() {
    if (s_[pos_] == '%') {
      if (pos_ + 2 >= s_.size() || !std::isdigit(static_cast<unsigned char>(s_[pos_ + 1])) ||
          !std::isdigit(static_cast<unsigned char>(s_[pos_ + 2]))) {
        throw ParseError(pos_, "'%' must be followed by two digits");
      }
      const int label = (s_[pos_ + 1] - '0') * 10 + (s_[pos_ + 2] - '0');
      pos_ += 3;
      return label;
    }
    return s_[pos_++] - '0';
  }

  void ring_closure(int atom, int label, std::optional<BondOrder> order, std::size_t at) {
    auto it = open_rings_.find(label);
    if (it == open_rings_.end()) {
      open_rings_.emplace(label, PendingRing{atom, order, at});
      return;
    }
    const PendingRing open = it->second;
    open_rings_.erase(it);
    if (open.atom == atom) throw RingClosureError("ring bond " + std::to_string(label) + " closes on its own atom");
    if (open.order && order && *open.order != *order) {
      throw RingClosureError("conflicting bond orders on ring bond " + std::to_string(label));
    }
    add_bond(open.atom, atom, open.order ? open.order : order, at);
  }

  void add_bond(int a, int b, std::optional<BondOrder> order, std::size_t at) {
    for (const Bond& existing : g_.bonds) {
      if ((existing.begin == a && existing.end == b) || (existing.begin == b && existing.end == a)) {
        throw RingClosureError("duplicate bond between atoms " + std::to_string(a) + " and " + std::to_string(b) +
                               " at position " + std::to_string(at));
      }
    }
    BondOrder o;
    if (order) {
      o = *order;
    } else {
      o = (g_.atoms[a].aromatic && g_.atoms[b].aromatic) ? BondOrder::Aromatic : BondOrder::Single;
    }
    g_.bonds.push_back(Bond{a, b, o, false});
    g_.atoms[a].degree++;
    g_.atoms[b].degree++;
  }

  int read_atom() {
    const std::size_t start = pos_;
    Atom atom;
    if (s_[pos_] == '[') {
      read_bracket_atom(atom);
      bracket_.push_back(true);
    } else {
      read_organic_atom(atom, start);
      bracket_.push_back(false);
    }
    g_.atoms.push_back(std::move(atom));
    return static_cast<int>(g_.atoms.size()) - 1;
  }

  void read_organic_atom(Atom& atom, std::size_t start) {
    const char ch = s_[pos_];
    const char next = pos_ + 1 < s_.size() ? s_[pos_ + 1] : '\0';
    if (ch == 'C' && next == 'l') {
      atom.element = "Cl";
      pos_ += 2;
      return;
    }
    if (ch == 'B' && next == 'r') {
      atom.element = "Br";
      pos_ += 2;
      return;
    }
    switch (ch) {
      case 'B': case 'C': case 'N': case 'O': case 'P': case 'S': case 'F': case 'I':
        atom.element = std::string(1, ch);
        ++pos_;
        return;
      case 'b': case 'c': case 'n': case 'o': case 'p': case 's':
        atom.element = std::string(1, static_cast<char>(std::toupper(static_cast<unsigned char>(ch))));
        atom.aromatic = true;
        ++pos_;
        return;
      default:
        break;
    }
    if (std::isalpha(static_cast<unsigned char>(ch)) || ch == '*') {
      std::string sym(1, ch);
      if (std::islower(static_cast<unsigned char>(next))) sym += next;
      throw UnsupportedElement(start, sym);
    }
    throw ParseError(start, std::string("unexpected character '") + ch + "'");
  }

  void read_bracket_atom(Atom& atom) {
    const std::size_t open = pos_;
    ++pos_;  // '['
    auto peek = [&]() -> char { return pos_ < s_.size() ? s_[pos_] : '\0'; };
    while (std::isdigit(static_cast<unsigned char>(peek()))) ++pos_;  // isotope, ignored

    const std::size_t sym_pos = pos_;
    const char c0 = peek();
    if (c0 == '\0') throw ParseError(pos_, "unterminated bracket atom");
    if (c0 == '*') throw UnsupportedElement(sym_pos, "*");
    if (std::isupper(static_cast<unsigned char>(c0))) {
      const char c1 = pos_ + 1 < s_.size() ? s_[pos_ + 1] : '\0';
      std::string two{c0, c1};
      if (std::islower(static_cast<unsigned char>(c1)) && periodic_table().count(two)) {
        atom.element = two;
        pos_ += 2;
      } else {
        atom.element = std::string(1, c0);
        pos_ += 1;
        if (!periodic_table().count(atom.element)) {
          std::string sym = atom.element;
          if (std::islower(static_cast<unsigned char>(c1))) sym += c1;
          throw UnsupportedElement(sym_pos, sym);
        }
      }
    } else if (std::islower(static_cast<unsigned char>(c0))) {
      const char c1 = pos_ + 1 < s_.size() ? s_[pos_ + 1] : '\0';
      if ((c0 == 's' && c1 == 'e') || (c0 == 'a' && c1 == 's')) {
        atom.element = std::string{static_cast<char>(std::toupper(c0)), c1};
        pos_ += 2;
      } else if (c0 == 'b' || c0 == 'c' || c0 == 'n' || c0 == 'o' || c0 == 'p' || c0 == 's') {
        atom.element = std::string(1, static_cast<char>(std::toupper(c0)));
        pos_ += 1;
      } else {
        throw UnsupportedElement(sym_pos, std::string(1, c0));
      }
      atom.aromatic = true;
    } else {
      throw ParseError(pos_, "expected element symbol in bracket atom");
    }
    if (!is_supported(atom.element)) throw UnsupportedElement(sym_pos, atom.element);

    // Chirality, discarded.
    while (peek() == '@') ++pos_;
    for (const char* cls : {"TH", "AL", "SP", "TB", "OH"}) {
      if (s_.substr(pos_, 2) == cls) {
        pos_ += 2;
        while (std::isdigit(static_cast<unsigned char>(peek()))) ++pos_;
        break;
      }
    }
    int hcount = 0;
    if (peek() == 'H') {
      ++pos_;
      hcount = 1;
      if (std::isdigit(static_cast<unsigned char>(peek()))) {
        hcount = 0;
        while (std::isdigit(static_cast<unsigned char>(peek()))) hcount = hcount * 10 + (s_[pos_++] - '0');
      }
    }
    atom.explicit_h = hcount;
    if (peek() == '+' || peek() == '-') {
      const char sign_ch = s_[pos_++];
      const int sign = sign_ch == '+' ? 1 : -1;
      int mag = 1;
      if (std::isdigit(static_cast<unsigned char>(peek()))) {
        mag = 0;
        while (std::isdigit(static_cast<unsigned char>(peek()))) mag = mag * 10 + (s_[pos_++] - '0');
      } else {
        while (peek() == sign_ch) {
          ++mag;
          ++pos_;
        }
      }
      atom.formal_charge = sign * mag;
    }
    if (peek() == ':') {  // atom class
      ++pos_;
      if (!std::isdigit(static_cast<unsigned char>(peek()))) throw ParseError(pos_, "atom class requires digits");
      while (std::isdigit(static_cast<unsigned char>(peek()))) ++pos_;
    }
    if (peek() != ']') {
      if (pos_ >= s_.size()) throw ParseError(pos_, "unterminated bracket atom opened at position " + std::to_string(open));
      throw ParseError(pos_, std::string("unexpected character '") + s_[pos_] + "' in bracket atom");
    }
    ++pos_;
  }

  void assign_hydrogens() {
    std::vector<int> half_sum(g_.atoms.size(), 0);
    std::vector<int> aromatic_bonds(g_.atoms.size(), 0);
    for (const Bond& b : g_.bonds) {
      for (int a : {b.begin, b.end}) {
        half_sum[a] += half_order(b.order);
        if (b.order == BondOrder::Aromatic) aromatic_bonds[a]++;
      }
    }
    for (std::size_t i = 0; i < g_.atoms.size(); ++i) {
      Atom& atom = g_.atoms[i];
      if (bracket_[i]) {
        atom.implicit_h = 0;
        continue;
      }
      const auto& valences = default_valences(atom.element);
      int sum;
      if (atom.aromatic) {
        // Aromatic bonds count once each; carbon-like atoms (B, C, N, P) also
        // carry one delocalised bond when it still fits their valence.
        sum = (half_sum[i] - 3 * aromatic_bonds[i]) / 2 + aromatic_bonds[i];
        const bool takes_pi = atom.element == "C" || atom.element == "N" || atom.element == "B" || atom.element == "P";
        if (takes_pi && aromatic_bonds[i] > 0 && sum + 1 <= valences.back()) sum += 1;
      } else {
        sum = half_sum[i] / 2;
      }
      auto it = std::find_if(valences.begin(), valences.end(), [&](int v) { return v >= sum; });
      if (it == valences.end()) {
        throw ValenceError("atom " + std::to_string(i) + " (" + atom.element + ") has bond order sum " + std::to_string(sum) +
                           " exceeding its maximum valence " + std::to_string(valences.back()));
      }
      atom.implicit_h = *it - sum;
    }
  }

  std::string_view s_;
  std::size_t pos_ = 0;
  MolecularGraph g_;
  std::vector<bool> bracket_;
  std::map<int, PendingRing> open_rings_;
};

// Marks bonds that lie on a cycle: a bond is in a ring iff it is not a bridge.
void perceive_rings(MolecularGraph& g) {
  const std::size_t n = g.atoms.size();
  const auto nbrs = g.neighbors();
  std::vector<int> disc(n, -1), low(n, 0);
  std::vector<bool> bridge(g.bonds.size(), false);
  int timer = 0;
  struct Frame {
    int atom;
    int parent_bond;
    std::size_t next;
  };
  for (std::size_t root = 0; root < n; ++root) {
    if (disc[root] >= 0) continue;
    std::vector<Frame> stack{{static_cast<int>(root), -1, 0}};
    disc[root] = low[root] = timer++;
    while (!stack.empty()) {
      Frame& f = stack.back();
      if (f.next < nbrs[f.atom].size()) {
        const auto [to, bond] = nbrs[f.atom][f.next++];
        if (bond == f.parent_bond) continue;
        if (disc[to] < 0) {
          disc[to] = low[to] = timer++;
          stack.push_back({to, bond, 0});
        } else {
          low[f.atom] = std::min(low[f.atom], disc[to]);
        }
      } else {
        const Frame done = f;
        stack.pop_back();
        if (!stack.empty()) {
          const int parent = stack.back().atom;
          low[parent] = std::min(low[parent], low[done.atom]);
          if (low[done.atom] > disc[parent]) bridge[done.parent_bond] = true;
        }
      }
    }
  }
  for (auto& a : g.atoms) a.in_ring = false;
  for (std::size_t b = 0; b < g.bonds.size(); ++b) {
    g.bonds[b].in_ring = !bridge[b];
    if (g.bonds[b].in_ring) {
      g.atoms[g.bonds[b].begin].in_ring = true;
      g.atoms[g.bonds[b].end].in_ring = true;
    }
  }
}

}  // namespace

const std::vector<std::string>& supported_elements() {
  static const std::vector<std::string> elements = {"B",  "C",  "N",  "O",  "P",  "S",  "F",  "Cl", "Br",
                                                    "I",  "H",  "Si", "Se", "As", "Na", "K",  "Li", "Mg",
                                                    "Ca", "Zn", "Al", "Te"};
  return elements;
}

std::size_t element_slot(std::string_view element) {
  const auto& s = supported_elements();
  for (std::size_t i = 0; i < kOrganicSubsetSize; ++i)
    if (s[i] == element) return i;
  return kOrganicSubsetSize;
}

std::vector<std::vector<Neighbor>> MolecularGraph::neighbors() const {
  std::vector<std::vector<Neighbor>> out(atoms.size());
  for (std::size_t b = 0; b < bonds.size(); ++b) {
    out[bonds[b].begin].emplace_back(bonds[b].end, static_cast<int>(b));
    out[bonds[b].end].emplace_back(bonds[b].begin, static_cast<int>(b));
  }
  return out;
}

std::size_t MolecularGraph::num_components() const {
  std::vector<int> parent(atoms.size());
  for (std::size_t i = 0; i < parent.size(); ++i) parent[i] = static_cast<int>(i);
  auto find = [&](int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  std::size_t comps = atoms.size();
  for (const Bond& b : bonds) {
    const int ra = find(b.begin), rb = find(b.end);
    if (ra != rb) {
      parent[ra] = rb;
      --comps;
    }
  }
  return comps;
}

MolecularGraph featurize(MolecularGraph g) {
  perceive_rings(g);
  const std::size_t n = g.atoms.size();
  g.node_features = Tensor2(n, kNodeFeatureDim);
  g.adjacency = Tensor2(n, n);
  g.edge_features = Tensor2(g.bonds.size(), kEdgeFeatureDim);
  for (std::size_t i = 0; i < n; ++i) {
    const Atom& a = g.atoms[i];
    auto row = g.node_features.row(i);
    std::size_t off = 0;
    row[off + element_slot(a.element)] = 1.0;
    off += kElementSlots;
    row[off + std::min<std::size_t>(static_cast<std::size_t>(a.degree), kDegreeSlots - 1)] = 1.0;
    off += kDegreeSlots;
    row[off++] = static_cast<double>(a.formal_charge);
    row[off++] = a.aromatic ? 1.0 : 0.0;
    row[off + std::min<std::size_t>(static_cast<std::size_t>(a.total_h()), kHydrogenSlots - 1)] = 1.0;
  }
  for (std::size_t b = 0; b < g.bonds.size(); ++b) {
    const Bond& bond = g.bonds[b];
    g.adjacency(bond.begin, bond.end) = 1.0;
    g.adjacency(bond.end, bond.begin) = 1.0;
    auto row = g.edge_features.row(b);
    row[static_cast<std::size_t>(bond.order)] = 1.0;
    row[4] = bond.in_ring ? 1.0 : 0.0;
  }
  return g;
}

MolecularGraph parse_smiles(std::string_view smiles) {
  return featurize(SmilesParser(smiles).run());
}

MolecularGraph permute_atoms(const MolecularGraph& graph, const std::vector<int>& perm) {
  const std::size_t n = graph.atoms.size();
  if (perm.size() != n) throw std::invalid_argument("permute_atoms: permutation size mismatch");
  std::vector<int> inverse(n, -1);
  for (std::size_t i = 0; i < n; ++i) inverse[static_cast<std::size_t>(perm[i])] = static_cast<int>(i);
  MolecularGraph out;
  out.atoms.reserve(n);
  for (int old : perm) out.atoms.push_back(graph.atoms[static_cast<std::size_t>(old)]);
  for (const Bond& b : graph.bonds) out.bonds.push_back(Bond{inverse[b.begin], inverse[b.end], b.order, b.in_ring});
  return featurize(std::move(out));
}

}  // namespace gamic
