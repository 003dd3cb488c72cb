#include "gamic/toydata.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <json.hpp>
#include <set>
#include <tuple>

#include "gamic/binary_io.h"
#include "gamic/errors.h"
#include "gamic/metrics.h"
#include "gamic/molgraph.h"
#include "gamic/rng.h"

namespace gamic {

namespace {

struct Core {
  const char* member;  // with article
  const char* parent;
  bool aromatic;
  std::vector<const char*> templates;  // {A} and {B} mark substituent slots
};

struct Substituent {
  const char* smiles;
  const char* one;    // "a chloro group"
  const char* two;    // "two chloro groups"
  const char* klass;  // "an organochlorine compound", or empty
  bool polar;
};

const std::vector<Core>& cores() {
  static const std::vector<Core> c = {
      {"a member of benzenes", "benzene", true, {"c1c{A}c{B}ccc1", "c1c{A}cc{B}cc1", "c1c{B}ccc{A}c1"}},
      {"a member of pyridines", "pyridine", true, {"n1c{A}c{B}ccc1", "n1cc{A}c{B}cc1", "n1c{A}ccc{B}c1"}},
      {"a member of cyclohexanes", "cyclohexane", false, {"C1C{A}C{B}CCC1", "C1C{A}CC{B}CC1", "C1C{A}CCC{B}C1"}},
      {"a member of thiophenes", "thiophene", true, {"s1c{A}c{B}cc1", "s1c{A}cc{B}c1", "c1c{A}sc{B}c1"}},
      {"a member of furans", "furan", true, {"o1c{A}c{B}cc1", "o1c{A}cc{B}c1", "c1c{A}oc{B}c1"}},
      {"an acyclic compound", "pentane", false, {"CC{A}CC{B}C", "CC{A}C{B}CC", "C{A}CCC{B}C"}},
      {"a member of piperidines", "piperidine", false, {"C1C{A}C{B}CNC1", "C1C{A}CNC{B}C1", "C1CC{A}CC{B}N1"}},
      {"a member of naphthalenes", "naphthalene", true, {"c1c{A}c{B}c2ccccc2c1", "c1c{A}cc2cc{B}ccc2c1"}},
  };
  return c;
}

const std::vector<Substituent>& substituents() {
  static const std::vector<Substituent> s = {
      {"O", "a hydroxy group", "two hydroxy groups", "a hydroxy compound", true},
      {"C(=O)O", "a carboxy group", "two carboxy groups", "a carboxylic acid", true},
      {"N", "an amino group", "two amino groups", "a primary amino compound", true},
      {"Cl", "a chloro group", "two chloro groups", "an organochlorine compound", false},
      {"F", "a fluoro group", "two fluoro groups", "an organofluorine compound", false},
      {"Br", "a bromo group", "two bromo groups", "an organobromine compound", false},
      {"C", "a methyl group", "two methyl groups", "", false},
      {"OC", "a methoxy group", "two methoxy groups", "an ether", false},
      {"[N+](=O)[O-]", "a nitro group", "two nitro groups", "a C-nitro compound", false},
      {"C(=O)N", "a carbamoyl group", "two carbamoyl groups", "a primary carboxamide", true},
      {"C(=O)OC", "a methoxycarbonyl group", "two methoxycarbonyl groups", "a methyl ester", false},
      {"C#N", "a cyano group", "two cyano groups", "a nitrile", false},
      {"C(=O)C", "an acetyl group", "two acetyl groups", "a methyl ketone", false},
      {"C(F)(F)F", "a trifluoromethyl group", "two trifluoromethyl groups", "an organofluorine compound", false},
  };
  return s;
}

constexpr int kNone = -1;

struct Combo {
  std::size_t core;
  int a, b;  // substituent indices or kNone; a <= b after normalization
  bool operator<(const Combo& o) const { return std::tie(core, a, b) < std::tie(o.core, o.a, o.b); }
};

std::string slot(int sub) { return sub == kNone ? "" : "(" + std::string(substituents()[static_cast<std::size_t>(sub)].smiles) + ")"; }

std::string render_smiles(const Combo& c, std::size_t tmpl, bool swap) {
  std::string s = cores()[c.core].templates[tmpl];
  const auto put = [&](const std::string& key, const std::string& value) { s.replace(s.find(key), key.size(), value); };
  put("{A}", slot(swap ? c.b : c.a));
  put("{B}", slot(swap ? c.a : c.b));
  return s;
}

std::string join_and(const std::vector<std::string>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i > 0) out += i + 1 == items.size() ? " and " : ", ";
    out += items[i];
  }
  return out;
}

std::string caption_for(const Combo& c, const std::string& smiles) {
  const Core& core = cores()[c.core];
  const auto& subs = substituents();
  std::string text = "The molecule is " + std::string(core.member);
  std::vector<std::string> classes;
  if (c.a == kNone && c.b == kNone) {
    text += " that is unsubstituted " + std::string(core.parent) + ".";
  } else {
    std::vector<std::string> parts;
    if (c.a != kNone && c.a == c.b) {
      parts.push_back(subs[static_cast<std::size_t>(c.a)].two);
    } else {
      for (int s : {c.a, c.b}) {
        if (s != kNone) parts.push_back(subs[static_cast<std::size_t>(s)].one);
      }
    }
    text += " that is " + std::string(core.parent) + " substituted by " + join_and(parts) + ".";
    for (int s : {c.a, c.b}) {
      if (s == kNone) continue;
      const std::string k = subs[static_cast<std::size_t>(s)].klass;
      if (!k.empty() && std::find(classes.begin(), classes.end(), k) == classes.end()) classes.push_back(k);
    }
  }
  if (!classes.empty()) text += " It is " + join_and(classes) + ".";
  const auto g = parse_smiles(smiles);
  const std::size_t rings = g.num_bonds() + g.num_components() - g.num_atoms();
  text += " It has " + std::to_string(g.num_atoms()) + " heavy atoms and " + std::to_string(rings) +
          (rings == 1 ? " ring." : " rings.");
  if (core.aromatic) text += " It is an aromatic compound.";
  return text;
}

Combo random_combo(Rng& rng, bool allow_empty) {
  const auto pick = [&] {
    const std::size_t r = rng.uniform_index(substituents().size() + (allow_empty ? 2 : 0));
    return r >= substituents().size() ? kNone : static_cast<int>(r);
  };
  Combo c{rng.uniform_index(cores().size()), pick(), pick()};
  if (c.a == kNone && c.b == kNone && !allow_empty) c.a = 0;
  if (c.b < c.a) std::swap(c.a, c.b);
  return c;
}

std::string id_for(const char* prefix, std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s-%04zu", prefix, i + 1);
  return buf;
}

bool polar(const Combo& c) {
  for (int s : {c.a, c.b}) {
    if (s != kNone && substituents()[static_cast<std::size_t>(s)].polar) return true;
  }
  return false;
}

std::uint64_t text_hash(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return mix64(h);
}

}  // namespace

std::vector<ToyMolecule> toy_caption_molecules(std::size_t count, std::uint64_t seed) {
  Rng rng(seed);
  std::set<std::string> seen;
  std::vector<ToyMolecule> out;
  std::size_t attempts = 0;
  while (out.size() < count) {
    if (++attempts > count * 100) throw ConfigError("cannot draw " + std::to_string(count) + " distinct toy molecules");
    const Combo c = random_combo(rng, true);
    const std::size_t tmpl = rng.uniform_index(cores()[c.core].templates.size());
    const std::string smiles = render_smiles(c, tmpl, rng.uniform_index(2) == 1);
    if (!seen.insert(smiles).second) continue;
    out.push_back({id_for("toy", out.size()), smiles, caption_for(c, smiles), !polar(c), 0});
  }
  return out;
}

std::vector<ToyMolecule> toy_property_molecules(std::size_t clusters, double noise, std::uint64_t seed) {
  Rng rng(seed);
  std::set<Combo> used;
  std::vector<ToyMolecule> out;
  std::size_t cluster = 0;
  while (cluster < clusters) {
    const Combo c = random_combo(rng, false);
    if (!used.insert(c).second) continue;
    const bool flipped = rng.uniform01() < noise;
    const bool label = !polar(c) != flipped;
    const std::size_t members = 1 + rng.uniform_index(4);
    for (std::size_t m = 0; m < members; ++m) {
      const std::size_t tmpl = rng.uniform_index(cores()[c.core].templates.size());
      const std::string smiles = render_smiles(c, tmpl, rng.uniform_index(2) == 1);
      out.push_back({id_for("prop", out.size()), smiles, caption_for(c, smiles), label, cluster});
    }
    ++cluster;
  }
  return out;
}

std::vector<float> hashed_text_embedding(std::string_view text, std::size_t dim, bool bigrams) {
  if (dim == 0) throw ConfigError("embedding width must be positive");
  std::vector<float> v(dim, 0.0f);
  const auto toks = tokenize(text);
  const auto add = [&](const std::string& tok) {
    const std::uint64_t h = text_hash(tok);
    v[h % dim] += (h >> 63) ? -1.0f : 1.0f;
  };
  for (std::size_t i = 0; i < toks.size(); ++i) {
    add(toks[i]);
    if (bigrams && i + 1 < toks.size()) add(toks[i] + " " + toks[i + 1]);
  }
  double norm = 0.0;
  for (float x : v) norm += static_cast<double>(x) * x;
  if (norm == 0.0) throw DataError("text hashes to a zero vector: " + std::string(text));
  for (float& x : v) x = static_cast<float>(x / std::sqrt(norm));
  return v;
}

TextEmbeddingIndex toy_caption_embeddings(const std::vector<ToyMolecule>& mols, std::size_t dim, bool bigrams,
                                          std::string provenance) {
  TextEmbeddingIndex index(dim, std::move(provenance));
  for (const auto& m : mols) index.add(m.id, hashed_text_embedding(m.caption, dim, bigrams));
  return index;
}

void write_toy_data(const std::string& dir, std::size_t embedding_dim) {
  std::filesystem::create_directories(dir);
  const auto mols = toy_caption_molecules();
  std::string captions;
  for (const auto& m : mols) {
    nlohmann::ordered_json j;
    j["id"] = m.id;
    j["smiles"] = m.smiles;
    j["caption"] = m.caption;
    captions += j.dump() + "\n";
  }
  io::write_file_atomic(dir + "/captions.jsonl", captions);
  write_embedding_file(dir + "/scibert.gemb", toy_caption_embeddings(mols, embedding_dim, true, "scibert"));
  write_embedding_file(dir + "/bert.gemb", toy_caption_embeddings(mols, embedding_dim, false, "bert"));
  std::string property;
  for (const auto& m : toy_property_molecules()) {
    nlohmann::ordered_json j;
    j["id"] = m.id;
    j["smiles"] = m.smiles;
    j["label"] = m.label ? 1 : 0;
    j["cluster"] = m.cluster;
    property += j.dump() + "\n";
  }
  io::write_file_atomic(dir + "/property.jsonl", property);
}

}  // namespace gamic
