// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit when any
// criterion fails. Runs offline against the bundled toy data.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include "fingerprint_oracle.h"
#include "gamic/binary_io.h"
#include "gamic/encoder.h"
#include "gamic/experiment.h"
#include "gamic/fingerprint.h"
#include "gamic/metrics.h"
#include "gamic/retrieval.h"
#include "gamic/rng.h"
#include "gamic/toydata.h"
#include "gamic/trainer.h"
#include "mmr_oracle.h"
#include "test_support.h"

using namespace gamic;

namespace {

const std::string kSource = GAMIC_SOURCE_DIR;

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void criterion(const std::string& name, const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("threw: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (!o.pass) ++failures;
  std::printf("%s  %-26s %6.2f s  %s\n", o.pass ? "PASS" : "FAIL", name.c_str(), secs, o.detail.c_str());
  std::fflush(stdout);
}

std::string fmt(const char* pattern, double v) {
  char buf[96];
  std::snprintf(buf, sizeof buf, pattern, v);
  return buf;
}

std::vector<double> random_unit(Rng& rng, std::size_t d) {
  std::vector<double> v(d);
  double n = 0.0;
  for (double& x : v) {
    x = rng.uniform(-1.0, 1.0);
    n += x * x;
  }
  for (double& x : v) x /= std::sqrt(n);
  return v;
}

ExperimentConfig caption_config(const std::string& out) {
  auto cfg = load_experiment_config(kSource + "/configs/toy_caption.json");
  cfg.output_dir = out;
  return cfg;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Outcome fingerprint_oracle() {
  const auto t0 = std::chrono::steady_clock::now();
  auto mols = toy_caption_molecules();
  Rng rng(101);
  rng.shuffle(std::span<ToyMolecule>(mols));
  mols.resize(100);
  std::vector<FingerprintVector> fps;
  std::vector<std::set<std::size_t>> bits;
  std::size_t bit_mismatch = 0;
  for (const auto& m : mols) {
    const auto g = parse_smiles(m.smiles);
    fps.push_back(morgan_fingerprint(g, 2, 2048));
    bits.push_back(testing::oracle_on_bits(g, 2, 2048));
    const auto got = fps.back().on_bits();
    if (std::set<std::size_t>(got.begin(), got.end()) != bits.back()) ++bit_mismatch;
  }
  std::size_t tani_mismatch = 0;
  for (std::size_t i = 0; i < fps.size(); ++i) {
    for (std::size_t j = 0; j < fps.size(); ++j) {
      std::size_t inter = 0;
      for (auto b : bits[i]) inter += bits[j].count(b);
      const std::size_t uni = bits[i].size() + bits[j].size() - inter;
      const double expect = uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
      if (tanimoto(fps[i], fps[j]) != expect) ++tani_mismatch;
    }
  }
  const double secs = seconds_since(t0);
  return {bit_mismatch == 0 && tani_mismatch == 0 && secs < 5.0,
          std::to_string(bit_mismatch) + " on-bit and " + std::to_string(tani_mismatch) +
              " tanimoto mismatches over 100 molecules, " + fmt("%.2f s (limit 5 s)", secs)};
}

Outcome gradient_check() {
  const auto t0 = std::chrono::steady_clock::now();
  auto mols = toy_caption_molecules();
  Rng rng(202);
  rng.shuffle(std::span<ToyMolecule>(mols));
  EncoderConfig enc;
  enc.hidden_dim = 8;
  enc.heads_layer1 = 2;
  enc.out_dim = 6;
  double worst = 0.0;
  bool ok = true;
  for (std::size_t i = 0; i < 3; ++i) {
    enc.seed = 300 + i;
    GradCheckOptions opts;
    opts.tolerance = 1e-4;
    const auto rep = encoder_nce_gradcheck(parse_smiles(mols[i].smiles), enc, 2, 4, 0.1, 400 + i, opts);
    worst = std::max(worst, rep.max_rel_error());
    ok = ok && rep.pass();
  }
  const double secs = seconds_since(t0);
  return {ok && secs < 30.0, "3 molecules, max relative error " + fmt("%.2e", worst) + " (limit 1e-4), " +
                                 fmt("%.2f s (limit 30 s)", secs)};
}

Outcome permutation_invariance() {
  EncoderConfig enc;
  enc.hidden_dim = 32;
  enc.heads_layer1 = 4;
  enc.out_dim = 64;
  enc.seed = 5;
  const auto params = init_encoder_params(enc);
  const auto g = parse_smiles("CC(=O)Nc1ccc(OC)c(Cl)c1");
  const auto base = encode(g, params, enc);
  Rng rng(55);
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<int> perm(g.num_atoms());
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(std::span<int>(perm));
    const auto z = encode(permute_atoms(g, perm), params, enc);
    for (std::size_t k = 0; k < z.size(); ++k) worst = std::max(worst, std::abs(z[k] - base[k]));
  }
  return {worst < 1e-9, "50 relabelings, max coordinate difference " + fmt("%.2e", worst) + " (limit 1e-9)"};
}

Outcome nce_closed_forms() {
  const std::vector<double> z = {1.0, 0.0};
  const std::vector<double> y = {std::sqrt(0.5), std::sqrt(0.5)};
  double worst_uniform = 0.0;
  for (std::size_t k : {1U, 7U}) {
    const double loss = nce_loss({z}, {{y}}, {std::vector<std::vector<double>>(k, y)}, 0.1);
    worst_uniform = std::max(worst_uniform, std::abs(loss - std::log(static_cast<double>(k + 1))));
  }
  const std::vector<double> neg = {-1.0, 0.0};
  const double sep = nce_loss({z}, {{z}}, {std::vector<std::vector<double>>(7, neg)}, 0.1);
  return {worst_uniform < 1e-12 && sep < 1e-6 && sep >= 0.0,
          "|loss - ln(K+1)| " + fmt("%.1e", worst_uniform) + " (limit 1e-12), separated loss " + fmt("%.1e", sep) +
              " (limit 1e-6)"};
}

DemonstrationPool embedding_pool(const std::vector<std::vector<double>>& vecs, const std::vector<std::string>& ids) {
  DemonstrationPool pool("gamic", MorganConfig{2, 512});
  for (std::size_t i = 0; i < vecs.size(); ++i) {
    pool.add(PoolEntry{ids[i], "C", "x", FingerprintVector(2, 512), std::vector<float>(vecs[i].begin(), vecs[i].end())});
  }
  return pool;
}

Outcome mmr_oracle() {
  Rng rng(77);
  std::size_t cases = 0, mismatches = 0;
  for (std::size_t n = 1; n <= 12; ++n) {
    for (int trial = 0; trial < 10; ++trial) {
      std::vector<std::vector<double>> vecs;
      std::vector<std::string> ids;
      for (std::size_t i = 0; i < n; ++i) {
        const auto v = random_unit(rng, 4);
        vecs.emplace_back(v.begin(), v.end());
        for (double& x : vecs.back()) x = static_cast<float>(x);
        ids.push_back("p" + std::to_string(rng.uniform_index(10000)) + "_" + std::to_string(i));
      }
      const auto pool = embedding_pool(vecs, ids);
      const auto q = random_unit(rng, 4);
      for (std::size_t k = 1; k <= std::min<std::size_t>(3, n); ++k) {
        for (double lambda : {0.0, 0.3, 0.9}) {
          ++cases;
          if (select_mmr(q, pool, MMRConfig{k, lambda}) != testing::oracle_mmr(q, vecs, ids, k, lambda)) ++mismatches;
        }
      }
    }
  }
  std::size_t topk_mismatch = 0;
  std::vector<std::vector<double>> vecs;
  std::vector<std::string> ids;
  for (int i = 0; i < 30; ++i) {
    vecs.push_back(random_unit(rng, 8));
    ids.push_back("e" + std::to_string(i));
  }
  const auto pool = embedding_pool(vecs, ids);
  for (int q = 0; q < 100; ++q) {
    const auto query = random_unit(rng, 8);
    if (select_mmr(query, pool, MMRConfig{5, 0.0}) !=
        select_topk({FingerprintVector(2, 512), query}, pool, 5, Strategy::Embedding)) {
      ++topk_mismatch;
    }
  }
  return {mismatches == 0 && topk_mismatch == 0,
          std::to_string(mismatches) + "/" + std::to_string(cases) + " oracle mismatches, " +
              std::to_string(topk_mismatch) + "/100 lambda=0 vs top-k mismatches"};
}

std::string caption_run_dir;

Outcome trend() {
  const std::string root = testing::scratch_dir("accept_trend");
  std::map<std::string, double> bleu2;
  for (const char* s : {"random", "scaffold", "gamic"}) {
    auto cfg = caption_config(root + "/" + s);
    cfg.strategy = parse_retrieval_strategy(s);
    if (cfg.repeats != 5) return {false, "config does not ask for 5 repeats"};
    bleu2[s] = run_experiment(cfg).at("bleu2").mean;
  }
  caption_run_dir = root + "/gamic";
  const bool ok = bleu2["gamic"] >= bleu2["random"] + 0.05 && bleu2["scaffold"] > bleu2["random"];
  return {ok, "BLEU-2 random " + fmt("%.4f", bleu2["random"]) + ", scaffold " + fmt("%.4f", bleu2["scaffold"]) +
                  ", gamic " + fmt("%.4f", bleu2["gamic"]) + " (need gamic >= random + 0.05, scaffold > random)"};
}

Outcome mmr_ablation() {
  if (caption_run_dir.empty()) return {false, "needs the trained caption encoder from the trend criterion"};
  const std::string root = testing::scratch_dir("accept_mmr");
  auto cfg = load_experiment_config(kSource + "/configs/toy_property.json");
  cfg.checkpoint = caption_run_dir + "/encoder.gckp";
  double f1[2];
  for (int on = 0; on < 2; ++on) {
    cfg.mmr = on == 1;
    cfg.output_dir = root + (on ? "/mmr" : "/no_mmr");
    f1[on] = run_experiment(cfg).at("f1").mean;
  }
  return {f1[1] >= f1[0], "F1 with MMR " + fmt("%.4f", f1[1]) + ", without " + fmt("%.4f", f1[0])};
}

Outcome k_sensitivity() {
  const auto rows = sweep_k(caption_config(testing::scratch_dir("accept_sweep_k")));
  std::map<std::size_t, double> score;
  for (const auto& r : rows) score[static_cast<std::size_t>(r.value)] = r.report.at("bleu2").mean;
  double lowest = 1.0;
  for (const auto& [k, v] : score) lowest = std::min(lowest, v);
  const bool floor_ok = score[0] <= lowest && score[0] <= 0.5 * score[3];
  const bool plateau = score[5] - score[3] <= 0.02;
  std::string detail = "BLEU-2 by k:";
  for (const auto& [k, v] : score) detail += " " + std::to_string(k) + "=" + fmt("%.4f", v);
  return {floor_ok && plateau, detail + " (need k=0 lowest and <= half of k=3; k=5 - k=3 <= 0.02)"};
}

Outcome metric_spot_checks() {
  const double b = bleu(tokenize("the cat sat"), tokenize("the cat sat down"), 2);
  const double r = rouge(tokenize("a b c"), tokenize("a c b"), RougeVariant::L);
  const double m = meteor_lite(tokenize("cats sitting"), tokenize("cat sat"));
  const double f = f1_binary({Label::Negative, Label::Negative}, {false, false}).f1;
  const double all_neg = f1_binary({Label::Negative, Label::Negative, Label::Negative}, {true, false, true}).f1;
  const double half = f1_binary({Label::Positive, Label::Positive, Label::Negative}, {true, false, true}).f1;
  const bool ok = std::abs(b - 0.7165) < 1e-4 && std::abs(r - 2.0 / 3.0) < 1e-4 && std::abs(m - 0.25) < 1e-4 &&
                  f == 0.0 && all_neg == 0.0 && std::abs(half - 0.5) < 1e-12;
  return {ok, "BLEU-2 " + fmt("%.6f", b) + ", ROUGE-L " + fmt("%.6f", r) + ", METEOR-lite " + fmt("%.6f", m) +
                  ", F1 no positives " + fmt("%g", f) + ", all-negative " + fmt("%g", all_neg) + ", TP=FP=FN=1 " +
                  fmt("%g", half)};
}

Outcome determinism() {
  const std::string root = testing::scratch_dir("accept_determinism");
  for (const char* run : {"a", "b"}) run_experiment(caption_config(root + "/" + run));
  std::size_t compared = 0;
  std::vector<std::string> differing;
  for (const auto& entry : std::filesystem::directory_iterator(root + "/a")) {
    const auto name = entry.path().filename().string();
    if (name == "manifest.json") continue;  // records the output directory
    ++compared;
    if (io::read_file(entry.path().string()) != io::read_file(root + "/b/" + name)) differing.push_back(name);
  }
  std::string detail = std::to_string(compared) + " files compared";
  for (const auto& d : differing) detail += ", differs: " + d;
  return {differing.empty() && compared > 0, detail};
}

}  // namespace

int main() {
  criterion("fingerprint_oracle", fingerprint_oracle);
  criterion("gradient_check", gradient_check);
  criterion("permutation_invariance", permutation_invariance);
  criterion("nce_closed_forms", nce_closed_forms);
  criterion("mmr_oracle", mmr_oracle);
  criterion("retrieval_trend", trend);
  criterion("mmr_ablation_trend", mmr_ablation);
  criterion("k_sensitivity_shape", k_sensitivity);
  criterion("metric_spot_checks", metric_spot_checks);
  criterion("determinism", determinism);
  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
