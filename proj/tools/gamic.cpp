#include <CLI11.hpp>
#include <cstdio>
#include <iostream>
#include <json.hpp>

#include "gamic/binary_io.h"
#include "gamic/errors.h"
#include "gamic/experiment.h"
#include "gamic/fingerprint.h"
#include "gamic/molgraph.h"
#include "gamic/rng.h"
#include "gamic/toydata.h"

using namespace gamic;

namespace {

void log_line(const std::string& msg) { std::cerr << msg << "\n"; }

ExperimentConfig load_config(const std::string& path, const std::string& output_dir) {
  ExperimentConfig cfg = load_experiment_config(path);
  if (!output_dir.empty()) cfg.output_dir = output_dir;
  return cfg;
}

void print_report(const ScoreReport& report) {
  for (const auto& [name, m] : report.metrics()) {
    std::printf("%-8s mean %.4f  std %.4f\n", name.c_str(), m.mean, m.std);
  }
}

int cmd_parse(const std::vector<std::string>& smiles) {
  for (const auto& s : smiles) {
    const auto g = parse_smiles(parseable_smiles(s));
    nlohmann::ordered_json j;
    j["smiles"] = s;
    j["atoms"] = nlohmann::json::array();
    for (const auto& a : g.atoms) {
      j["atoms"].push_back({{"element", a.element},
                            {"aromatic", a.aromatic},
                            {"charge", a.formal_charge},
                            {"hydrogens", a.total_h()},
                            {"degree", a.degree},
                            {"in_ring", a.in_ring}});
    }
    j["bonds"] = nlohmann::json::array();
    for (const auto& b : g.bonds) j["bonds"].push_back({b.begin, b.end, bond_order_code(b.order)});
    j["components"] = g.num_components();
    std::cout << j.dump() << "\n";
  }
  return 0;
}

int cmd_fp(const std::vector<std::string>& smiles, const MorganConfig& mc, bool tanimoto_only) {
  std::vector<FingerprintVector> fps;
  for (const auto& s : smiles) fps.push_back(morgan_fingerprint(parse_smiles(parseable_smiles(s)), mc));
  if (tanimoto_only) {
    if (fps.size() != 2) throw ConfigError("--tanimoto needs exactly two SMILES");
    std::printf("%.6f\n", tanimoto(fps[0], fps[1]));
    return 0;
  }
  for (std::size_t i = 0; i < fps.size(); ++i) {
    std::cout << smiles[i] << "\t" << fps[i].popcount() << "\t";
    bool first = true;
    for (auto bit : fps[i].on_bits()) {
      std::cout << (first ? "" : ",") << bit;
      first = false;
    }
    std::cout << "\n";
  }
  return 0;
}

int cmd_retrieve(const std::string& index_path, const std::string& smiles, const std::string& strategy, std::size_t k,
                 bool mmr, double lambda, const std::string& checkpoint, const std::string& task_name, bool as_prompt) {
  const auto pool = read_pool(index_path);
  const auto g = parse_smiles(parseable_smiles(smiles));
  RetrievalQuery q{morgan_fingerprint(g, pool.fingerprint_config()), {}};
  const Strategy s = parse_strategy(strategy);
  if (s == Strategy::Embedding) {
    if (checkpoint.empty()) throw ConfigError("embedding retrieval needs --checkpoint to embed the query");
    EncoderConfig enc;
    const auto params = load_encoder(checkpoint, enc);
    q.embedding = pool.strategy() == "gae" ? encode_pooled(g, params, enc) : encode(g, params, enc);
  }
  std::vector<std::size_t> picks;
  if (k > 0) picks = s == Strategy::Embedding && mmr ? select_mmr(q.embedding, pool, MMRConfig{k, lambda}) : select_topk(q, pool, k, s);
  if (!as_prompt) {
    for (auto i : picks) std::cout << pool[i].id << "\t" << pool[i].smiles << "\t" << pool[i].payload << "\n";
    return 0;
  }
  const Task task = parse_task(task_name);
  std::vector<Demonstration> demos;
  for (auto i : picks) {
    demos.push_back({pool[i].smiles, is_classification(task) ? render_label(task, pool[i].payload == "1") : pool[i].payload});
  }
  std::cout << build_prompt(task, demos, smiles).rendered << "\n";
  return 0;
}

int cmd_gradcheck(std::size_t molecules, std::uint64_t seed, double tolerance) {
  const auto mols = toy_caption_molecules(molecules, seed);
  EncoderConfig enc;
  enc.hidden_dim = 8;
  enc.heads_layer1 = 2;
  enc.out_dim = 6;
  bool ok = true;
  for (std::size_t i = 0; i < mols.size(); ++i) {
    enc.seed = derive_seed(seed, i);
    GradCheckOptions opts;
    opts.tolerance = tolerance;
    const auto rep = encoder_nce_gradcheck(parse_smiles(mols[i].smiles), enc, 2, 4, 0.1, derive_seed(seed, i, 1), opts);
    std::printf("%-40s max relative error %.3e  %s\n", mols[i].smiles.c_str(), rep.max_rel_error(),
                rep.pass() ? "ok" : "FAIL");
    ok = ok && rep.pass();
  }
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Graph-aligned demonstration retrieval for molecular in-context learning"};
  app.require_subcommand(1);

  std::vector<std::string> smiles;
  auto* parse = app.add_subcommand("parse", "Parse SMILES and print the molecular graph as JSON");
  parse->add_option("smiles", smiles, "SMILES strings")->required();

  MorganConfig mc;
  bool tanimoto_only = false;
  auto* fp = app.add_subcommand("fp", "Morgan fingerprint on-bits, or the tanimoto of two molecules");
  fp->add_option("smiles", smiles, "SMILES strings")->required();
  fp->add_option("--radius", mc.radius, "Morgan radius")->capture_default_str();
  fp->add_option("--nbits", mc.nbits, "Fingerprint width (multiple of 64)")->capture_default_str();
  fp->add_flag("--tanimoto", tanimoto_only, "Print the tanimoto similarity of two SMILES");

  std::string config, output_dir;
  auto add_config = [&](CLI::App* sub) {
    sub->add_option("-c,--config", config, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
    sub->add_option("-o,--output-dir", output_dir, "Override the config's output_dir");
  };
  auto* train_cmd = app.add_subcommand("train", "Train the encoder the config's strategy needs");
  add_config(train_cmd);
  std::string index_out;
  auto* build = app.add_subcommand("build-index", "Build the demonstration pool index from the training split");
  add_config(build);
  build->add_option("--out", index_out, "Index file to write")->required();

  std::string index_path, query, strategy = "scaffold", checkpoint, task = "caption";
  std::size_t k = 2;
  bool mmr = false;
  double lambda = 0.3;
  auto add_retrieval = [&](CLI::App* sub) {
    sub->add_option("--index", index_path, "Pool index file")->required()->check(CLI::ExistingFile);
    sub->add_option("--smiles", query, "Query SMILES")->required();
    sub->add_option("--strategy", strategy, "random | scaffold | embedding")->capture_default_str();
    sub->add_option("-k", k, "Demonstrations")->capture_default_str();
    sub->add_flag("--mmr", mmr, "Diverse selection (embedding strategy)");
    sub->add_option("--lambda", lambda, "Diversity weight")->capture_default_str();
    sub->add_option("--checkpoint", checkpoint, "Encoder checkpoint for embedding retrieval");
  };
  auto* retrieve = app.add_subcommand("retrieve", "Select demonstrations for one query molecule");
  add_retrieval(retrieve);
  auto* prompt = app.add_subcommand("prompt", "Render the prompt for one query molecule");
  add_retrieval(prompt);
  prompt->add_option("--task", task, "caption | property | yield")->capture_default_str();

  auto* run = app.add_subcommand("run", "Run an experiment and write its report");
  add_config(run);
  std::vector<std::size_t> ks = kSweepK;
  auto* sweepk = app.add_subcommand("sweep-k", "Evaluate several demonstration counts");
  add_config(sweepk);
  sweepk->add_option("--ks", ks, "Values of k")->delimiter(',');
  std::vector<double> lambdas = kSweepLambda;
  auto* sweepl = app.add_subcommand("sweep-lambda", "Evaluate several MMR diversity weights");
  add_config(sweepl);
  sweepl->add_option("--lambdas", lambdas, "Values of lambda")->delimiter(',');
  std::vector<std::string> variants = kAblationVariants;
  auto* ablate = app.add_subcommand("ablate", "Train and evaluate the ablation variants");
  add_config(ablate);
  ablate->add_option("--variants", variants, "Variants to run")->delimiter(',');

  std::size_t molecules = 3;
  std::uint64_t seed = 1;
  double tolerance = 1e-4;
  auto* grad = app.add_subcommand("gradcheck", "Finite-difference check of encoder + NCE gradients");
  grad->add_option("--molecules", molecules, "Molecules to check")->capture_default_str();
  grad->add_option("--seed", seed, "Seed")->capture_default_str();
  grad->add_option("--tolerance", tolerance, "Max relative error")->capture_default_str();

  std::string toy_out = "data/toy";
  auto* toy = app.add_subcommand("toy-data", "Write the bundled toy dataset");
  toy->add_option("--out", toy_out, "Directory")->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*parse) return cmd_parse(smiles);
    if (*fp) return cmd_fp(smiles, mc, tanimoto_only);
    if (*train_cmd) {
      auto cfg = load_config(config, output_dir);
      if (!cfg.needs_encoder()) throw ConfigError("strategy " + std::string(retrieval_strategy_name(cfg.strategy)) + " has no encoder to train");
      cfg.checkpoint.clear();
      const auto prep = prepare_experiment(cfg, log_line);
      io::write_file_atomic(cfg.output_dir + "/loss_curve.csv",
                            loss_curve_csv(prep.training->curve, cfg.strategy == RetrievalStrategy::Gae ? "neg_recon_loss" : "separation"));
      save_encoder(cfg.output_dir + "/encoder.gckp", prep.training->params, prep.training->encoder);
      std::cout << cfg.output_dir << "/encoder.gckp\n";
      return 0;
    }
    if (*build) {
      const auto prep = prepare_experiment(load_config(config, output_dir), log_line);
      write_pool(index_out, prep.pool);
      std::cout << index_out << ": " << prep.pool.size() << " entries\n";
      return 0;
    }
    if (*retrieve) return cmd_retrieve(index_path, query, strategy, k, mmr, lambda, checkpoint, task, false);
    if (*prompt) return cmd_retrieve(index_path, query, strategy, k, mmr, lambda, checkpoint, task, true);
    if (*run) {
      print_report(run_experiment(load_config(config, output_dir), log_line));
      return 0;
    }
    if (*sweepk) {
      const auto cfg = load_config(config, output_dir);
      std::cout << sweep_table_csv("k", sweep_k(cfg, ks, log_line));
      return 0;
    }
    if (*sweepl) {
      const auto cfg = load_config(config, output_dir);
      std::cout << sweep_table_csv("lambda", sweep_lambda(cfg, lambdas, log_line));
      return 0;
    }
    if (*ablate) {
      for (const auto& row : run_ablation(load_config(config, output_dir), variants, log_line)) {
        std::cout << row.variant << "\n";
        print_report(row.report);
      }
      return 0;
    }
    if (*grad) return cmd_gradcheck(molecules, seed, tolerance);
    if (*toy) {
      write_toy_data(toy_out);
      std::cout << "wrote " << toy_out << "\n";
      return 0;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
