#pragma once

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "gamic/dataset.h"
#include "gamic/encoder.h"
#include "gamic/metrics.h"
#include "gamic/promptllm.h"
#include "gamic/retrieval.h"
#include "gamic/trainer.h"

namespace gamic {

struct BackendConfig {
  std::string kind = "mock";  // mock | http | replay
  ChatConfig chat;
  std::string replay_path;
  std::size_t max_in_flight = 4;
};

/// Demonstration selection: random draw, Morgan tanimoto ("scaffold"), or
/// graph embeddings from a GAE-trained or contrastively trained encoder.
enum class RetrievalStrategy { Random, Scaffold, Gae, Gamic };
RetrievalStrategy parse_retrieval_strategy(std::string_view name);
std::string_view retrieval_strategy_name(RetrievalStrategy s);

struct ExperimentConfig {
  Task task = Task::Caption;
  std::string dataset;
  std::size_t split = 0;  // index into split_seeds; ignored when the dataset carries split tags
  std::vector<std::uint64_t> split_seeds{kSplitSeeds.begin(), kSplitSeeds.end()};
  RetrievalStrategy strategy = RetrievalStrategy::Gamic;
  std::optional<std::size_t> k;  // unset: 2 for captions, 3 otherwise
  double lambda = 0.3;
  Aggregation aggregation = Aggregation::Min;
  bool mmr = true;
  std::size_t repeats = 5;
  std::uint64_t seed = 0;
  std::string output_dir = "runs/default";
  std::map<std::string, std::string> embeddings;  // provenance -> embedding file
  std::string embedding_provenance = "scibert";
  std::string checkpoint;  // pre-trained encoder; empty trains one for gae/gamic
  MorganConfig fingerprint;
  EncoderConfig encoder;   // out_dim follows the caption embedding width
  TrainConfig train;
  BackendConfig backend;
  std::size_t threads = 0;  // 0: hardware concurrency
  bool dump_per_example = false;

  std::size_t effective_k() const;
  bool needs_encoder() const;
  void validate() const;
};

using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;
EnvLookup process_env();

/// Replaces every ${NAME} with the variable's value. ConfigError when a
/// variable is unset or a reference is unterminated.
std::string interpolate_env(std::string_view text, const EnvLookup& env);

/// JSON config; string values are interpolated first, relative paths resolve
/// against `base_dir`. Unknown keys raise ConfigError.
ExperimentConfig parse_experiment_config(std::string_view json, const std::string& base_dir = {},
                                         const EnvLookup& env = process_env());
ExperimentConfig load_experiment_config(const std::string& path, const EnvLookup& env = process_env());
std::string config_to_json(const ExperimentConfig& cfg);

using Logger = std::function<void(const std::string&)>;

struct TestItem {
  std::string id;
  std::string smiles;
  std::string reference;  // caption, or "1"/"0"
  bool label = false;
  RetrievalQuery query;
};

struct PreparedExperiment {
  ExperimentConfig cfg;
  Dataset dataset;
  Split split;
  DemonstrationPool pool;  // training split
  std::vector<TestItem> test;
  std::optional<TrainResult> training;  // set when an encoder was trained here
  std::optional<EncoderConfig> encoder;
  ParamStore params;
};

/// Ingests and splits the data, trains or loads the encoder the strategy
/// needs, and embeds pool and test molecules.
PreparedExperiment prepare_experiment(const ExperimentConfig& cfg, const Logger& log = {});

struct EvalSettings {
  std::size_t k = 2;
  double lambda = 0.3;
  bool mmr = true;
  Aggregation aggregation = Aggregation::Min;
  std::size_t repeats = 5;
  std::uint64_t seed = 0;
};
EvalSettings eval_settings(const ExperimentConfig& cfg);

/// Pool indices for one test item, most relevant first.
std::vector<std::size_t> retrieve_for(const PreparedExperiment& prep, const EvalSettings& s, std::size_t item,
                                      std::size_t repeat);

struct RepeatResult {
  std::vector<PromptBundle> prompts;
  std::vector<std::string> completions;
  std::map<std::string, double> scores;
  std::vector<std::map<std::string, double>> per_example;  // captions only
};

RepeatResult run_repeat(const PreparedExperiment& prep, const EvalSettings& s, std::size_t repeat, LlmBackend& backend);

std::unique_ptr<LlmBackend> make_backend(const BackendConfig& cfg);

/// Runs every repeat and, when `out_dir` is non-empty, writes report.csv,
/// report.json and per-repeat prompts/completions there.
ScoreReport evaluate(const PreparedExperiment& prep, const EvalSettings& s, LlmBackend& backend,
                     const std::string& out_dir = {}, const Logger& log = {});

/// prepare_experiment + evaluate into cfg.output_dir, plus the trained
/// encoder, its loss curve and manifest.json. On failure the manifest
/// records the error and the repeats that completed before the error is
/// rethrown.
ScoreReport run_experiment(const ExperimentConfig& cfg, const Logger& log = {});

struct SweepRow {
  double value = 0.0;
  ScoreReport report;
};

inline const std::vector<std::size_t> kSweepK = {0, 1, 2, 3, 4, 5, 10};
inline const std::vector<double> kSweepLambda = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};

/// One shared preparation, then one evaluation per value under
/// <output_dir>/k_<k> (or lambda_<l>), and sweep_k.csv / sweep_lambda.csv.
std::vector<SweepRow> sweep_k(const ExperimentConfig& cfg, const std::vector<std::size_t>& ks = kSweepK,
                              const Logger& log = {});
std::vector<SweepRow> sweep_lambda(const ExperimentConfig& cfg, const std::vector<double>& lambdas = kSweepLambda,
                                   const Logger& log = {});
std::string sweep_table_csv(const std::string& parameter, const std::vector<SweepRow>& rows);

inline const std::vector<std::string> kAblationVariants = {"wo_morgan_bert", "gamic_bert", "wo_morgan", "full"};

/// The variant's config: Morgan-sampled positives on or off, scibert or bert
/// caption embeddings, always the contrastive encoder.
ExperimentConfig ablation_config(const ExperimentConfig& base, const std::string& variant);

struct AblationRow {
  std::string variant;
  ScoreReport report;
};

/// Trains and evaluates each variant under <output_dir>/<variant> and
/// writes ablation.csv. ConfigError when a variant's embedding file is not
/// configured or does not exist.
std::vector<AblationRow> run_ablation(const ExperimentConfig& cfg,
                                      const std::vector<std::string>& variants = kAblationVariants,
                                      const Logger& log = {});

}  // namespace gamic
