#include "gamic/experiment.h"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <json.hpp>
#include <mutex>
#include <set>
#include <thread>

#include "gamic/binary_io.h"
#include "gamic/errors.h"
#include "gamic/rng.h"

namespace gamic {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

RetrievalStrategy parse_retrieval_strategy(std::string_view name) {
  if (name == "random") return RetrievalStrategy::Random;
  if (name == "scaffold") return RetrievalStrategy::Scaffold;
  if (name == "gae") return RetrievalStrategy::Gae;
  if (name == "gamic") return RetrievalStrategy::Gamic;
  throw ConfigError("unknown strategy '" + std::string(name) + "' (random, scaffold, gae, gamic)");
}

std::string_view retrieval_strategy_name(RetrievalStrategy s) {
  switch (s) {
    case RetrievalStrategy::Random: return "random";
    case RetrievalStrategy::Scaffold: return "scaffold";
    case RetrievalStrategy::Gae: return "gae";
    case RetrievalStrategy::Gamic: return "gamic";
  }
  return "?";
}

std::size_t ExperimentConfig::effective_k() const { return k ? *k : (task == Task::Caption ? 2 : 3); }

bool ExperimentConfig::needs_encoder() const {
  return strategy == RetrievalStrategy::Gae || strategy == RetrievalStrategy::Gamic;
}

void ExperimentConfig::validate() const {
  if (dataset.empty()) throw ConfigError("config needs a dataset path");
  if (split_seeds.empty()) throw ConfigError("split_seeds is empty");
  if (split >= split_seeds.size()) {
    throw ConfigError("split " + std::to_string(split) + " out of range for " + std::to_string(split_seeds.size()) +
                      " split seeds");
  }
  if (repeats < 1) throw ConfigError("repeats must be >= 1");
  if (output_dir.empty()) throw ConfigError("output_dir is empty");
  MMRConfig{std::max<std::size_t>(effective_k(), 1), lambda, aggregation}.validate();
  if (strategy == RetrievalStrategy::Gamic && checkpoint.empty() && !embeddings.count(embedding_provenance)) {
    throw ConfigError("no embedding file configured for provenance '" + embedding_provenance + "'");
  }
  train.validate();
  if (backend.kind != "mock" && backend.kind != "http" && backend.kind != "replay") {
    throw ConfigError("unknown backend '" + backend.kind + "' (mock, http, replay)");
  }
  if (backend.kind == "http" && (backend.chat.http.url.empty() || backend.chat.model.empty())) {
    throw ConfigError("http backend needs url and model");
  }
  if (backend.kind == "replay" && backend.replay_path.empty()) throw ConfigError("replay backend needs a path");
}

EnvLookup process_env() {
  return [](const std::string& name) -> std::optional<std::string> {
    const char* v = std::getenv(name.c_str());
    return v ? std::optional<std::string>(v) : std::nullopt;
  };
}

std::string interpolate_env(std::string_view text, const EnvLookup& env) {
  std::string out;
  std::size_t i = 0;
  while (i < text.size()) {
    const std::size_t start = text.find("${", i);
    if (start == std::string_view::npos) {
      out.append(text.substr(i));
      break;
    }
    out.append(text.substr(i, start - i));
    const std::size_t end = text.find('}', start + 2);
    if (end == std::string_view::npos) throw ConfigError("unterminated ${ in '" + std::string(text) + "'");
    const std::string name(text.substr(start + 2, end - start - 2));
    if (name.empty()) throw ConfigError("empty ${} reference");
    const auto value = env(name);
    if (!value) throw ConfigError("environment variable " + name + " is not set");
    out += *value;
    i = end + 1;
  }
  return out;
}

namespace {

void interpolate_tree(json& j, const EnvLookup& env) {
  if (j.is_string()) {
    j = interpolate_env(j.get<std::string>(), env);
  } else if (j.is_structured()) {
    for (auto& child : j) interpolate_tree(child, env);
  }
}

void check_keys(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return it.key() == a; })) {
      throw ConfigError("unknown key '" + it.key() + "' in " + where);
    }
  }
}

template <class T>
void read(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad value for '") + key + "': " + e.what());
  }
}

std::string resolve(const std::string& base, const std::string& p) {
  if (p.empty() || base.empty() || fs::path(p).is_absolute()) return p;
  return (fs::path(base) / p).lexically_normal().string();
}

}  // namespace

namespace {

ExperimentConfig parse_config_impl(std::string_view text, const std::string& base_dir, const EnvLookup& env) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  interpolate_tree(j, env);
  check_keys(j, "config",
             {"task", "dataset", "split", "split_seeds", "strategy", "k", "lambda", "aggregation", "mmr", "repeats", "seed",
              "output_dir", "embeddings", "embedding_provenance", "checkpoint", "fingerprint", "encoder", "train",
              "backend", "threads", "dump_per_example"});
  ExperimentConfig c;
  if (j.contains("task")) c.task = parse_task(j["task"].get<std::string>());
  read(j, "dataset", c.dataset);
  read(j, "split", c.split);
  read(j, "split_seeds", c.split_seeds);
  if (j.contains("strategy")) c.strategy = parse_retrieval_strategy(j["strategy"].get<std::string>());
  if (j.contains("k") && !j["k"].is_null()) c.k = j["k"].get<std::size_t>();
  read(j, "lambda", c.lambda);
  if (j.contains("aggregation")) {
    const auto a = j["aggregation"].get<std::string>();
    if (a != "min" && a != "sum") throw ConfigError("aggregation must be min or sum");
    c.aggregation = a == "sum" ? Aggregation::Sum : Aggregation::Min;
  }
  read(j, "mmr", c.mmr);
  read(j, "repeats", c.repeats);
  read(j, "seed", c.seed);
  read(j, "output_dir", c.output_dir);
  read(j, "embeddings", c.embeddings);
  read(j, "embedding_provenance", c.embedding_provenance);
  read(j, "checkpoint", c.checkpoint);
  read(j, "threads", c.threads);
  read(j, "dump_per_example", c.dump_per_example);
  if (j.contains("fingerprint")) {
    const auto& f = j["fingerprint"];
    check_keys(f, "fingerprint", {"radius", "nbits"});
    read(f, "radius", c.fingerprint.radius);
    read(f, "nbits", c.fingerprint.nbits);
  }
  if (j.contains("encoder")) {
    const auto& e = j["encoder"];
    check_keys(e, "encoder", {"hidden_dim", "heads_layer1", "attn_negative_slope", "gae_dim", "seed"});
    read(e, "hidden_dim", c.encoder.hidden_dim);
    read(e, "heads_layer1", c.encoder.heads_layer1);
    read(e, "attn_negative_slope", c.encoder.attn_negative_slope);
    read(e, "gae_dim", c.encoder.gae_dim);
    read(e, "seed", c.encoder.seed);
  }
  if (j.contains("train")) {
    const auto& t = j["train"];
    check_keys(t, "train",
               {"epochs", "batch_size", "lr", "temperature", "seed", "positives", "negatives", "tau_pos", "tau_neg",
                "morgan_sampling"});
    read(t, "epochs", c.train.epochs);
    read(t, "batch_size", c.train.batch_size);
    read(t, "lr", c.train.lr);
    read(t, "temperature", c.train.temperature);
    read(t, "seed", c.train.seed);
    read(t, "positives", c.train.sampler.positives);
    read(t, "negatives", c.train.sampler.negatives);
    read(t, "tau_pos", c.train.sampler.tau_pos);
    read(t, "tau_neg", c.train.sampler.tau_neg);
    read(t, "morgan_sampling", c.train.sampler.morgan_sampling);
  }
  if (j.contains("backend")) {
    const auto& b = j["backend"];
    check_keys(b, "backend",
               {"kind", "url", "model", "token_env", "timeout_seconds", "max_retries", "backoff_ms", "temperature",
                "max_tokens", "path", "max_in_flight"});
    read(b, "kind", c.backend.kind);
    read(b, "url", c.backend.chat.http.url);
    read(b, "model", c.backend.chat.model);
    read(b, "token_env", c.backend.chat.http.token_env);
    read(b, "timeout_seconds", c.backend.chat.http.timeout_seconds);
    read(b, "max_retries", c.backend.chat.http.max_retries);
    read(b, "backoff_ms", c.backend.chat.http.backoff_ms);
    read(b, "temperature", c.backend.chat.temperature);
    read(b, "max_tokens", c.backend.chat.max_tokens);
    read(b, "path", c.backend.replay_path);
    read(b, "max_in_flight", c.backend.max_in_flight);
  }
  c.train.fingerprint = c.fingerprint;
  c.dataset = resolve(base_dir, c.dataset);
  c.output_dir = resolve(base_dir, c.output_dir);
  c.checkpoint = resolve(base_dir, c.checkpoint);
  c.backend.replay_path = resolve(base_dir, c.backend.replay_path);
  for (auto& [prov, path] : c.embeddings) path = resolve(base_dir, path);
  c.validate();
  return c;
}

}  // namespace

ExperimentConfig parse_experiment_config(std::string_view text, const std::string& base_dir, const EnvLookup& env) {
  try {
    return parse_config_impl(text, base_dir, env);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad config value: ") + e.what());
  }
}

ExperimentConfig load_experiment_config(const std::string& path, const EnvLookup& env) {
  std::string text;
  try {
    text = io::read_file(path);
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  return parse_experiment_config(text, fs::path(path).parent_path().string(), env);
}

std::string config_to_json(const ExperimentConfig& c) {
  ordered_json j;
  j["task"] = task_name(c.task);
  j["dataset"] = c.dataset;
  j["split"] = c.split;
  j["split_seeds"] = c.split_seeds;
  j["strategy"] = retrieval_strategy_name(c.strategy);
  j["k"] = c.k ? json(*c.k) : json(nullptr);
  j["lambda"] = c.lambda;
  j["aggregation"] = c.aggregation == Aggregation::Sum ? "sum" : "min";
  j["mmr"] = c.mmr;
  j["repeats"] = c.repeats;
  j["seed"] = c.seed;
  j["output_dir"] = c.output_dir;
  j["embeddings"] = c.embeddings;
  j["embedding_provenance"] = c.embedding_provenance;
  j["checkpoint"] = c.checkpoint;
  j["fingerprint"] = {{"radius", c.fingerprint.radius}, {"nbits", c.fingerprint.nbits}};
  ordered_json enc;
  enc["hidden_dim"] = c.encoder.hidden_dim;
  enc["heads_layer1"] = c.encoder.heads_layer1;
  enc["attn_negative_slope"] = c.encoder.attn_negative_slope;
  enc["gae_dim"] = c.encoder.gae_dim;
  enc["seed"] = c.encoder.seed;
  j["encoder"] = enc;
  ordered_json t;
  t["epochs"] = c.train.epochs;
  t["batch_size"] = c.train.batch_size;
  t["lr"] = c.train.lr;
  t["temperature"] = c.train.temperature;
  t["seed"] = c.train.seed;
  t["positives"] = c.train.sampler.positives;
  t["negatives"] = c.train.sampler.negatives;
  t["tau_pos"] = c.train.sampler.tau_pos;
  t["tau_neg"] = c.train.sampler.tau_neg;
  t["morgan_sampling"] = c.train.sampler.morgan_sampling;
  j["train"] = t;
  ordered_json b;
  b["kind"] = c.backend.kind;
  b["url"] = c.backend.chat.http.url;
  b["model"] = c.backend.chat.model;
  b["token_env"] = c.backend.chat.http.token_env;
  b["timeout_seconds"] = c.backend.chat.http.timeout_seconds;
  b["max_retries"] = c.backend.chat.http.max_retries;
  b["backoff_ms"] = c.backend.chat.http.backoff_ms;
  b["temperature"] = c.backend.chat.temperature;
  b["max_tokens"] = c.backend.chat.max_tokens;
  b["path"] = c.backend.replay_path;
  b["max_in_flight"] = c.backend.max_in_flight;
  j["backend"] = b;
  j["threads"] = c.threads;
  j["dump_per_example"] = c.dump_per_example;
  return j.dump(2);
}

namespace {

std::size_t thread_count(std::size_t requested) {
  if (requested > 0) return requested;
  return std::max<std::size_t>(1, std::thread::hardware_concurrency());
}

// Runs fn(i) for i in [0, n); results must go to per-index slots. The first
// exception is rethrown once every worker has stopped.
template <class Fn>
void parallel_for(std::size_t n, std::size_t threads, Fn&& fn) {
  const std::size_t workers = std::min(thread_count(threads), std::max<std::size_t>(n, 1));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr first;
  std::mutex mu;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      while (!failed) {
        const std::size_t i = next++;
        if (i >= n) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(mu);
          if (!first) first = std::current_exception();
          failed = true;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (first) std::rethrow_exception(first);
}

void say(const Logger& log, const std::string& msg) {
  if (log) log(msg);
}

std::string fmt(const char* pattern, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, pattern, v);
  return buf;
}

TextEmbeddingIndex load_captions(const ExperimentConfig& cfg) {
  const auto it = cfg.embeddings.find(cfg.embedding_provenance);
  if (it == cfg.embeddings.end()) {
    throw ConfigError("no embedding file configured for provenance '" + cfg.embedding_provenance + "'");
  }
  if (!fs::exists(it->second)) {
    throw ConfigError("embedding file for '" + cfg.embedding_provenance + "' not found: " + it->second);
  }
  return load_embedding_file(it->second, cfg.embedding_provenance);
}

std::vector<TrainExample> examples_for(const Dataset& ds, const std::vector<std::size_t>& idx) {
  std::vector<TrainExample> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back({ds.records[i].id, record_graph(ds.records[i])});
  return out;
}

std::string payload_of(Task task, const DatasetRecord& r) {
  return is_classification(task) ? (r.label ? "1" : "0") : r.caption;
}

}  // namespace

PreparedExperiment prepare_experiment(const ExperimentConfig& cfg_in, const Logger& log) {
  cfg_in.validate();
  PreparedExperiment prep;
  prep.cfg = cfg_in;
  ExperimentConfig& cfg = prep.cfg;
  cfg.train.fingerprint = cfg.fingerprint;
  prep.dataset = ingest(cfg.dataset, cfg.task);
  say(log, "ingest " + cfg.dataset + ": " + prep.dataset.summary.describe());
  prep.split = has_split_tags(prep.dataset) ? split_from_tags(prep.dataset)
                                            : make_split(prep.dataset.records.size(), cfg.split_seeds[cfg.split]);
  if (prep.split.train.empty() || prep.split.test.empty()) throw ConfigError("split has an empty train or test part");
  say(log, "split: " + std::to_string(prep.split.train.size()) + " train, " + std::to_string(prep.split.valid.size()) +
               " valid, " + std::to_string(prep.split.test.size()) + " test");

  if (cfg.needs_encoder()) {
    if (!cfg.checkpoint.empty()) {
      EncoderConfig enc;
      prep.params = load_encoder(cfg.checkpoint, enc);
      prep.encoder = enc;
      if (cfg.strategy == RetrievalStrategy::Gae && enc.gae_dim == 0) {
        say(log, "note: checkpoint has no GAE decoder; using pooled node embeddings anyway");
      }
      say(log, "loaded encoder from " + cfg.checkpoint);
    } else {
      const auto train_set = examples_for(prep.dataset, prep.split.train);
      const auto valid_set = examples_for(prep.dataset, prep.split.valid);
      EncoderConfig enc = cfg.encoder;
      const auto progress = [&](const EpochStats& s) {
        say(log, "epoch " + std::to_string(s.epoch) + " loss " + fmt("%.6f", s.train_loss) + " validation " +
                     fmt("%.6f", s.validation));
      };
      if (cfg.strategy == RetrievalStrategy::Gamic) {
        const auto captions = load_captions(cfg);
        enc.out_dim = captions.dim();
        enc.gae_dim = 0;
        prep.training = train(train_set, valid_set, captions, enc, cfg.train, progress);
      } else {
        if (enc.gae_dim == 0) enc.gae_dim = enc.hidden_dim;
        prep.training = train_gae(train_set, valid_set, enc, cfg.train, progress);
      }
      prep.params = prep.training->params;
      prep.encoder = prep.training->encoder;
      say(log, "best epoch " + std::to_string(prep.training->best_epoch));
    }
  }

  const bool pooled = cfg.strategy == RetrievalStrategy::Gae;
  const auto embed = [&](const MolecularGraph& g) {
    return pooled ? encode_pooled(g, prep.params, *prep.encoder) : encode(g, prep.params, *prep.encoder);
  };

  const auto& recs = prep.dataset.records;
  std::vector<PoolEntry> entries(prep.split.train.size());
  parallel_for(entries.size(), cfg.threads, [&](std::size_t i) {
    const auto& r = recs[prep.split.train[i]];
    const auto g = record_graph(r);
    PoolEntry e{r.id, r.smiles, payload_of(cfg.task, r), morgan_fingerprint(g, cfg.fingerprint), {}};
    if (prep.encoder) {
      const auto z = embed(g);
      e.embedding.assign(z.begin(), z.end());
    }
    entries[i] = std::move(e);
  });
  prep.pool = DemonstrationPool(std::string(retrieval_strategy_name(cfg.strategy)), cfg.fingerprint);
  for (auto& e : entries) prep.pool.add(std::move(e));

  prep.test.resize(prep.split.test.size());
  parallel_for(prep.test.size(), cfg.threads, [&](std::size_t i) {
    const auto& r = recs[prep.split.test[i]];
    const auto g = record_graph(r);
    TestItem t{r.id, r.smiles, payload_of(cfg.task, r), r.label, {morgan_fingerprint(g, cfg.fingerprint), {}}};
    if (prep.encoder) t.query.embedding = embed(g);
    prep.test[i] = std::move(t);
  });
  say(log, "pool " + std::to_string(prep.pool.size()) + " entries, " + std::to_string(prep.test.size()) + " queries");
  return prep;
}

EvalSettings eval_settings(const ExperimentConfig& cfg) {
  return {cfg.effective_k(), cfg.lambda, cfg.mmr, cfg.aggregation, cfg.repeats, cfg.seed};
}

std::vector<std::size_t> retrieve_for(const PreparedExperiment& prep, const EvalSettings& s, std::size_t item,
                                      std::size_t repeat) {
  if (s.k == 0) return {};
  const auto& q = prep.test.at(item).query;
  switch (prep.cfg.strategy) {
    case RetrievalStrategy::Random:
      return select_topk(q, prep.pool, s.k, Strategy::Random, derive_seed(s.seed, repeat, item));
    case RetrievalStrategy::Scaffold:
      return select_topk(q, prep.pool, s.k, Strategy::Scaffold);
    case RetrievalStrategy::Gae:
    case RetrievalStrategy::Gamic:
      if (s.mmr) return select_mmr(q.embedding, prep.pool, MMRConfig{s.k, s.lambda, s.aggregation});
      return select_topk(q, prep.pool, s.k, Strategy::Embedding);
  }
  return {};
}

RepeatResult run_repeat(const PreparedExperiment& prep, const EvalSettings& s, std::size_t repeat, LlmBackend& backend) {
  const Task task = prep.cfg.task;
  RepeatResult out;
  out.prompts.resize(prep.test.size());
  parallel_for(prep.test.size(), prep.cfg.threads, [&](std::size_t i) {
    std::vector<Demonstration> demos;
    for (auto idx : retrieve_for(prep, s, i, repeat)) {
      const auto& e = prep.pool[idx];
      demos.push_back({e.smiles, is_classification(task) ? render_label(task, e.payload == "1") : e.payload});
    }
    out.prompts[i] = build_prompt(task, demos, prep.test[i].smiles, prep.test[i].id);
  });
  out.completions = complete_all(out.prompts, backend, prep.cfg.backend.max_in_flight);
  if (is_classification(task)) {
    std::vector<Label> pred;
    std::vector<bool> gold;
    for (std::size_t i = 0; i < prep.test.size(); ++i) {
      pred.push_back(parse_label(out.completions[i]));
      gold.push_back(prep.test[i].label);
    }
    out.scores["f1"] = f1_binary(pred, gold).f1;
    return out;
  }
  out.per_example.resize(prep.test.size());
  parallel_for(prep.test.size(), prep.cfg.threads,
               [&](std::size_t i) { out.per_example[i] = caption_scores(out.completions[i], prep.test[i].reference); });
  for (const auto& name : caption_metric_names()) {
    double sum = 0.0;
    for (const auto& ex : out.per_example) sum += ex.at(name);
    out.scores[name] = sum / static_cast<double>(out.per_example.size());
  }
  return out;
}

std::unique_ptr<LlmBackend> make_backend(const BackendConfig& cfg) {
  if (cfg.kind == "mock") return std::make_unique<MockBackend>();
  if (cfg.kind == "http") return std::make_unique<HttpChatBackend>(cfg.chat);
  if (cfg.kind == "replay") {
    std::string text;
    try {
      text = io::read_file(cfg.replay_path);
    } catch (const Error& e) {
      throw ConfigError(e.what());
    }
    return std::make_unique<ReplayBackend>(completions_from_jsonl(text));
  }
  throw ConfigError("unknown backend '" + cfg.kind + "'");
}

namespace {

std::string per_example_csv(const PreparedExperiment& prep, const RepeatResult& r) {
  const auto names = caption_metric_names();
  std::string out = "id";
  for (const auto& n : names) out += "," + n;
  out += "\n";
  for (std::size_t i = 0; i < r.per_example.size(); ++i) {
    out += prep.test[i].id;
    for (const auto& n : names) out += fmt(",%.6f", r.per_example[i].at(n));
    out += "\n";
  }
  return out;
}

std::vector<std::string> test_ids(const PreparedExperiment& prep) {
  std::vector<std::string> ids;
  for (const auto& t : prep.test) ids.push_back(t.id);
  return ids;
}

struct EvalState {
  ScoreReport report;
  std::vector<std::string> files;
};

void evaluate_into(const PreparedExperiment& prep, const EvalSettings& s, LlmBackend& backend, const std::string& dir,
                   const Logger& log, EvalState& st) {
  if (!dir.empty()) fs::create_directories(dir);
  const auto write = [&](const std::string& name, const std::string& body) {
    io::write_file_atomic(dir + "/" + name, body);
    st.files.push_back(name);
  };
  for (std::size_t r = 0; r < s.repeats; ++r) {
    const auto res = run_repeat(prep, s, r, backend);
    st.report.add_repeat(res.scores);
    std::string line = "repeat " + std::to_string(r + 1) + ":";
    for (const auto& [name, v] : res.scores) line += " " + name + "=" + fmt("%.4f", v);
    say(log, line);
    if (dir.empty()) continue;
    const std::string tag = "_r" + std::to_string(r + 1);
    write("prompts" + tag + ".jsonl", prompts_to_jsonl(res.prompts));
    write("completions" + tag + ".jsonl", completions_to_jsonl(test_ids(prep), res.completions));
    if (prep.cfg.dump_per_example && !res.per_example.empty()) write("per_example" + tag + ".csv", per_example_csv(prep, res));
  }
  if (!dir.empty()) {
    write("report.csv", st.report.to_csv());
    write("report.json", st.report.to_json());
  }
}

}  // namespace

ScoreReport evaluate(const PreparedExperiment& prep, const EvalSettings& s, LlmBackend& backend,
                     const std::string& out_dir, const Logger& log) {
  EvalState st;
  evaluate_into(prep, s, backend, out_dir, log, st);
  return st.report;
}

namespace {

std::string manifest(const ExperimentConfig& cfg, const std::optional<PreparedExperiment>& prep, const EvalState& st,
                     const std::string& status, const std::string& error) {
  ordered_json j;
  j["status"] = status;
  if (!error.empty()) j["error"] = error;
  j["config"] = ordered_json::parse(config_to_json(cfg));
  if (prep) {
    j["dataset"] = {{"rows", prep->dataset.summary.rows},
                    {"kept", prep->dataset.summary.kept},
                    {"skipped", prep->dataset.summary.skipped}};
    j["split"] = {{"train", prep->split.train.size()},
                  {"valid", prep->split.valid.size()},
                  {"test", prep->split.test.size()}};
    if (prep->training) j["best_epoch"] = prep->training->best_epoch;
  }
  j["completed_repeats"] = st.report.repeats();
  j["files"] = st.files;
  return j.dump(2) + "\n";
}

void write_training(const std::string& dir, const PreparedExperiment& prep, std::vector<std::string>& files) {
  if (!prep.training) return;
  fs::create_directories(dir);
  save_encoder(dir + "/encoder.gckp", prep.training->params, prep.training->encoder);
  io::write_file_atomic(dir + "/loss_curve.csv",
                        loss_curve_csv(prep.training->curve,
                                       prep.cfg.strategy == RetrievalStrategy::Gae ? "neg_recon_loss" : "separation"));
  files.push_back("encoder.gckp");
  files.push_back("loss_curve.csv");
}

// With `prep` already set (sweeps) the encoder files belong to the caller.
ScoreReport run_in_dir(const ExperimentConfig& cfg, const Logger& log, std::optional<PreparedExperiment>& prep,
                       const EvalSettings& s) {
  const std::string dir = cfg.output_dir;
  fs::create_directories(dir);
  EvalState st;
  try {
    if (!prep) {
      prep = prepare_experiment(cfg, log);
      write_training(dir, *prep, st.files);
    }
    const auto backend = make_backend(cfg.backend);
    evaluate_into(*prep, s, *backend, dir, log, st);
  } catch (const std::exception& e) {
    io::write_file_atomic(dir + "/manifest.json", manifest(cfg, prep, st, "failed", e.what()));
    throw;
  }
  io::write_file_atomic(dir + "/manifest.json", manifest(cfg, prep, st, "complete", ""));
  return st.report;
}

}  // namespace

ScoreReport run_experiment(const ExperimentConfig& cfg, const Logger& log) {
  std::optional<PreparedExperiment> prep;
  return run_in_dir(cfg, log, prep, eval_settings(cfg));
}

std::string sweep_table_csv(const std::string& parameter, const std::vector<SweepRow>& rows) {
  std::string out = parameter;
  if (rows.empty()) return out + "\n";
  for (const auto& [name, m] : rows.front().report.metrics()) out += "," + name + "_mean," + name + "_std";
  out += "\n";
  for (const auto& row : rows) {
    out += fmt("%g", row.value);
    for (const auto& [name, m] : row.report.metrics()) out += fmt(",%.6f", m.mean) + fmt(",%.6f", m.std);
    out += "\n";
  }
  return out;
}

namespace {

template <class T, class Apply, class Label>
std::vector<SweepRow> sweep(const ExperimentConfig& cfg, const std::vector<T>& values, const std::string& parameter,
                            Apply&& apply, Label&& label, const Logger& log) {
  std::optional<PreparedExperiment> prep = prepare_experiment(cfg, log);
  std::vector<std::string> files;
  write_training(cfg.output_dir, *prep, files);
  std::vector<SweepRow> rows;
  for (const T& v : values) {
    ExperimentConfig sub = cfg;
    sub.output_dir = cfg.output_dir + "/" + label(v);
    apply(sub, v);
    sub.validate();
    prep->cfg = sub;
    say(log, parameter + " = " + label(v));
    rows.push_back({static_cast<double>(v), run_in_dir(sub, log, prep, eval_settings(sub))});
  }
  io::write_file_atomic(cfg.output_dir + "/sweep_" + parameter + ".csv", sweep_table_csv(parameter, rows));
  return rows;
}

}  // namespace

std::vector<SweepRow> sweep_k(const ExperimentConfig& cfg, const std::vector<std::size_t>& ks, const Logger& log) {
  return sweep(
      cfg, ks, "k", [](ExperimentConfig& c, std::size_t k) { c.k = k; },
      [](std::size_t k) { return "k_" + std::to_string(k); }, log);
}

std::vector<SweepRow> sweep_lambda(const ExperimentConfig& cfg, const std::vector<double>& lambdas, const Logger& log) {
  if (!cfg.needs_encoder()) throw ConfigError("a lambda sweep needs the gae or gamic strategy");
  return sweep(
      cfg, lambdas, "lambda",
      [](ExperimentConfig& c, double l) {
        c.lambda = l;
        c.mmr = true;
      },
      [](double l) { return "lambda_" + fmt("%g", l); }, log);
}

ExperimentConfig ablation_config(const ExperimentConfig& base, const std::string& variant) {
  ExperimentConfig c = base;
  c.strategy = RetrievalStrategy::Gamic;
  c.checkpoint.clear();
  if (variant == "full") {
    c.train.sampler.morgan_sampling = true;
    c.embedding_provenance = "scibert";
  } else if (variant == "wo_morgan") {
    c.train.sampler.morgan_sampling = false;
    c.embedding_provenance = "scibert";
  } else if (variant == "gamic_bert") {
    c.train.sampler.morgan_sampling = true;
    c.embedding_provenance = "bert";
  } else if (variant == "wo_morgan_bert") {
    c.train.sampler.morgan_sampling = false;
    c.embedding_provenance = "bert";
  } else {
    throw ConfigError("unknown ablation variant '" + variant + "'");
  }
  const auto it = c.embeddings.find(c.embedding_provenance);
  if (it == c.embeddings.end()) {
    throw ConfigError("variant " + variant + " needs an embedding file for provenance '" + c.embedding_provenance + "'");
  }
  if (!fs::exists(it->second)) {
    throw ConfigError("variant " + variant + ": embedding file not found: " + it->second);
  }
  c.output_dir = base.output_dir + "/" + variant;
  return c;
}

std::vector<AblationRow> run_ablation(const ExperimentConfig& cfg, const std::vector<std::string>& variants,
                                      const Logger& log) {
  std::vector<ExperimentConfig> configs;
  for (const auto& v : variants) configs.push_back(ablation_config(cfg, v));
  std::vector<AblationRow> rows;
  std::string csv = "variant";
  for (std::size_t i = 0; i < variants.size(); ++i) {
    say(log, "variant " + variants[i]);
    rows.push_back({variants[i], run_experiment(configs[i], log)});
    if (i == 0) {
      for (const auto& [name, m] : rows[0].report.metrics()) csv += "," + name + "_mean," + name + "_std";
      csv += "\n";
    }
    csv += variants[i];
    for (const auto& [name, m] : rows.back().report.metrics()) csv += fmt(",%.6f", m.mean) + fmt(",%.6f", m.std);
    csv += "\n";
  }
  io::write_file_atomic(cfg.output_dir + "/ablation.csv", csv);
  return rows;
}

}  // namespace gamic
