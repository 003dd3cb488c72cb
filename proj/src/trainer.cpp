#include "gamic/trainer.h"

#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <optional>
#include <set>

#include "gamic/errors.h"

namespace gamic {

void TrainConfig::validate() const {
  if (!(temperature > 0.0)) throw ConfigError("temperature must be > 0");
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (!(lr > 0.0)) throw ConfigError("lr must be > 0");
  sampler.validate();
}

namespace {

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw ConfigError("vector widths differ in NCE loss");
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

double log_sum_exp(const std::vector<double>& x) {
  double m = -std::numeric_limits<double>::infinity();
  for (double v : x) m = std::max(m, v);
  double s = 0.0;
  for (double v : x) s += std::exp(v - m);
  return m + std::log(s);
}

Tensor2 rows_of(const TextEmbeddingIndex& captions, const std::vector<TrainExample>& set,
                const std::vector<std::size_t>& idx) {
  Tensor2 t(idx.size(), captions.dim());
  for (std::size_t r = 0; r < idx.size(); ++r) {
    const auto& v = captions.at(set[idx[r]].id);
    for (std::size_t k = 0; k < v.size(); ++k) t(r, k) = static_cast<double>(v[k]);
  }
  return t;
}

void require_captions(const std::vector<TrainExample>& a, const std::vector<TrainExample>& b,
                      const TextEmbeddingIndex& captions) {
  std::vector<std::string> missing;
  for (const auto* set : {&a, &b}) {
    for (const auto& ex : *set) {
      if (!captions.contains(ex.id)) missing.push_back(ex.id);
    }
  }
  if (missing.empty()) return;
  std::string msg = "no caption embedding for " + std::to_string(missing.size()) + " id(s):";
  for (std::size_t i = 0; i < missing.size() && i < 20; ++i) msg += " " + missing[i];
  if (missing.size() > 20) msg += " ...";
  throw DataError(msg);
}

std::vector<EncoderInputs> prepare_all(const std::vector<TrainExample>& set) {
  std::vector<EncoderInputs> out;
  out.reserve(set.size());
  for (const auto& ex : set) out.push_back(prepare_inputs(ex.graph));
  return out;
}

// Tanimoto rows, cached when the pool is small enough to hold as a matrix.
class SimilarityRows {
 public:
  SimilarityRows(const std::vector<TrainExample>& set, const MorganConfig& fp) {
    for (const auto& ex : set) pool_.push_back({ex.id, morgan_fingerprint(ex.graph, fp)});
    if (pool_.size() <= kCacheLimit) {
      for (std::size_t i = 0; i < pool_.size(); ++i) cache_.push_back(similarity_row(i, pool_));
    }
  }
  std::vector<double> row(std::size_t i) const { return cache_.empty() ? similarity_row(i, pool_) : cache_[i]; }

 private:
  static constexpr std::size_t kCacheLimit = 4096;
  std::vector<PoolItem> pool_;
  std::vector<std::vector<double>> cache_;
};

template <class StepLoss, class Validate>
TrainResult run_epochs(std::size_t n, ParamStore params, const EncoderConfig& enc, const TrainConfig& cfg,
                       StepLoss&& step_loss, Validate&& validate, const EpochCallback& on_epoch) {
  Adam opt({cfg.lr});
  TrainResult result;
  result.encoder = enc;
  double best = -std::numeric_limits<double>::infinity();
  std::optional<ParamStore> best_params;
  std::vector<std::size_t> order(n);
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    Rng shuffle_rng(derive_seed(cfg.seed, epoch, 0x5B0F));
    shuffle_rng.shuffle(std::span<std::size_t>(order));
    double total = 0.0;
    for (std::size_t start = 0; start < n; start += cfg.batch_size) {
      const std::size_t end = std::min(n, start + cfg.batch_size);
      params.zero_grad();
      const double scale = 1.0 / static_cast<double>(end - start);
      for (std::size_t b = start; b < end; ++b) {
        ad::Tape tape;
        total += tape.backward(step_loss(tape, params, order[b], epoch), scale);
      }
      opt.step(params);
    }
    params.check_finite();
    EpochStats stats{epoch, total / static_cast<double>(n), validate(params)};
    result.curve.push_back(stats);
    if (stats.validation > best || !best_params) {
      best = stats.validation;
      best_params = params;
      result.best_epoch = epoch;
    }
    if (on_epoch) on_epoch(stats);
  }
  result.params = std::move(*best_params);
  return result;
}

}  // namespace

double nce_loss(const std::vector<std::vector<double>>& z, const std::vector<std::vector<std::vector<double>>>& positives,
                const std::vector<std::vector<std::vector<double>>>& negatives, double tau) {
  if (!(tau > 0.0)) throw ConfigError("temperature must be > 0");
  if (z.empty()) throw ConfigError("NCE loss needs at least one anchor");
  if (positives.size() != z.size() || negatives.size() != z.size()) {
    throw ConfigError("NCE loss: one positive and one negative set per anchor required");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    if (positives[i].empty()) throw ConfigError("NCE loss: anchor " + std::to_string(i) + " has no positive");
    std::vector<double> logits(negatives[i].size() + 1);
    for (std::size_t j = 0; j < negatives[i].size(); ++j) logits[j + 1] = dot(z[i], negatives[i][j]) / tau;
    double anchor_loss = 0.0;
    for (const auto& pos : positives[i]) {
      logits[0] = dot(z[i], pos) / tau;
      anchor_loss += log_sum_exp(logits) - logits[0];
    }
    total += anchor_loss / static_cast<double>(positives[i].size());
  }
  return total / static_cast<double>(z.size());
}

ad::Var nce_loss_var(ad::Var z, const Tensor2& positives, const Tensor2& negatives, double tau) {
  if (!(tau > 0.0)) throw ConfigError("temperature must be > 0");
  if (positives.rows == 0) throw ConfigError("NCE loss needs at least one positive");
  ad::Tape& tape = *z.tape;
  const ad::Var pos = ad::matmul_nt(z, tape.constant(positives));
  std::optional<ad::Var> neg;
  if (negatives.rows > 0) neg = ad::matmul_nt(z, tape.constant(negatives));
  std::optional<ad::Var> acc;
  for (std::size_t j = 0; j < positives.rows; ++j) {
    ad::Var logits = ad::pick(pos, 0, j);
    if (neg) logits = ad::concat_cols({logits, *neg});
    const ad::Var term = ad::pick(ad::log_softmax_rows(ad::scale(logits, 1.0 / tau)), 0, 0);
    acc = acc ? ad::add(*acc, term) : term;
  }
  return ad::scale(*acc, -1.0 / static_cast<double>(positives.rows));
}

double validation_separation(const std::vector<TrainExample>& examples, const ParamStore& params,
                             const EncoderConfig& enc, const TextEmbeddingIndex& captions) {
  const std::size_t n = examples.size();
  if (n == 0) return 0.0;
  std::vector<std::vector<double>> z, y;
  for (const auto& ex : examples) {
    z.push_back(encode(ex.graph, params, enc));
    const auto& v = captions.at(ex.id);
    y.emplace_back(v.begin(), v.end());
  }
  double own = 0.0, other = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    own += dot(z[i], y[i]);
    if (n > 1) {
      double s = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        if (j != i) s += dot(z[i], y[j]);
      }
      other += s / static_cast<double>(n - 1);
    }
  }
  return (own - other) / static_cast<double>(n);
}

TrainResult train(const std::vector<TrainExample>& train_set, const std::vector<TrainExample>& valid,
                  const TextEmbeddingIndex& captions, const EncoderConfig& enc, const TrainConfig& cfg,
                  const EpochCallback& on_epoch) {
  cfg.validate();
  enc.validate();
  if (train_set.empty()) throw DataError("training set is empty");
  if (enc.out_dim != captions.dim()) {
    throw ConfigError("encoder out_dim " + std::to_string(enc.out_dim) + " differs from caption embedding dim " +
                      std::to_string(captions.dim()));
  }
  require_captions(train_set, valid, captions);
  const auto inputs = prepare_all(train_set);
  const SimilarityRows sims(train_set, cfg.fingerprint);
  const auto& held_out = valid.empty() ? train_set : valid;

  auto step = [&](ad::Tape& tape, ParamStore& params, std::size_t i, std::size_t epoch) {
    Rng rng(epoch_anchor_seed(cfg.seed, epoch, i));
    const PairSample s = sample_pairs(i, sims.row(i), cfg.sampler, rng);
    const Weights w(tape, params);
    const ad::Var z = encode_var(w, enc, inputs[i]);
    return nce_loss_var(z, rows_of(captions, train_set, s.positives), rows_of(captions, train_set, s.negatives),
                        cfg.temperature);
  };
  auto validate = [&](const ParamStore& params) { return validation_separation(held_out, params, enc, captions); };
  return run_epochs(train_set.size(), init_encoder_params(enc), enc, cfg, step, validate, on_epoch);
}

TrainResult train_gae(const std::vector<TrainExample>& train_set, const std::vector<TrainExample>& valid,
                      const EncoderConfig& enc, const TrainConfig& cfg, const EpochCallback& on_epoch) {
  cfg.validate();
  enc.validate();
  if (enc.gae_dim == 0) throw ConfigError("GAE training needs gae_dim > 0");
  if (train_set.empty()) throw DataError("training set is empty");
  const auto inputs = prepare_all(train_set);
  const auto held_inputs = prepare_all(valid.empty() ? train_set : valid);

  auto step = [&](ad::Tape& tape, ParamStore& params, std::size_t i, std::size_t) {
    const Weights w(tape, params);
    return gae_loss_var(gae_decode_var(w, node_embeddings(w, enc, inputs[i])), inputs[i].adjacency);
  };
  auto validate = [&](const ParamStore& params) {
    double total = 0.0;
    for (const auto& in : held_inputs) {
      ad::Tape tape;
      const Weights w(tape, params);
      total += gae_loss_var(gae_decode_var(w, node_embeddings(w, enc, in)), in.adjacency).value().data[0];
    }
    return -total / static_cast<double>(held_inputs.size());
  };
  return run_epochs(train_set.size(), init_encoder_params(enc), enc, cfg, step, validate, on_epoch);
}

GradCheckReport encoder_nce_gradcheck(const MolecularGraph& graph, const EncoderConfig& enc, std::size_t positives,
                                      std::size_t negatives, double tau, std::uint64_t seed,
                                      const GradCheckOptions& opts) {
  if (positives == 0 || negatives == 0) throw ConfigError("gradient check needs a positive and a negative");
  ParamStore params = init_encoder_params(enc);
  const EncoderInputs in = prepare_inputs(graph);
  Rng rng(seed);
  const auto unit_rows = [&](std::size_t rows) {
    Tensor2 t(rows, enc.out_dim);
    for (std::size_t r = 0; r < rows; ++r) {
      double norm = 0.0;
      for (std::size_t c = 0; c < enc.out_dim; ++c) {
        t(r, c) = rng.uniform(-1.0, 1.0);
        norm += t(r, c) * t(r, c);
      }
      for (std::size_t c = 0; c < enc.out_dim; ++c) t(r, c) /= std::sqrt(norm);
    }
    return t;
  };
  const Tensor2 pos = unit_rows(positives);
  const Tensor2 neg = unit_rows(negatives);
  return finite_diff_check(params, [&](ad::Tape& tape, ParamStore& p) {
    const Weights w(tape, p);
    return nce_loss_var(encode_var(w, enc, in), pos, neg, tau);
  }, opts);
}

std::string loss_curve_csv(const std::vector<EpochStats>& curve, const std::string& validation_column) {
  std::string out = "epoch,train_loss," + validation_column + "\n";
  char buf[96];
  for (const auto& e : curve) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g\n", e.epoch, e.train_loss, e.validation);
    out += buf;
  }
  return out;
}

}  // namespace gamic
