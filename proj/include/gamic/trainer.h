#pragma once

#include <functional>
#include <string>
#include <vector>

#include "gamic/autodiff.h"
#include "gamic/encoder.h"
#include "gamic/fingerprint.h"
#include "gamic/gradcheck.h"
#include "gamic/sampler.h"
#include "gamic/textemb.h"

namespace gamic {

struct TrainConfig {
  double temperature = 0.1;
  std::size_t epochs = 50;
  std::size_t batch_size = 64;
  double lr = 1e-3;
  SamplerConfig sampler;
  MorganConfig fingerprint;
  std::uint64_t seed = 0;

  void validate() const;
};

struct TrainExample {
  std::string id;
  MolecularGraph graph;
};

struct EpochStats {
  std::size_t epoch = 0;       // 1-based
  double train_loss = 0.0;     // mean over the epoch's anchors
  double validation = 0.0;     // separation (NCE) or negated loss (GAE); higher is better
};

struct TrainResult {
  ParamStore params;           // best-validation snapshot
  EncoderConfig encoder;
  std::vector<EpochStats> curve;
  std::size_t best_epoch = 0;
};

/// Mean over anchors of the NCE loss; an anchor with several positives
/// contributes the average of its per-positive terms. Rows of z, positives
/// and negatives are unit vectors of one width.
double nce_loss(const std::vector<std::vector<double>>& z, const std::vector<std::vector<std::vector<double>>>& positives,
                const std::vector<std::vector<std::vector<double>>>& negatives, double tau);

/// Same loss for a single anchor on the tape; positives P x D, negatives K x D.
ad::Var nce_loss_var(ad::Var z, const Tensor2& positives, const Tensor2& negatives, double tau);

/// Mean cosine of each molecule's embedding with its own caption minus the
/// mean cosine with the other captions of the set.
double validation_separation(const std::vector<TrainExample>& examples, const ParamStore& params,
                             const EncoderConfig& enc, const TextEmbeddingIndex& captions);

using EpochCallback = std::function<void(const EpochStats&)>;

/// Contrastive alignment of graph embeddings to caption embeddings.
/// enc.out_dim must equal captions.dim(). Every example id needs a caption
/// embedding (DataError listing the missing ids otherwise). When `valid` is
/// empty the separation is measured on the training examples.
TrainResult train(const std::vector<TrainExample>& train_set, const std::vector<TrainExample>& valid,
                  const TextEmbeddingIndex& captions, const EncoderConfig& enc, const TrainConfig& cfg,
                  const EpochCallback& on_epoch = {});

/// Graph autoencoder baseline: same trunk, trained to reconstruct adjacency.
/// enc.gae_dim must be positive.
TrainResult train_gae(const std::vector<TrainExample>& train_set, const std::vector<TrainExample>& valid,
                      const EncoderConfig& enc, const TrainConfig& cfg, const EpochCallback& on_epoch = {});

/// Central-difference check of encoder + NCE loss on one molecule, with
/// seeded random unit vectors as the positive and negative captions. The
/// encoder is initialized from enc.seed.
GradCheckReport encoder_nce_gradcheck(const MolecularGraph& graph, const EncoderConfig& enc, std::size_t positives,
                                      std::size_t negatives, double tau, std::uint64_t seed,
                                      const GradCheckOptions& opts = {});

/// CSV with header "epoch,train_loss,<validation_column>".
std::string loss_curve_csv(const std::vector<EpochStats>& curve, const std::string& validation_column);

}  // namespace gamic
