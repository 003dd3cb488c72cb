#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gamic/autodiff.h"
#include "gamic/molgraph.h"
#include "gamic/params.h"

namespace gamic {

/// Shape of the graph projector. hidden_dim is split evenly across the
/// first-layer heads, whose outputs are concatenated back to hidden_dim.
struct EncoderConfig {
  std::size_t node_dim = kNodeFeatureDim;
  std::size_t edge_dim = kEdgeFeatureDim;
  std::size_t hidden_dim = 128;
  std::size_t heads_layer1 = 4;
  std::size_t out_dim = 768;
  double attn_negative_slope = 0.2;
  /// Width of the GAE node decoder; 0 means no decoder parameters.
  std::size_t gae_dim = 0;
  std::uint64_t seed = 0;

  /// Throws ConfigError on inconsistent sizes.
  void validate() const;
  std::string to_json() const;
  static EncoderConfig from_json(const std::string& text);

  bool operator==(const EncoderConfig&) const = default;
};

/// Dense per-molecule inputs, built once and reused across epochs.
struct EncoderInputs {
  Tensor2 node_features;  // N x node_dim
  Tensor2 attention_mask; // N x N, adjacency plus self loops
  Tensor2 edge_flat;      // (N*N) x edge_dim, row i*N+j holds e_ij (zero on self loops)
  Tensor2 adjacency;      // N x N
};

/// Throws EmptyGraphError for graphs without atoms.
EncoderInputs prepare_inputs(const MolecularGraph& graph);

/// Xavier-uniform weights and zero biases, drawn from cfg.seed.
ParamStore init_encoder_params(const EncoderConfig& cfg);

/// Resolves parameter names to tape leaves: trainable when built from a
/// mutable store, frozen (no gradients) when built from a const one.
class Weights {
 public:
  Weights(ad::Tape& tape, ParamStore& store) : tape_(tape), mutable_(&store), frozen_(&store) {}
  Weights(ad::Tape& tape, const ParamStore& store) : tape_(tape), frozen_(&store) {}

  ad::Var operator()(const std::string& name) const;
  ad::Tape& tape() const { return tape_; }

 private:
  ad::Tape& tape_;
  ParamStore* mutable_ = nullptr;
  const ParamStore* frozen_;
};

/// One graph attention layer. Per head k and edge (i, j) in N(i) + {i}:
///   logit_ij = leaky_relu(src_k . W_k h_i + dst_k . W_k h_j + edge_k . U_k e_ij)
/// normalised by softmax over j; head outputs sum alpha_ij W_k h_j and are
/// concatenated, then the bias is added and, if `activate`, a ReLU applied.
ad::Var gat_layer(const Weights& w, const std::string& prefix, ad::Var h_in, const EncoderInputs& in, std::size_t heads,
                  std::size_t head_dim, double slope, bool activate);

/// Two GAT layers: node embeddings H (N x hidden_dim).
ad::Var node_embeddings(const Weights& w, const EncoderConfig& cfg, const EncoderInputs& in);

/// z = L2-normalize(MLP(mean over rows of H)); 1 x out_dim.
ad::Var encode_var(const Weights& w, const EncoderConfig& cfg, const EncoderInputs& in);

/// Inference on a frozen parameter snapshot; safe to call concurrently.
std::vector<double> encode(const MolecularGraph& graph, const ParamStore& params, const EncoderConfig& cfg);
std::vector<double> encode(const EncoderInputs& inputs, const ParamStore& params, const EncoderConfig& cfg);

/// L2-normalized mean of the node embeddings, without the projection MLP.
/// Graph vector of the GAE baseline.
std::vector<double> encode_pooled(const MolecularGraph& graph, const ParamStore& params, const EncoderConfig& cfg);

/// A_hat(i, j) = sigmoid(m_i . m_j) with m = MLP(H) per node.
ad::Var gae_decode_var(const Weights& w, ad::Var node_h);
/// Mean squared error between A_hat and A over i != j.
ad::Var gae_loss_var(ad::Var a_hat, const Tensor2& adjacency);

Tensor2 gae_decode(const MolecularGraph& graph, const ParamStore& params, const EncoderConfig& cfg);
double gae_loss(const Tensor2& a_hat, const Tensor2& adjacency);

/// Checkpoint header for an encoder ("gamic-encoder" JSON).
void save_encoder(const std::string& path, const ParamStore& params, const EncoderConfig& cfg);
ParamStore load_encoder(const std::string& path, EncoderConfig& cfg_out);

}  // namespace gamic
