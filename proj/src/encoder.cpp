#include "gamic/encoder.h"

#include <cmath>
#include <json.hpp>

#include "gamic/errors.h"
#include "gamic/rng.h"

namespace gamic {

namespace {

Tensor2 xavier(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Tensor2 t(fan_in, fan_out);
  for (double& v : t.data) v = rng.uniform(-limit, limit);
  return t;
}

std::string head_prefix(const std::string& layer, std::size_t head) { return layer + ".h" + std::to_string(head); }

void add_attention_head(ParamStore& p, const std::string& prefix, std::size_t in_dim, std::size_t edge_dim,
                        std::size_t head_dim, Rng& rng) {
  p.add(prefix + ".W", xavier(in_dim, head_dim, rng));
  p.add(prefix + ".U", xavier(edge_dim, head_dim, rng));
  p.add(prefix + ".att_src", xavier(head_dim, 1, rng));
  p.add(prefix + ".att_dst", xavier(head_dim, 1, rng));
  p.add(prefix + ".att_edge", xavier(head_dim, 1, rng));
}

}  // namespace

void EncoderConfig::validate() const {
  if (node_dim == 0 || edge_dim == 0 || hidden_dim == 0 || out_dim == 0 || heads_layer1 == 0) {
    throw ConfigError("encoder dimensions must be positive");
  }
  if (hidden_dim % heads_layer1 != 0) {
    throw ConfigError("hidden_dim " + std::to_string(hidden_dim) + " is not divisible by heads_layer1 " +
                      std::to_string(heads_layer1));
  }
  if (!(attn_negative_slope >= 0.0)) throw ConfigError("attn_negative_slope must be >= 0");
}

std::string EncoderConfig::to_json() const {
  nlohmann::ordered_json j;
  j["kind"] = "gamic-encoder";
  j["node_dim"] = node_dim;
  j["edge_dim"] = edge_dim;
  j["hidden_dim"] = hidden_dim;
  j["heads_layer1"] = heads_layer1;
  j["out_dim"] = out_dim;
  j["attn_negative_slope"] = attn_negative_slope;
  j["gae_dim"] = gae_dim;
  j["seed"] = seed;
  return j.dump();
}

EncoderConfig EncoderConfig::from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("encoder header is not JSON: ") + e.what());
  }
  if (j.value("kind", "") != "gamic-encoder") throw FormatError("checkpoint header is not an encoder config");
  EncoderConfig c;
  c.node_dim = j.at("node_dim").get<std::size_t>();
  c.edge_dim = j.at("edge_dim").get<std::size_t>();
  c.hidden_dim = j.at("hidden_dim").get<std::size_t>();
  c.heads_layer1 = j.at("heads_layer1").get<std::size_t>();
  c.out_dim = j.at("out_dim").get<std::size_t>();
  c.attn_negative_slope = j.at("attn_negative_slope").get<double>();
  c.gae_dim = j.value("gae_dim", std::size_t{0});
  c.seed = j.value("seed", std::uint64_t{0});
  c.validate();
  return c;
}

EncoderInputs prepare_inputs(const MolecularGraph& graph) {
  const std::size_t n = graph.num_atoms();
  if (n == 0) throw EmptyGraphError("cannot encode a graph with no atoms");
  if (!graph.featurized()) throw ConfigError("graph has not been featurized");
  EncoderInputs in;
  in.node_features = graph.node_features;
  in.adjacency = graph.adjacency;
  in.attention_mask = graph.adjacency;
  for (std::size_t i = 0; i < n; ++i) in.attention_mask(i, i) = 1.0;
  const std::size_t fe = graph.edge_features.cols;
  in.edge_flat = Tensor2(n * n, fe);
  for (std::size_t b = 0; b < graph.num_bonds(); ++b) {
    const auto& bond = graph.bonds[b];
    for (std::size_t k = 0; k < fe; ++k) {
      const double v = graph.edge_features(b, k);
      in.edge_flat(static_cast<std::size_t>(bond.begin) * n + static_cast<std::size_t>(bond.end), k) = v;
      in.edge_flat(static_cast<std::size_t>(bond.end) * n + static_cast<std::size_t>(bond.begin), k) = v;
    }
  }
  return in;
}

ParamStore init_encoder_params(const EncoderConfig& cfg) {
  cfg.validate();
  ParamStore p(cfg.seed);
  Rng rng(derive_seed(cfg.seed, 0x5EED));
  const std::size_t head_dim = cfg.hidden_dim / cfg.heads_layer1;
  for (std::size_t h = 0; h < cfg.heads_layer1; ++h) {
    add_attention_head(p, head_prefix("gat1", h), cfg.node_dim, cfg.edge_dim, head_dim, rng);
  }
  p.add("gat1.bias", Tensor2(1, cfg.hidden_dim));
  add_attention_head(p, head_prefix("gat2", 0), cfg.hidden_dim, cfg.edge_dim, cfg.hidden_dim, rng);
  p.add("gat2.bias", Tensor2(1, cfg.hidden_dim));
  p.add("proj.W1", xavier(cfg.hidden_dim, cfg.hidden_dim, rng));
  p.add("proj.b1", Tensor2(1, cfg.hidden_dim));
  p.add("proj.W2", xavier(cfg.hidden_dim, cfg.out_dim, rng));
  p.add("proj.b2", Tensor2(1, cfg.out_dim));
  if (cfg.gae_dim > 0) {
    p.add("gae.W1", xavier(cfg.hidden_dim, cfg.gae_dim, rng));
    p.add("gae.b1", Tensor2(1, cfg.gae_dim));
    p.add("gae.W2", xavier(cfg.gae_dim, cfg.gae_dim, rng));
    p.add("gae.b2", Tensor2(1, cfg.gae_dim));
  }
  return p;
}

ad::Var Weights::operator()(const std::string& name) const {
  return mutable_ ? tape_.param(*mutable_, name) : tape_.frozen(*frozen_, name);
}

ad::Var gat_layer(const Weights& w, const std::string& prefix, ad::Var h_in, const EncoderInputs& in, std::size_t heads,
                  std::size_t head_dim, double slope, bool activate) {
  ad::Tape& tape = w.tape();
  const std::size_t n = in.attention_mask.rows;
  if (h_in.rows() != n) {
    throw ConfigError(prefix + ": node matrix has " + std::to_string(h_in.rows()) + " rows for " + std::to_string(n) +
                      " nodes");
  }
  const ad::Var edges = tape.constant(in.edge_flat);
  std::vector<ad::Var> outputs;
  for (std::size_t h = 0; h < heads; ++h) {
    const std::string hp = head_prefix(prefix, h);
    const ad::Var wmat = w(hp + ".W");
    if (wmat.rows() != h_in.cols() || wmat.cols() != head_dim) {
      throw ConfigError(hp + ".W has shape " + std::to_string(wmat.rows()) + "x" + std::to_string(wmat.cols()) +
                        ", expected " + std::to_string(h_in.cols()) + "x" + std::to_string(head_dim));
    }
    const ad::Var wh = ad::matmul(h_in, wmat);
    const ad::Var src = ad::matmul(wh, w(hp + ".att_src"));
    const ad::Var dst = ad::matmul(wh, w(hp + ".att_dst"));
    // U e_ij projected on the edge attention vector, for every (i, j) at once.
    const ad::Var edge_coef = ad::matmul(w(hp + ".U"), w(hp + ".att_edge"));
    const ad::Var edge_logits = ad::reshape(ad::matmul(edges, edge_coef), n, n);
    const ad::Var logits = ad::leaky_relu(ad::add(ad::add_outer(src, dst), edge_logits), slope);
    const ad::Var alpha = ad::softmax_rows(logits, in.attention_mask);
    outputs.push_back(ad::matmul(alpha, wh));
  }
  ad::Var out = outputs.size() == 1 ? outputs.front() : ad::concat_cols(outputs);
  out = ad::add_row(out, w(prefix + ".bias"));
  return activate ? ad::relu(out) : out;
}

ad::Var node_embeddings(const Weights& w, const EncoderConfig& cfg, const EncoderInputs& in) {
  if (in.node_features.cols != cfg.node_dim) {
    throw ConfigError("node features have width " + std::to_string(in.node_features.cols) + ", encoder expects " +
                      std::to_string(cfg.node_dim));
  }
  if (in.edge_flat.cols != cfg.edge_dim) throw ConfigError("edge feature width does not match encoder config");
  const ad::Var x = w.tape().constant(in.node_features);
  const ad::Var h1 = gat_layer(w, "gat1", x, in, cfg.heads_layer1, cfg.hidden_dim / cfg.heads_layer1,
                               cfg.attn_negative_slope, true);
  return gat_layer(w, "gat2", h1, in, 1, cfg.hidden_dim, cfg.attn_negative_slope, false);
}

ad::Var encode_var(const Weights& w, const EncoderConfig& cfg, const EncoderInputs& in) {
  const ad::Var pooled = ad::mean_rows(node_embeddings(w, cfg, in));
  const ad::Var hidden = ad::relu(ad::add_row(ad::matmul(pooled, w("proj.W1")), w("proj.b1")));
  const ad::Var projected = ad::add_row(ad::matmul(hidden, w("proj.W2")), w("proj.b2"));
  return ad::l2_normalize_rows(projected);
}

std::vector<double> encode(const EncoderInputs& inputs, const ParamStore& params, const EncoderConfig& cfg) {
  ad::Tape tape;
  const Weights w(tape, params);
  return encode_var(w, cfg, inputs).value().data;
}

std::vector<double> encode(const MolecularGraph& graph, const ParamStore& params, const EncoderConfig& cfg) {
  return encode(prepare_inputs(graph), params, cfg);
}

std::vector<double> encode_pooled(const MolecularGraph& graph, const ParamStore& params, const EncoderConfig& cfg) {
  const EncoderInputs in = prepare_inputs(graph);
  ad::Tape tape;
  const Weights w(tape, params);
  return ad::l2_normalize_rows(ad::mean_rows(node_embeddings(w, cfg, in))).value().data;
}

ad::Var gae_decode_var(const Weights& w, ad::Var node_h) {
  const ad::Var m1 = ad::relu(ad::add_row(ad::matmul(node_h, w("gae.W1")), w("gae.b1")));
  const ad::Var m = ad::add_row(ad::matmul(m1, w("gae.W2")), w("gae.b2"));
  return ad::sigmoid(ad::matmul_nt(m, m));
}

ad::Var gae_loss_var(ad::Var a_hat, const Tensor2& adjacency) { return ad::mse_offdiag(a_hat, adjacency); }

Tensor2 gae_decode(const MolecularGraph& graph, const ParamStore& params, const EncoderConfig& cfg) {
  if (cfg.gae_dim == 0) throw ConfigError("encoder has no GAE decoder (gae_dim = 0)");
  const EncoderInputs in = prepare_inputs(graph);
  ad::Tape tape;
  const Weights w(tape, params);
  return gae_decode_var(w, node_embeddings(w, cfg, in)).value();
}

double gae_loss(const Tensor2& a_hat, const Tensor2& adjacency) {
  ad::Tape tape;
  return ad::mse_offdiag(tape.constant(a_hat), adjacency).value().data[0];
}

void save_encoder(const std::string& path, const ParamStore& params, const EncoderConfig& cfg) {
  save_checkpoint(path, params, cfg.to_json());
}

ParamStore load_encoder(const std::string& path, EncoderConfig& cfg_out) {
  std::string header;
  ParamStore p = load_checkpoint(path, &header);
  cfg_out = EncoderConfig::from_json(header);
  return p;
}

}  // namespace gamic
