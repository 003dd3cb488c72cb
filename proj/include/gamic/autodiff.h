#pragma once

// Reverse-mode differentiation over dense matrices. A Tape records each
// operation's output together with a closure that pushes the output gradient
// back to its inputs; Tape::backward replays the closures in reverse.

#include <cstddef>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "gamic/params.h"
#include "gamic/tensor.h"

namespace gamic::ad {

class Tape;

/// Handle to a node on a tape. Cheap to copy; valid while the tape lives.
struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;

  const Tensor2& value() const;
  std::size_t rows() const { return value().rows; }
  std::size_t cols() const { return value().cols; }
};

class Tape {
 public:
  using Backward = std::function<void(Tape&, std::size_t self)>;

  Var constant(Tensor2 value);
  /// Leaf bound to a stored parameter; its gradient is added to the store's
  /// gradient slot by backward(). Requesting the same name twice returns the
  /// same node.
  Var param(ParamStore& store, const std::string& name);
  /// Read-only leaf for inference; no gradient is tracked.
  Var frozen(const ParamStore& store, const std::string& name);

  Var push(Tensor2 value, std::vector<std::size_t> inputs, Backward backward);

  const Tensor2& value(std::size_t id) const;
  Tensor2& grad(std::size_t id) { return nodes_[id].grad; }
  bool wants_grad(std::size_t id) const { return nodes_[id].needs_grad; }

  /// Seeds d(loss)/d(loss) = 1, propagates, and accumulates into the bound
  /// parameter gradients (scaled by `scale`). Returns the loss value.
  /// Throws NonFiniteLoss when the loss is NaN/Inf, ConfigError when the
  /// loss is not 1x1.
  double backward(Var loss, double scale = 1.0);

  std::size_t size() const noexcept { return nodes_.size(); }

 private:
  struct Node {
    Tensor2 value;
    const Tensor2* external = nullptr;  // parameter leaves point into the store
    Tensor2 grad;
    Backward backward;
    Tensor2* param_grad = nullptr;
    bool needs_grad = false;
  };
  std::vector<Node> nodes_;
  std::map<std::string, std::size_t> params_;
};

// Shape errors throw ConfigError.
Var matmul(Var a, Var b);
/// a * b^T
Var matmul_nt(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
/// Adds row vector b (1 x C) to every row of a.
Var add_row(Var a, Var b);
/// out(i, j) = a(i, 0) + b(j, 0) for column vectors a (N x 1), b (M x 1).
Var add_outer(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double s);
Var leaky_relu(Var a, double slope);
Var relu(Var a);
Var sigmoid(Var a);
Var exp(Var a);
Var log(Var a);
/// Row-wise softmax restricted to entries where mask != 0; masked-out
/// entries get probability 0. Every row must keep at least one entry.
Var softmax_rows(Var a, const Tensor2& mask);
Var log_softmax_rows(Var a);
/// 1 x C mean over rows.
Var mean_rows(Var a);
Var concat_cols(const std::vector<Var>& parts);
Var l2_normalize_rows(Var a);
/// Row-wise dot product of equally shaped matrices -> N x 1.
Var dot_rows(Var a, Var b);
/// 1 x 1 sum of all entries.
Var sum(Var a);
Var reshape(Var a, std::size_t rows, std::size_t cols);
/// 1 x 1 entry (r, c).
Var pick(Var a, std::size_t r, std::size_t c);
/// Mean squared error between a and constant target over off-diagonal entries.
Var mse_offdiag(Var a, const Tensor2& target);

}  // namespace gamic::ad
