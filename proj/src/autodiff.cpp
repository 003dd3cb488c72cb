#include "gamic/autodiff.h"

#include <cmath>
#include <limits>

#include "gamic/errors.h"

namespace gamic::ad {

namespace {

void require(bool ok, const char* op, const std::string& detail) {
  if (!ok) throw ConfigError(std::string(op) + ": shape mismatch " + detail);
}

std::string shape(const Tensor2& t) { return std::to_string(t.rows) + "x" + std::to_string(t.cols); }

// C += A * B
void gemm_nn(const Tensor2& a, const Tensor2& b, Tensor2& c) {
  for (std::size_t i = 0; i < a.rows; ++i) {
    double* crow = c.data.data() + i * c.cols;
    const double* arow = a.data.data() + i * a.cols;
    for (std::size_t k = 0; k < a.cols; ++k) {
      const double aik = arow[k];
      if (aik == 0.0) continue;
      const double* brow = b.data.data() + k * b.cols;
      for (std::size_t j = 0; j < b.cols; ++j) crow[j] += aik * brow[j];
    }
  }
}

// C += A * B^T
void gemm_nt(const Tensor2& a, const Tensor2& b, Tensor2& c) {
  for (std::size_t i = 0; i < a.rows; ++i) {
    const double* arow = a.data.data() + i * a.cols;
    for (std::size_t j = 0; j < b.rows; ++j) {
      const double* brow = b.data.data() + j * b.cols;
      double s = 0.0;
      for (std::size_t k = 0; k < a.cols; ++k) s += arow[k] * brow[k];
      c(i, j) += s;
    }
  }
}

// C += A^T * B
void gemm_tn(const Tensor2& a, const Tensor2& b, Tensor2& c) {
  for (std::size_t k = 0; k < a.rows; ++k) {
    const double* arow = a.data.data() + k * a.cols;
    const double* brow = b.data.data() + k * b.cols;
    for (std::size_t i = 0; i < a.cols; ++i) {
      const double aki = arow[i];
      if (aki == 0.0) continue;
      double* crow = c.data.data() + i * c.cols;
      for (std::size_t j = 0; j < b.cols; ++j) crow[j] += aki * brow[j];
    }
  }
}

void add_into(Tensor2& dst, const Tensor2& src) {
  for (std::size_t i = 0; i < dst.data.size(); ++i) dst.data[i] += src.data[i];
}

// Elementwise op helper: value f(x), derivative df(x, y) evaluated at input x
// and output y.
template <class F, class DF>
Var unary(Var a, F f, DF df) {
  const Tensor2& x = a.value();
  Tensor2 y(x.rows, x.cols);
  for (std::size_t i = 0; i < x.data.size(); ++i) y.data[i] = f(x.data[i]);
  const std::size_t ia = a.id;
  return a.tape->push(std::move(y), {ia}, [ia, df](Tape& t, std::size_t self) {
    if (!t.wants_grad(ia)) return;
    const Tensor2& x = t.value(ia);
    const Tensor2& y = t.value(self);
    const Tensor2& g = t.grad(self);
    Tensor2& ga = t.grad(ia);
    for (std::size_t i = 0; i < g.data.size(); ++i) ga.data[i] += g.data[i] * df(x.data[i], y.data[i]);
  });
}

}  // namespace

const Tensor2& Var::value() const { return tape->value(id); }

const Tensor2& Tape::value(std::size_t id) const {
  const Node& n = nodes_[id];
  return n.external ? *n.external : n.value;
}

Var Tape::constant(Tensor2 value) {
  Node n;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return Var{this, nodes_.size() - 1};
}

Var Tape::param(ParamStore& store, const std::string& name) {
  if (auto it = params_.find(name); it != params_.end()) return Var{this, it->second};
  auto& entry = store.entry(name);
  Node n;
  n.external = &entry.value;
  n.grad = Tensor2(entry.value.rows, entry.value.cols);
  n.param_grad = &entry.grad;
  n.needs_grad = true;
  nodes_.push_back(std::move(n));
  params_.emplace(name, nodes_.size() - 1);
  return Var{this, nodes_.size() - 1};
}

Var Tape::frozen(const ParamStore& store, const std::string& name) {
  if (auto it = params_.find(name); it != params_.end()) return Var{this, it->second};
  Node n;
  n.external = &store.entry(name).value;
  nodes_.push_back(std::move(n));
  params_.emplace(name, nodes_.size() - 1);
  return Var{this, nodes_.size() - 1};
}

Var Tape::push(Tensor2 value, std::vector<std::size_t> inputs, Backward backward) {
  bool needs = false;
  for (auto i : inputs) needs = needs || nodes_[i].needs_grad;
  Node n;
  n.needs_grad = needs;
  if (needs) {
    n.grad = Tensor2(value.rows, value.cols);
    n.backward = std::move(backward);
  }
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return Var{this, nodes_.size() - 1};
}

double Tape::backward(Var loss, double scale) {
  const Tensor2& lv = value(loss.id);
  if (lv.rows != 1 || lv.cols != 1) throw ConfigError("backward: loss must be 1x1, got " + shape(lv));
  const double out = lv.data[0];
  if (!std::isfinite(out)) throw NonFiniteLoss("loss is not finite");
  if (!nodes_[loss.id].needs_grad) return out;
  nodes_[loss.id].grad.data[0] = scale;
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.needs_grad) continue;
    if (n.backward) n.backward(*this, i);
    if (n.param_grad) add_into(*n.param_grad, n.grad);
  }
  return out;
}

Var matmul(Var a, Var b) {
  const Tensor2& x = a.value();
  const Tensor2& y = b.value();
  require(x.cols == y.rows, "matmul", shape(x) + " * " + shape(y));
  Tensor2 c(x.rows, y.cols);
  gemm_nn(x, y, c);
  const std::size_t ia = a.id, ib = b.id;
  return a.tape->push(std::move(c), {ia, ib}, [ia, ib](Tape& t, std::size_t self) {
    const Tensor2& g = t.grad(self);
    if (t.wants_grad(ia)) gemm_nt(g, t.value(ib), t.grad(ia));
    if (t.wants_grad(ib)) gemm_tn(t.value(ia), g, t.grad(ib));
  });
}

Var matmul_nt(Var a, Var b) {
  const Tensor2& x = a.value();
  const Tensor2& y = b.value();
  require(x.cols == y.cols, "matmul_nt", shape(x) + " * " + shape(y) + "^T");
  Tensor2 c(x.rows, y.rows);
  gemm_nt(x, y, c);
  const std::size_t ia = a.id, ib = b.id;
  return a.tape->push(std::move(c), {ia, ib}, [ia, ib](Tape& t, std::size_t self) {
    const Tensor2& g = t.grad(self);
    if (t.wants_grad(ia)) gemm_nn(g, t.value(ib), t.grad(ia));
    if (t.wants_grad(ib)) gemm_tn(g, t.value(ia), t.grad(ib));
  });
}

Var add(Var a, Var b) {
  const Tensor2& x = a.value();
  const Tensor2& y = b.value();
  require(x.same_shape(y), "add", shape(x) + " + " + shape(y));
  Tensor2 c = x;
  add_into(c, y);
  const std::size_t ia = a.id, ib = b.id;
  return a.tape->push(std::move(c), {ia, ib}, [ia, ib](Tape& t, std::size_t self) {
    if (t.wants_grad(ia)) add_into(t.grad(ia), t.grad(self));
    if (t.wants_grad(ib)) add_into(t.grad(ib), t.grad(self));
  });
}

Var sub(Var a, Var b) { return add(a, scale(b, -1.0)); }

Var add_row(Var a, Var b) {
  const Tensor2& x = a.value();
  const Tensor2& y = b.value();
  require(y.rows == 1 && y.cols == x.cols, "add_row", shape(x) + " + " + shape(y));
  Tensor2 c = x;
  for (std::size_t i = 0; i < c.rows; ++i)
    for (std::size_t j = 0; j < c.cols; ++j) c(i, j) += y(0, j);
  const std::size_t ia = a.id, ib = b.id;
  return a.tape->push(std::move(c), {ia, ib}, [ia, ib](Tape& t, std::size_t self) {
    const Tensor2& g = t.grad(self);
    if (t.wants_grad(ia)) add_into(t.grad(ia), g);
    if (t.wants_grad(ib)) {
      Tensor2& gb = t.grad(ib);
      for (std::size_t i = 0; i < g.rows; ++i)
        for (std::size_t j = 0; j < g.cols; ++j) gb(0, j) += g(i, j);
    }
  });
}

Var add_outer(Var a, Var b) {
  const Tensor2& x = a.value();
  const Tensor2& y = b.value();
  require(x.cols == 1 && y.cols == 1, "add_outer", shape(x) + " (+) " + shape(y));
  Tensor2 c(x.rows, y.rows);
  for (std::size_t i = 0; i < x.rows; ++i)
    for (std::size_t j = 0; j < y.rows; ++j) c(i, j) = x(i, 0) + y(j, 0);
  const std::size_t ia = a.id, ib = b.id;
  return a.tape->push(std::move(c), {ia, ib}, [ia, ib](Tape& t, std::size_t self) {
    const Tensor2& g = t.grad(self);
    if (t.wants_grad(ia)) {
      Tensor2& ga = t.grad(ia);
      for (std::size_t i = 0; i < g.rows; ++i)
        for (std::size_t j = 0; j < g.cols; ++j) ga(i, 0) += g(i, j);
    }
    if (t.wants_grad(ib)) {
      Tensor2& gb = t.grad(ib);
      for (std::size_t i = 0; i < g.rows; ++i)
        for (std::size_t j = 0; j < g.cols; ++j) gb(j, 0) += g(i, j);
    }
  });
}

Var mul(Var a, Var b) {
  const Tensor2& x = a.value();
  const Tensor2& y = b.value();
  require(x.same_shape(y), "mul", shape(x) + " .* " + shape(y));
  Tensor2 c = x;
  for (std::size_t i = 0; i < c.data.size(); ++i) c.data[i] *= y.data[i];
  const std::size_t ia = a.id, ib = b.id;
  return a.tape->push(std::move(c), {ia, ib}, [ia, ib](Tape& t, std::size_t self) {
    const Tensor2& g = t.grad(self);
    if (t.wants_grad(ia)) {
      const Tensor2& y = t.value(ib);
      Tensor2& ga = t.grad(ia);
      for (std::size_t i = 0; i < g.data.size(); ++i) ga.data[i] += g.data[i] * y.data[i];
    }
    if (t.wants_grad(ib)) {
      const Tensor2& x = t.value(ia);
      Tensor2& gb = t.grad(ib);
      for (std::size_t i = 0; i < g.data.size(); ++i) gb.data[i] += g.data[i] * x.data[i];
    }
  });
}

Var scale(Var a, double s) {
  return unary(a, [s](double x) { return s * x; }, [s](double, double) { return s; });
}

Var leaky_relu(Var a, double slope) {
  return unary(
      a, [slope](double x) { return x > 0.0 ? x : slope * x; },
      [slope](double x, double) { return x > 0.0 ? 1.0 : slope; });
}

Var relu(Var a) { return leaky_relu(a, 0.0); }

Var sigmoid(Var a) {
  return unary(
      a,
      [](double x) {
        if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Var exp(Var a) {
  return unary(a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Var log(Var a) {
  return unary(a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Var softmax_rows(Var a, const Tensor2& mask) {
  const Tensor2& x = a.value();
  require(x.same_shape(mask), "softmax_rows", shape(x) + " mask " + shape(mask));
  Tensor2 p(x.rows, x.cols);
  for (std::size_t i = 0; i < x.rows; ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < x.cols; ++j)
      if (mask(i, j) != 0.0) mx = std::max(mx, x(i, j));
    if (!std::isfinite(mx)) throw ConfigError("softmax_rows: row " + std::to_string(i) + " is fully masked");
    double z = 0.0;
    for (std::size_t j = 0; j < x.cols; ++j) {
      if (mask(i, j) == 0.0) continue;
      p(i, j) = std::exp(x(i, j) - mx);
      z += p(i, j);
    }
    for (std::size_t j = 0; j < x.cols; ++j) p(i, j) /= z;
  }
  const std::size_t ia = a.id;
  return a.tape->push(std::move(p), {ia}, [ia](Tape& t, std::size_t self) {
    if (!t.wants_grad(ia)) return;
    const Tensor2& p = t.value(self);
    const Tensor2& g = t.grad(self);
    Tensor2& ga = t.grad(ia);
    for (std::size_t i = 0; i < p.rows; ++i) {
      double dotpg = 0.0;
      for (std::size_t j = 0; j < p.cols; ++j) dotpg += p(i, j) * g(i, j);
      for (std::size_t j = 0; j < p.cols; ++j) ga(i, j) += p(i, j) * (g(i, j) - dotpg);
    }
  });
}

Var log_softmax_rows(Var a) {
  const Tensor2& x = a.value();
  Tensor2 y(x.rows, x.cols);
  for (std::size_t i = 0; i < x.rows; ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < x.cols; ++j) mx = std::max(mx, x(i, j));
    double z = 0.0;
    for (std::size_t j = 0; j < x.cols; ++j) z += std::exp(x(i, j) - mx);
    const double lse = mx + std::log(z);
    for (std::size_t j = 0; j < x.cols; ++j) y(i, j) = x(i, j) - lse;
  }
  const std::size_t ia = a.id;
  return a.tape->push(std::move(y), {ia}, [ia](Tape& t, std::size_t self) {
    if (!t.wants_grad(ia)) return;
    const Tensor2& y = t.value(self);
    const Tensor2& g = t.grad(self);
    Tensor2& ga = t.grad(ia);
    for (std::size_t i = 0; i < y.rows; ++i) {
      double gs = 0.0;
      for (std::size_t j = 0; j < y.cols; ++j) gs += g(i, j);
      for (std::size_t j = 0; j < y.cols; ++j) ga(i, j) += g(i, j) - std::exp(y(i, j)) * gs;
    }
  });
}

Var mean_rows(Var a) {
  const Tensor2& x = a.value();
  require(x.rows > 0, "mean_rows", "empty input");
  Tensor2 m(1, x.cols);
  for (std::size_t i = 0; i < x.rows; ++i)
    for (std::size_t j = 0; j < x.cols; ++j) m(0, j) += x(i, j);
  const double inv = 1.0 / static_cast<double>(x.rows);
  for (double& v : m.data) v *= inv;
  const std::size_t ia = a.id;
  return a.tape->push(std::move(m), {ia}, [ia, inv](Tape& t, std::size_t self) {
    if (!t.wants_grad(ia)) return;
    const Tensor2& g = t.grad(self);
    Tensor2& ga = t.grad(ia);
    for (std::size_t i = 0; i < ga.rows; ++i)
      for (std::size_t j = 0; j < ga.cols; ++j) ga(i, j) += g(0, j) * inv;
  });
}

Var concat_cols(const std::vector<Var>& parts) {
  require(!parts.empty(), "concat_cols", "no inputs");
  const std::size_t rows = parts.front().rows();
  std::size_t cols = 0;
  std::vector<std::size_t> ids, offsets;
  for (const Var& p : parts) {
    require(p.rows() == rows, "concat_cols", "row counts differ");
    ids.push_back(p.id);
    offsets.push_back(cols);
    cols += p.cols();
  }
  Tensor2 c(rows, cols);
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const Tensor2& x = parts[k].value();
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < x.cols; ++j) c(i, offsets[k] + j) = x(i, j);
  }
  return parts.front().tape->push(std::move(c), ids, [ids, offsets](Tape& t, std::size_t self) {
    const Tensor2& g = t.grad(self);
    for (std::size_t k = 0; k < ids.size(); ++k) {
      if (!t.wants_grad(ids[k])) continue;
      Tensor2& gk = t.grad(ids[k]);
      for (std::size_t i = 0; i < gk.rows; ++i)
        for (std::size_t j = 0; j < gk.cols; ++j) gk(i, j) += g(i, offsets[k] + j);
    }
  });
}

Var l2_normalize_rows(Var a) {
  const Tensor2& x = a.value();
  Tensor2 y(x.rows, x.cols);
  std::vector<double> norms(x.rows);
  for (std::size_t i = 0; i < x.rows; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < x.cols; ++j) s += x(i, j) * x(i, j);
    norms[i] = std::sqrt(s);
    if (norms[i] == 0.0) throw NonFiniteLoss("l2_normalize_rows: zero-norm row " + std::to_string(i));
    for (std::size_t j = 0; j < x.cols; ++j) y(i, j) = x(i, j) / norms[i];
  }
  const std::size_t ia = a.id;
  return a.tape->push(std::move(y), {ia}, [ia, norms](Tape& t, std::size_t self) {
    if (!t.wants_grad(ia)) return;
    const Tensor2& y = t.value(self);
    const Tensor2& g = t.grad(self);
    Tensor2& ga = t.grad(ia);
    for (std::size_t i = 0; i < y.rows; ++i) {
      double yg = 0.0;
      for (std::size_t j = 0; j < y.cols; ++j) yg += y(i, j) * g(i, j);
      for (std::size_t j = 0; j < y.cols; ++j) ga(i, j) += (g(i, j) - y(i, j) * yg) / norms[i];
    }
  });
}

Var dot_rows(Var a, Var b) {
  const Tensor2& x = a.value();
  const Tensor2& y = b.value();
  require(x.same_shape(y), "dot_rows", shape(x) + " . " + shape(y));
  Tensor2 d(x.rows, 1);
  for (std::size_t i = 0; i < x.rows; ++i)
    for (std::size_t j = 0; j < x.cols; ++j) d(i, 0) += x(i, j) * y(i, j);
  const std::size_t ia = a.id, ib = b.id;
  return a.tape->push(std::move(d), {ia, ib}, [ia, ib](Tape& t, std::size_t self) {
    const Tensor2& g = t.grad(self);
    const Tensor2& x = t.value(ia);
    const Tensor2& y = t.value(ib);
    if (t.wants_grad(ia)) {
      Tensor2& ga = t.grad(ia);
      for (std::size_t i = 0; i < x.rows; ++i)
        for (std::size_t j = 0; j < x.cols; ++j) ga(i, j) += g(i, 0) * y(i, j);
    }
    if (t.wants_grad(ib)) {
      Tensor2& gb = t.grad(ib);
      for (std::size_t i = 0; i < x.rows; ++i)
        for (std::size_t j = 0; j < x.cols; ++j) gb(i, j) += g(i, 0) * x(i, j);
    }
  });
}

Var sum(Var a) {
  double s = 0.0;
  for (double v : a.value().data) s += v;
  const std::size_t ia = a.id;
  return a.tape->push(Tensor2(1, 1, s), {ia}, [ia](Tape& t, std::size_t self) {
    if (!t.wants_grad(ia)) return;
    const double g = t.grad(self).data[0];
    for (double& v : t.grad(ia).data) v += g;
  });
}

Var reshape(Var a, std::size_t rows, std::size_t cols) {
  const Tensor2& x = a.value();
  require(rows * cols == x.size(), "reshape", shape(x) + " -> " + std::to_string(rows) + "x" + std::to_string(cols));
  Tensor2 y(rows, cols, x.data);
  const std::size_t ia = a.id;
  return a.tape->push(std::move(y), {ia}, [ia](Tape& t, std::size_t self) {
    if (!t.wants_grad(ia)) return;
    add_into(t.grad(ia), t.grad(self));
  });
}

Var pick(Var a, std::size_t r, std::size_t c) {
  const Tensor2& x = a.value();
  require(r < x.rows && c < x.cols, "pick", "index out of range for " + shape(x));
  const std::size_t ia = a.id;
  return a.tape->push(Tensor2(1, 1, x(r, c)), {ia}, [ia, r, c](Tape& t, std::size_t self) {
    if (!t.wants_grad(ia)) return;
    t.grad(ia)(r, c) += t.grad(self).data[0];
  });
}

Var mse_offdiag(Var a, const Tensor2& target) {
  const Tensor2& x = a.value();
  require(x.same_shape(target) && x.rows == x.cols, "mse_offdiag", shape(x) + " vs " + shape(target));
  const std::size_t n = x.rows;
  const double count = n > 1 ? static_cast<double>(n * (n - 1)) : 1.0;
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (i != j) s += (x(i, j) - target(i, j)) * (x(i, j) - target(i, j));
  const std::size_t ia = a.id;
  return a.tape->push(Tensor2(1, 1, s / count), {ia}, [ia, target, count, n](Tape& t, std::size_t self) {
    if (!t.wants_grad(ia)) return;
    const double g = t.grad(self).data[0];
    const Tensor2& x = t.value(ia);
    Tensor2& ga = t.grad(ia);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (i != j) ga(i, j) += g * 2.0 * (x(i, j) - target(i, j)) / count;
  });
}

}  // namespace gamic::ad
