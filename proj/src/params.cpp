#include "gamic/params.h"

#include <cmath>

#include "gamic/binary_io.h"
#include "gamic/errors.h"

namespace gamic {

namespace {
constexpr std::string_view kCheckpointMagic{"GCKP\x01", 5};
}

Tensor2& ParamStore::add(std::string name, Tensor2 init) {
  if (index_.count(name)) throw ConfigError("duplicate parameter name '" + name + "'");
  index_.emplace(name, entries_.size());
  Tensor2 grad(init.rows, init.cols);
  entries_.push_back(Entry{std::move(name), std::move(init), std::move(grad)});
  return entries_.back().value;
}

ParamStore::Entry& ParamStore::entry(std::string_view name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw ConfigError("unknown parameter '" + std::string(name) + "'");
  return entries_[it->second];
}

const ParamStore::Entry& ParamStore::entry(std::string_view name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw ConfigError("unknown parameter '" + std::string(name) + "'");
  return entries_[it->second];
}

std::size_t ParamStore::parameter_count() const noexcept {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.value.size();
  return n;
}

void ParamStore::zero_grad() {
  for (auto& e : entries_) e.grad.fill(0.0);
}

void ParamStore::check_finite() const {
  for (const auto& e : entries_) {
    if (!e.value.all_finite()) throw NonFiniteLoss("parameter '" + e.name + "' holds a non-finite value");
  }
}

bool ParamStore::operator==(const ParamStore& o) const {
  if (entries_.size() != o.entries_.size()) return false;
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (entries_[i].name != o.entries_[i].name || !(entries_[i].value == o.entries_[i].value)) return false;
  }
  return true;
}

void Adam::step(ParamStore& params) {
  auto& entries = params.entries();
  if (m_.empty()) {
    for (const auto& e : entries) {
      m_.emplace_back(e.value.rows, e.value.cols);
      v_.emplace_back(e.value.rows, e.value.cols);
    }
  }
  if (m_.size() != entries.size()) throw ConfigError("optimizer state does not match parameter store layout");
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t p = 0; p < entries.size(); ++p) {
    auto& value = entries[p].value.data;
    const auto& grad = entries[p].grad.data;
    auto& m = m_[p].data;
    auto& v = v_[p].data;
    for (std::size_t i = 0; i < value.size(); ++i) {
      m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * grad[i];
      v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * grad[i] * grad[i];
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      value[i] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
    }
  }
}

void adam_step(ParamStore& params, double lr, double beta1, double beta2, double eps) {
  Adam opt(AdamConfig{lr, beta1, beta2, eps});
  opt.step(params);
}

std::string serialize_checkpoint(const ParamStore& params, std::string_view header) {
  params.check_finite();
  io::ByteWriter w;
  w.bytes(kCheckpointMagic);
  w.long_string(header);
  w.u64(params.seed());
  w.u32(static_cast<std::uint32_t>(params.size()));
  for (const auto& e : params.entries()) {
    w.short_string(e.name);
    w.u32(static_cast<std::uint32_t>(e.value.rows));
    w.u32(static_cast<std::uint32_t>(e.value.cols));
    for (double v : e.value.data) w.f64(v);
  }
  return w.release();
}

ParamStore deserialize_checkpoint(std::string_view bytes, std::string* header_out) {
  io::ByteReader r(bytes);
  r.expect_magic(kCheckpointMagic);
  std::string header = r.long_string();
  ParamStore store(r.u64());
  const auto count = r.u32();
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name = r.short_string();
    const auto rows = r.u32();
    const auto cols = r.u32();
    Tensor2 t(rows, cols);
    for (double& v : t.data) v = r.f64();
    if (!t.all_finite()) throw FormatError("checkpoint tensor '" + name + "' holds a non-finite value");
    store.add(std::move(name), std::move(t));
  }
  if (!r.at_end()) throw FormatError("trailing bytes after checkpoint tensors");
  if (header_out) *header_out = std::move(header);
  return store;
}

void save_checkpoint(const std::string& path, const ParamStore& params, std::string_view header) {
  io::write_file_atomic(path, serialize_checkpoint(params, header));
}

ParamStore load_checkpoint(const std::string& path, std::string* header_out) {
  return deserialize_checkpoint(io::read_file(path), header_out);
}

}  // namespace gamic
