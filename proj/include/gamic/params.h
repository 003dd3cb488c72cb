#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "gamic/tensor.h"

namespace gamic {

/// Named learnable tensors, each with a same-shape gradient slot.
/// Iteration order is insertion order, which keeps optimizer updates and
/// serialization deterministic.
class ParamStore {
 public:
  struct Entry {
    std::string name;
    Tensor2 value;
    Tensor2 grad;
  };

  explicit ParamStore(std::uint64_t seed = 0) : seed_(seed) {}

  /// Throws ConfigError on a duplicate name.
  Tensor2& add(std::string name, Tensor2 init);

  bool contains(std::string_view name) const { return index_.find(name) != index_.end(); }
  Entry& entry(std::string_view name);
  const Entry& entry(std::string_view name) const;
  Tensor2& value(std::string_view name) { return entry(name).value; }
  const Tensor2& value(std::string_view name) const { return entry(name).value; }
  Tensor2& grad(std::string_view name) { return entry(name).grad; }

  std::vector<Entry>& entries() noexcept { return entries_; }
  const std::vector<Entry>& entries() const noexcept { return entries_; }
  std::size_t size() const noexcept { return entries_.size(); }
  std::size_t parameter_count() const noexcept;

  void zero_grad();
  std::uint64_t seed() const noexcept { return seed_; }
  void set_seed(std::uint64_t s) noexcept { seed_ = s; }

  /// Throws NonFiniteLoss naming the first tensor holding NaN/Inf.
  void check_finite() const;

  bool operator==(const ParamStore& o) const;

 private:
  std::uint64_t seed_;
  std::vector<Entry> entries_;
  std::map<std::string, std::size_t, std::less<>> index_;
};

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam with bias correction. Moment buffers are keyed by parameter position,
/// so the optimizer must always be used with the same store layout.
class Adam {
 public:
  explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

  void step(ParamStore& params);
  std::uint64_t steps() const noexcept { return t_; }
  const AdamConfig& config() const noexcept { return cfg_; }

 private:
  AdamConfig cfg_;
  std::uint64_t t_ = 0;
  std::vector<Tensor2> m_, v_;
};

/// One-shot update with a fresh optimizer state (step counter 0 -> 1).
void adam_step(ParamStore& params, double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

// Checkpoint container: "GCKP\x01", u32 header length + header bytes (free
// text, used for the encoder config), u64 rng seed, u32 tensor count, then per
// tensor u16 name length + name, u32 rows, u32 cols, rows*cols f64 values.
std::string serialize_checkpoint(const ParamStore& params, std::string_view header);
ParamStore deserialize_checkpoint(std::string_view bytes, std::string* header_out = nullptr);
void save_checkpoint(const std::string& path, const ParamStore& params, std::string_view header);
ParamStore load_checkpoint(const std::string& path, std::string* header_out = nullptr);

}  // namespace gamic
