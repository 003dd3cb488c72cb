#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "gamic/autodiff.h"
#include "gamic/params.h"

namespace gamic {

struct GradCheckOptions {
  double step = 1e-5;        // central-difference half width
  double tolerance = 1e-4;   // max allowed relative error per entry
  /// Relative error is |analytic - numeric| / max(|analytic|, |numeric|, floor).
  double denominator_floor = 1e-6;
  /// 0 checks every entry; otherwise a seeded sample of this many per tensor.
  std::size_t max_entries_per_tensor = 0;
  std::uint64_t seed = 0;
};

struct GradCheckEntry {
  std::string name;
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  bool pass = true;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> tensors;

  bool pass() const;
  double max_rel_error() const;
};

/// Builds the scalar loss on a fresh tape.
using LossBuilder = std::function<ad::Var(ad::Tape&, ParamStore&)>;

/// Runs one forward/backward pass and returns the loss; gradients are left in
/// `params` (zeroed first).
double forward_backward(ParamStore& params, const LossBuilder& loss);

/// Compares `analytic` (one tensor per parameter, store order) against central
/// differences of `loss`.
GradCheckReport compare_with_finite_differences(ParamStore& params, const std::vector<Tensor2>& analytic,
                                                const LossBuilder& loss, const GradCheckOptions& opts = {});

/// forward_backward followed by compare_with_finite_differences.
GradCheckReport finite_diff_check(ParamStore& params, const LossBuilder& loss, const GradCheckOptions& opts = {});

}  // namespace gamic
