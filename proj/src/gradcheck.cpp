#include "gamic/gradcheck.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "gamic/errors.h"
#include "gamic/rng.h"

namespace gamic {

bool GradCheckReport::pass() const {
  return std::all_of(tensors.begin(), tensors.end(), [](const auto& e) { return e.pass; });
}

double GradCheckReport::max_rel_error() const {
  double m = 0.0;
  for (const auto& e : tensors) m = std::max(m, e.max_rel_error);
  return m;
}

double forward_backward(ParamStore& params, const LossBuilder& loss) {
  params.zero_grad();
  ad::Tape tape;
  return tape.backward(loss(tape, params));
}

namespace {

double evaluate(ParamStore& params, const LossBuilder& loss) {
  ad::Tape tape;
  const double v = loss(tape, params).value().data.at(0);
  if (!std::isfinite(v)) throw NonFiniteLoss("loss is not finite during finite differencing");
  return v;
}

}  // namespace

GradCheckReport compare_with_finite_differences(ParamStore& params, const std::vector<Tensor2>& analytic,
                                                const LossBuilder& loss, const GradCheckOptions& opts) {
  if (analytic.size() != params.size()) throw ConfigError("analytic gradient count does not match parameter count");
  GradCheckReport report;
  Rng rng(opts.seed);
  for (std::size_t p = 0; p < params.size(); ++p) {
    auto& entry = params.entries()[p];
    if (!analytic[p].same_shape(entry.value)) throw ConfigError("analytic gradient shape mismatch for " + entry.name);
    std::vector<std::size_t> idx(entry.value.size());
    std::iota(idx.begin(), idx.end(), 0);
    if (opts.max_entries_per_tensor > 0 && idx.size() > opts.max_entries_per_tensor) {
      rng.shuffle(std::span<std::size_t>(idx));
      idx.resize(opts.max_entries_per_tensor);
      std::sort(idx.begin(), idx.end());
    }
    GradCheckEntry out{entry.name, 0.0, idx.size(), true};
    for (std::size_t i : idx) {
      double& x = params.entries()[p].value.data[i];
      const double saved = x;
      x = saved + opts.step;
      const double up = evaluate(params, loss);
      x = saved - opts.step;
      const double down = evaluate(params, loss);
      x = saved;
      const double numeric = (up - down) / (2.0 * opts.step);
      const double a = analytic[p].data[i];
      const double denom = std::max({std::abs(a), std::abs(numeric), opts.denominator_floor});
      out.max_rel_error = std::max(out.max_rel_error, std::abs(a - numeric) / denom);
    }
    out.pass = out.max_rel_error < opts.tolerance;
    report.tensors.push_back(std::move(out));
  }
  return report;
}

GradCheckReport finite_diff_check(ParamStore& params, const LossBuilder& loss, const GradCheckOptions& opts) {
  forward_backward(params, loss);
  std::vector<Tensor2> analytic;
  for (const auto& e : params.entries()) analytic.push_back(e.grad);
  return compare_with_finite_differences(params, analytic, loss, opts);
}

}  // namespace gamic
