#include "gamic/tensor.h"

#include <stdexcept>

namespace gamic {

Tensor2::Tensor2(std::size_t r, std::size_t c, std::vector<double> values) : rows(r), cols(c), data(std::move(values)) {
  if (data.size() != r * c) throw std::invalid_argument("Tensor2: data length does not match shape");
}

Tensor2 Tensor2::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  Tensor2 t;
  t.rows = rows.size();
  t.cols = rows.size() ? rows.begin()->size() : 0;
  for (const auto& r : rows) {
    if (r.size() != t.cols) throw std::invalid_argument("Tensor2::from_rows: ragged rows");
    t.data.insert(t.data.end(), r.begin(), r.end());
  }
  return t;
}

Tensor2 Tensor2::row_vector(std::span<const double> values) {
  return Tensor2(1, values.size(), std::vector<double>(values.begin(), values.end()));
}

}  // namespace gamic
