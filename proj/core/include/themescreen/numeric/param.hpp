#pragma once

#include "themescreen/numeric/matrix.hpp"

namespace themescreen::numeric {

// Trainable value with a gradient buffer of the same shape.
struct Param {
  Matrix value;
  Matrix grad;

  Param() = default;
  explicit Param(Matrix v) : value(std::move(v)), grad(value.rows(), value.cols()) {}

  void zero_grad() { grad.fill(0.0); }
};

}  // namespace themescreen::numeric
