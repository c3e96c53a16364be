#pragma once

#include <cstdint>
#include <functional>
#include <span>

#include "themescreen/numeric/param.hpp"

namespace themescreen::numeric {

struct GradCheckOptions {
  double eps = 1e-5;
  // 0 checks every coordinate; otherwise this many per parameter, sampled.
  std::size_t coords_per_param = 0;
  std::uint64_t seed = 0;
  // Coordinates whose gradient is below this are compared in absolute terms.
  double denominator_floor = 1e-6;
};

// Evaluates the scalar loss at the current parameter values. When
// accumulate_grads is true it also adds analytic gradients into Param::grad.
using LossFunction = std::function<double(bool accumulate_grads)>;

// Max over checked coordinates of |analytic − numeric| / max(floor, |numeric|, |analytic|),
// with numeric from central differences. Parameter values are restored and
// gradients hold the analytic values on return. Throws on a non-finite loss.
double finite_difference_check(const LossFunction& loss, std::span<Param* const> params,
                               const GradCheckOptions& options = {});

}  // namespace themescreen::numeric
