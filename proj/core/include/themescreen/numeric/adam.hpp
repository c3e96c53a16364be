#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "themescreen/numeric/param.hpp"

namespace themescreen::numeric {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  Matrix m;
  Matrix v;
};

class Adam {
 public:
  explicit Adam(AdamConfig config = {}) : config_(config) {}

  // Bias-corrected Adam update, then zeroes every gradient. The parameter list
  // must be the same, in the same order, on every call.
  void step(std::span<Param* const> params);

  std::uint64_t steps() const { return t_; }
  const AdamConfig& config() const { return config_; }
  std::span<const AdamState> states() const { return states_; }

 private:
  AdamConfig config_;
  std::uint64_t t_ = 0;
  std::vector<AdamState> states_;
};

}  // namespace themescreen::numeric
