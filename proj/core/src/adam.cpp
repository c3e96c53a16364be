#include "themescreen/numeric/adam.hpp"

#include <cmath>

#include "themescreen/errors.hpp"

namespace themescreen::numeric {

void Adam::step(std::span<Param* const> params) {
  if (states_.empty()) {
    states_.reserve(params.size());
    for (const Param* p : params) {
      states_.push_back({Matrix(p->value.rows(), p->value.cols()), Matrix(p->value.rows(), p->value.cols())});
    }
  }
  if (states_.size() != params.size()) throw ShapeError("Adam::step: parameter list changed between steps");

  ++t_;
  const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Param& p = *params[i];
    auto value = p.value.values();
    auto grad = p.grad.values();
    auto m = states_[i].m.values();
    auto v = states_[i].v.values();
    if (m.size() != value.size()) throw ShapeError("Adam::step: parameter shape changed between steps");
    for (std::size_t k = 0; k < value.size(); ++k) {
      m[k] = config_.beta1 * m[k] + (1.0 - config_.beta1) * grad[k];
      v[k] = config_.beta2 * v[k] + (1.0 - config_.beta2) * grad[k] * grad[k];
      const double m_hat = m[k] / c1;
      const double v_hat = v[k] / c2;
      value[k] -= config_.learning_rate * m_hat / (std::sqrt(v_hat) + config_.epsilon);
    }
    p.zero_grad();
  }
}

}  // namespace themescreen::numeric
