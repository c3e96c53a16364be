#include "themescreen/numeric/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "themescreen/errors.hpp"
#include "themescreen/rng.hpp"

namespace themescreen::numeric {

namespace {

double checked(double loss) {
  if (!std::isfinite(loss)) throw Error("finite_difference_check: loss is not finite");
  return loss;
}

}  // namespace

double finite_difference_check(const LossFunction& loss, std::span<Param* const> params,
                               const GradCheckOptions& options) {
  if (!(options.eps > 0.0)) throw Error("finite_difference_check: eps must be positive");
  for (Param* p : params) p->zero_grad();
  checked(loss(true));

  Rng rng(options.seed);
  double worst = 0.0;
  for (Param* p : params) {
    auto value = p->value.values();
    std::vector<std::size_t> coords(value.size());
    std::iota(coords.begin(), coords.end(), std::size_t{0});
    if (options.coords_per_param > 0 && options.coords_per_param < coords.size()) {
      rng.shuffle(std::span(coords));
      coords.resize(options.coords_per_param);
    }
    for (std::size_t k : coords) {
      const double saved = value[k];
      value[k] = saved + options.eps;
      const double up = checked(loss(false));
      value[k] = saved - options.eps;
      const double down = checked(loss(false));
      value[k] = saved;
      const double numeric = (up - down) / (2.0 * options.eps);
      const double analytic = p->grad.values()[k];
      const double err = std::abs(analytic - numeric) / std::max({options.denominator_floor, std::abs(numeric), std::abs(analytic)});
      worst = std::max(worst, err);
    }
  }
  return worst;
}

}  // namespace themescreen::numeric
