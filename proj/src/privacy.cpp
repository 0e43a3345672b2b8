#include "dpgp/privacy.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace dpgp {

void DPParams::validate() const {
  if (!(epsilon > 0.0)) throw std::invalid_argument("epsilon must be positive");
  if (!(delta > 0.0 && delta < 1.0))
    throw std::invalid_argument("delta must lie in (0, 1), got " + std::to_string(delta));
  if (!(d > 0.0) || !std::isfinite(d))
    throw std::invalid_argument("sensitivity d must be positive");
}

double c_delta(double delta, GaussianVariant variant) {
  if (!(delta > 0.0 && delta < 1.0))
    throw std::invalid_argument("delta must lie in (0, 1), got " + std::to_string(delta));
  const double numerator = variant == GaussianVariant::rkhs ? 1.25 : 2.0;
  return std::sqrt(2.0 * std::log(numerator / delta));
}

}  // namespace dpgp
