#include "entdecon/rng.hpp"

#include <boost/math/special_functions/erf.hpp>
#include <cmath>

namespace entdecon {

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double normal_quantile(double u) { return -std::sqrt(2.0) * boost::math::erfc_inv(2.0 * u); }

double CounterRng::normal() { return normal_quantile(uniform()); }

}  // namespace entdecon
