#include "entdecon/generate.hpp"

#include <algorithm>

#include "entdecon/error.hpp"
#include "entdecon/rng.hpp"

namespace entdecon {

Sample generate_sample(const DiscreteMeasure& pstar, const NoiseModel& noise, std::size_t n, std::uint64_t seed) {
  if (n == 0) throw Error(ErrorCode::InvalidArgument, "generate: n must be at least 1");
  if (pstar.dim() != noise.dim()) throw Error(ErrorCode::DimensionMismatch, "generate: pstar and noise dimensions differ");
  std::vector<double> cdf(pstar.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < pstar.size(); ++i) cdf[i] = (acc += pstar.weight(i));

  CounterRng rng(seed);
  std::vector<Point> points;
  points.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double u = rng.uniform() * acc;
    const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    const std::size_t a = std::min<std::size_t>(static_cast<std::size_t>(it - cdf.begin()), pstar.size() - 1);
    Point y = pstar.atom(a);
    const Point z = noise.sample(rng);
    for (std::size_t d = 0; d < y.size(); ++d) y[d] += z[d];
    points.push_back(std::move(y));
  }
  return Sample(std::move(points));
}

}  // namespace entdecon
