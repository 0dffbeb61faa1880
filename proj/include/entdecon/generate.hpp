#pragma once

#include <cstdint>

#include "entdecon/costs.hpp"
#include "entdecon/measures.hpp"

namespace entdecon {

// Y_i = X_i + Z_i with X_i ~ pstar (inverse CDF on the weights, one uniform
// draw) and Z_i from the noise sampler, all from one CounterRng stream.
Sample generate_sample(const DiscreteMeasure& pstar, const NoiseModel& noise, std::size_t n, std::uint64_t seed);

}  // namespace entdecon
