#include <doctest.h>

#include <cmath>

#include "entdecon/costs.hpp"
#include "entdecon/generate.hpp"
#include "entdecon/measures.hpp"
#include "entdecon/rng.hpp"

using namespace entdecon;

TEST_CASE("counter generator reproduces the reference SplitMix64 stream") {
  // First outputs of SplitMix64 seeded with 0 and with 1234567.
  CounterRng a(0);
  CHECK(a.next_u64() == 0xE220A8397B1DCDAFULL);
  CHECK(a.next_u64() == 0x6E789E6AA1B965F4ULL);
  CHECK(a.next_u64() == 0x06C45D188009454FULL);
  CounterRng b(1234567);
  CHECK(b.next_u64() == 6457827717110365317ULL);
  CHECK(b.next_u64() == 3203168211198807973ULL);
  CHECK(CounterRng::at(1234567, 2) == 3203168211198807973ULL);
}

TEST_CASE("uniform draws lie strictly inside the unit interval") {
  CounterRng r(99);
  for (int i = 0; i < 10000; ++i) {
    const double u = r.uniform();
    CHECK(u > 0.0);
    CHECK(u < 1.0);
  }
}

TEST_CASE("normal quantile inverts the normal CDF") {
  for (double u : {1e-12, 1e-6, 0.01, 0.3, 0.5, 0.8, 0.999, 1.0 - 1e-9}) {
    CHECK(normal_cdf(normal_quantile(u)) == doctest::Approx(u).epsilon(1e-12));
  }
  CHECK(normal_cdf(0.0) == doctest::Approx(0.5));
  CHECK(normal_cdf(1.959963984540054) == doctest::Approx(0.975).epsilon(1e-14));
}

TEST_CASE("samples are deterministic per seed") {
  const DiscreteMeasure p(1, {{0.0}, {4.0}}, {0.5, 0.5});
  const auto noise = NoiseModel::gaussian(1.0);
  CHECK(generate_sample(p, noise, 50, 7).points() == generate_sample(p, noise, 50, 7).points());
  CHECK(generate_sample(p, noise, 50, 7).points() != generate_sample(p, noise, 50, 8).points());
}

TEST_CASE("a Dirac at zero yields pure noise") {
  const auto s = generate_sample(DiscreteMeasure::dirac({0.0}), NoiseModel::gaussian(1.0), 20000, 3);
  double m = 0, v = 0;
  for (const auto& p : s.points()) m += p[0];
  m /= 20000;
  for (const auto& p : s.points()) v += (p[0] - m) * (p[0] - m);
  v /= 19999;
  CHECK(std::abs(m) < 5 * std::sqrt(1.0 / 20000));
  CHECK(v == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("empirical mean of a two-point mixture") {
  const DiscreteMeasure p(1, {{0.0}, {4.0}}, {0.5, 0.5});
  const auto s = generate_sample(p, NoiseModel::gaussian(1.0), 10000, 11);
  double m = 0;
  for (const auto& x : s.points()) m += x[0];
  CHECK(std::abs(m / 10000 - 2.0) < 0.1);
}

TEST_CASE("zero-weight atoms are never drawn") {
  const DiscreteMeasure p(1, {{0.0}, {100.0}}, {1.0, 0.0});
  const auto s = generate_sample(p, NoiseModel::p_exponential(1.0), 2000, 5);
  for (const auto& x : s.points()) CHECK(std::abs(x[0]) < 50.0);
}
