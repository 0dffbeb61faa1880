#include <doctest.h>

#include <cmath>
#include <numbers>

#include <nlohmann/json.hpp>

#include "entdecon/costs.hpp"
#include "entdecon/error.hpp"
#include "entdecon/rng.hpp"
#include "oracles.hpp"

using namespace entdecon;

namespace {

double c1(const CostModel& m, double x, double y) {
  const std::vector<double> a{x}, b{y};
  return cost(m, a, b);
}

double density(const NoiseModel& n, double z) {
  const std::vector<double> v{z};
  return std::exp(log_density(n, v));
}

}  // namespace

TEST_CASE("cost values") {
  CHECK(c1(CostModel{GaussianHalfSq{2.0}, 1}, 1.0, 4.0) == doctest::Approx(4.5));
  CHECK(c1(CostModel{PExponential{1.0, 1.0}, 1}, 1.0, -2.0) == doctest::Approx(3.0));
  CHECK(c1(CostModel{PExponential{3.0, 2.0}, 1}, 0.0, 2.0) == doctest::Approx(4.0));
  const CostModel wfr{WfrCosine{}, 1};
  CHECK(c1(wfr, 0.0, 0.0) == doctest::Approx(0.0));
  CHECK(c1(wfr, 0.0, 1.0) == doctest::Approx(-std::log(std::cos(1.0) * std::cos(1.0))));
  CHECK(is_forbidden(c1(wfr, 0.0, 2.0)));
  CHECK(is_forbidden(c1(wfr, 0.0, std::numbers::pi / 2)));
  const std::vector<double> x{0.0, 0.0}, y{3.0, 4.0};
  CHECK(cost(CostModel{GaussianHalfSq{1.0}, 2}, x, y) == doctest::Approx(12.5));
}

TEST_CASE("cost matrix layout") {
  const auto c = cost_matrix(CostModel{GaussianHalfSq{1.0}, 1}, {{0.0}, {1.0}}, {{0.0}, {2.0}, {3.0}});
  REQUIRE(c.rows() == 2);
  REQUIRE(c.cols() == 3);
  CHECK(c(1, 2) == doctest::Approx(2.0));
}

TEST_CASE("noise densities integrate to one") {
  // Integrated over each half-line so that the kink at zero sits on an endpoint.
  for (const auto& noise : {NoiseModel::gaussian(0.5), NoiseModel::gaussian(2.0), NoiseModel::p_exponential(1.0),
                            NoiseModel::p_exponential(3.0, 2.0), NoiseModel::p_exponential(1.5)}) {
    auto f = [&](double z) { return density(noise, z); };
    const double mass = oracle::simpson(f, -60.0, 0.0, 60000) + oracle::simpson(f, 0.0, 60.0, 60000);
    CHECK(mass == doctest::Approx(1.0).epsilon(1e-9));
  }
  const auto wfr = NoiseModel::wfr_cosine();
  const double half = std::numbers::pi / 2;
  CHECK(oracle::simpson([&](double z) { return density(wfr, z); }, -half, half, 20000) ==
        doctest::Approx(1.0).epsilon(1e-10));
  CHECK(density(wfr, 2.0) == 0.0);
}

TEST_CASE("log-normalizer relation between density and cost") {
  for (const auto& noise : {NoiseModel::gaussian(0.7), NoiseModel::p_exponential(1.0),
                            NoiseModel::p_exponential(3.0), NoiseModel::wfr_cosine()}) {
    const std::vector<double> z{0.4}, zero{0.0};
    const double lhs = log_density(noise, z);
    const double rhs = log_normalizer(noise) - cost(noise.cost_model(), z, zero) / noise.effective_sigma2();
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-14));
  }
  // Closed form for the Gaussian.
  CHECK(log_normalizer(NoiseModel::gaussian(2.0)) == doctest::Approx(-0.5 * std::log(2 * std::numbers::pi * 2.0)));
}

TEST_CASE("negative log-density cost has the density built in") {
  const auto noise = NoiseModel::p_exponential(1.0);
  const auto c = negative_log_density_cost(noise);
  const std::vector<double> x{0.2}, y{1.0};
  const std::vector<double> z{0.8};
  CHECK(cost(c, x, y) == doctest::Approx(-log_density(noise, z)));
  CHECK(cost_lower_bound(c) == doctest::Approx(-log_normalizer(noise)));
}

TEST_CASE("noise samplers match their first two moments") {
  CounterRng rng(7);
  const auto g = NoiseModel::gaussian(2.0);
  const auto l = NoiseModel::p_exponential(1.0);
  const int n = 40000;
  double sg = 0, sg2 = 0, sl = 0, sl2 = 0;
  for (int i = 0; i < n; ++i) {
    const double a = g.sample(rng)[0];
    const double b = l.sample(rng)[0];
    sg += a;
    sg2 += a * a;
    sl += b;
    sl2 += b * b;
  }
  CHECK(std::abs(sg / n) < 5 * std::sqrt(2.0 / n));
  CHECK(sg2 / n == doctest::Approx(2.0).epsilon(0.05));
  CHECK(std::abs(sl / n) < 5 * std::sqrt(2.0 / n));
  CHECK(sl2 / n == doctest::Approx(2.0).epsilon(0.06));  // Laplace(1) variance
  const auto w = NoiseModel::wfr_cosine();
  for (int i = 0; i < 1000; ++i) CHECK(std::abs(w.sample(rng)[0]) < std::numbers::pi / 2);
}

TEST_CASE("cost and noise specs from JSON") {
  const auto n = noise_from_json(nlohmann::json::parse(R"({"kind":"gaussian","sigma2":3})"));
  CHECK(n.effective_sigma2() == doctest::Approx(3.0));
  const auto wrapped = cost_from_json(nlohmann::json::parse(R"({"cost":{"kind":"laplace"}})"));
  CHECK(cost_name(wrapped) == "p-exponential");
  CHECK_THROWS_AS(cost_from_json(nlohmann::json::parse(R"({"kind":"quartic"})")), Error);
  CHECK_THROWS_AS(cost_from_json(nlohmann::json::parse(R"({"kind":"gaussian"})")), Error);
  CHECK_THROWS_AS(noise_from_json(nlohmann::json::parse(R"({"kind":"p-exponential","p":-1})")), Error);
  const auto back = noise_from_json(to_json(NoiseModel::p_exponential(3.0, 2.0)));
  CHECK(back.name() == NoiseModel::p_exponential(3.0, 2.0).name());
}
