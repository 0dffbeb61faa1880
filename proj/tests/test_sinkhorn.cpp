#include <doctest.h>

#include <cmath>
#include <random>

#include "entdecon/costs.hpp"
#include "entdecon/error.hpp"
#include "entdecon/information.hpp"
#include "entdecon/measures.hpp"
#include "entdecon/sinkhorn.hpp"
#include "oracles.hpp"

using namespace entdecon;

namespace {

const CostModel kSq{GaussianHalfSq{1.0}, 1};

DiscreteMeasure random_measure(std::mt19937_64& gen, std::size_t n) {
  std::uniform_real_distribution<double> loc(-2.0, 2.0), w(0.1, 1.0);
  std::vector<Point> atoms(n);
  std::vector<double> weights(n);
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    atoms[i] = {loc(gen)};
    weights[i] = w(gen);
    s += weights[i];
  }
  for (auto& x : weights) x /= s;
  return DiscreteMeasure(1, atoms, weights);
}

}  // namespace

TEST_CASE("two Diracs: the only coupling costs half the squared distance") {
  const auto s = sinkhorn(DiscreteMeasure::dirac({1.0}), DiscreteMeasure::dirac({4.0}), kSq, 1.0);
  CHECK(s.objective == doctest::Approx(4.5));
  CHECK(s.mutual_information == doctest::Approx(0.0));
}

TEST_CASE("matches direct primal minimization on small supports") {
  std::mt19937_64 gen(2024);
  std::uniform_int_distribution<std::size_t> side(1, 3);
  std::uniform_real_distribution<double> s2(0.1, 3.0);
  for (int t = 0; t < 60; ++t) {
    const auto mu = random_measure(gen, side(gen));
    const auto nu = random_measure(gen, side(gen));
    const double sigma2 = s2(gen);
    const auto sol = sinkhorn(mu, nu, kSq, sigma2);
    const auto ref = oracle::entropic_ot_primal(cost_matrix(kSq, mu.atoms(), nu.atoms()), weights_vector(mu),
                                                weights_vector(nu), sigma2);
    CHECK(sol.objective == doctest::Approx(ref.objective).epsilon(1e-9));
    CHECK((sol.coupling.mass() - ref.plan).cwiseAbs().maxCoeff() < 1e-7);
    CHECK(sol.marginal_error <= 1e-10);
  }
}

TEST_CASE("row potential is the gradient of the value in the first marginal") {
  std::mt19937_64 gen(9);
  const auto mu = random_measure(gen, 4);
  const auto nu = random_measure(gen, 5);
  const double sigma2 = 0.7;
  SolverConfig tight;
  tight.tolerance = 1e-14;
  const auto base = sinkhorn(mu, nu, kSq, sigma2, tight);
  std::vector<double> dir{0.3, -0.1, -0.25, 0.05};
  const double h = 1e-5;
  auto shifted = [&](double s) {
    auto w = mu.weights();
    for (std::size_t i = 0; i < w.size(); ++i) w[i] += s * dir[i];
    return sinkhorn(DiscreteMeasure(1, mu.atoms(), w), nu, kSq, sigma2, tight).objective;
  };
  const double fd = (shifted(h) - shifted(-h)) / (2 * h);
  double directional = 0.0;
  for (std::size_t i = 0; i < dir.size(); ++i) directional += dir[i] * base.dual_row(static_cast<Eigen::Index>(i));
  CHECK(fd == doctest::Approx(directional).epsilon(1e-6));
}

TEST_CASE("entropy and mutual-information formulations differ by the marginal entropies") {
  std::mt19937_64 gen(3);
  for (int t = 0; t < 20; ++t) {
    const auto mu = random_measure(gen, 3);
    const auto nu = random_measure(gen, 4);
    const double sigma2 = 0.2 + 0.1 * t;
    const auto off = entropy_formulation_offset(mu, nu, kSq, sigma2);
    const double expected = sigma2 * (shannon_entropy(mu) + shannon_entropy(nu));
    CHECK(off.measured == doctest::Approx(expected).epsilon(1e-10));
    CHECK(off.predicted == doctest::Approx(expected).epsilon(1e-14));
  }
}

TEST_CASE("small entropic weight stays finite in the log domain") {
  std::mt19937_64 gen(17);
  const auto mu = random_measure(gen, 6);
  const auto nu = random_measure(gen, 6);
  const auto s = sinkhorn(mu, nu, kSq, 1e-3);
  CHECK(std::isfinite(s.objective));
  CHECK(s.marginal_error <= 1e-10);
  CHECK(s.coupling.mass().minCoeff() >= 0.0);
}

TEST_CASE("forbidden routes: infeasible when a row cannot be served") {
  const CostModel wfr{WfrCosine{}, 1};
  const DiscreteMeasure mu(1, {{0.0}, {10.0}}, {0.5, 0.5});
  const DiscreteMeasure nu(1, {{0.1}, {0.2}}, {0.5, 0.5});
  try {
    sinkhorn(mu, nu, wfr, 1.0);
    FAIL("expected infeasibility");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Infeasible);
  }
  // Feasible with a forbidden cell (distance 2.5 > pi/2): the plan never uses it.
  const DiscreteMeasure a(1, {{0.0}, {2.0}}, {0.5, 0.5});
  const DiscreteMeasure b(1, {{0.5}, {2.5}}, {0.5, 0.5});
  const auto s = sinkhorn(a, b, wfr, 1.0);
  CHECK(s.coupling.mass()(0, 1) == 0.0);
  CHECK(s.coupling.mass()(1, 0) > 0.0);
  CHECK(s.marginal_error <= 1e-10);
}

TEST_CASE("iteration cap reports non-convergence with the last error") {
  std::mt19937_64 gen(1);
  const auto mu = random_measure(gen, 5);
  const auto nu = random_measure(gen, 5);
  SolverConfig cfg;
  cfg.max_iterations = 3;
  cfg.tolerance = 1e-15;
  try {
    sinkhorn(mu, nu, kSq, 0.05, cfg);
    FAIL("expected non-convergence");
  } catch (const NotConvergedError& e) {
    CHECK(e.iterations() <= 3);
    CHECK(e.last_marginal_error() > 0.0);
  }
}

TEST_CASE("invalid solver settings are rejected") {
  const auto d = DiscreteMeasure::dirac({0.0});
  CHECK_THROWS_AS(sinkhorn(d, d, kSq, 0.0), Error);
  SolverConfig bad;
  bad.tolerance = -1.0;
  CHECK_THROWS_AS(sinkhorn(d, d, kSq, 1.0, bad), Error);
  CHECK_THROWS_AS(sinkhorn(d, DiscreteMeasure::dirac({0.0, 1.0}), kSq, 1.0), Error);
}
