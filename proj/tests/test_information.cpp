#include <doctest.h>

#include <cmath>
#include <random>

#include "entdecon/coupling.hpp"
#include "entdecon/information.hpp"
#include "entdecon/measures.hpp"
#include "oracles.hpp"

using namespace entdecon;

namespace {

std::vector<Point> line_atoms(std::size_t n, double offset) {
  std::vector<Point> a(n);
  for (std::size_t i = 0; i < n; ++i) a[i] = {offset + static_cast<double>(i)};
  return a;
}

std::vector<double> random_simplex(std::mt19937_64& gen, std::size_t n, double zero_prob) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> w(n);
  double s = 0.0;
  for (auto& x : w) {
    x = u(gen) < zero_prob ? 0.0 : u(gen);
    s += x;
  }
  if (s == 0.0) {
    w[0] = 1.0;
    s = 1.0;
  }
  for (auto& x : w) x /= s;
  return w;
}

}  // namespace

TEST_CASE("entropy and divergence basics") {
  const std::vector<double> u{0.25, 0.25, 0.25, 0.25};
  CHECK(shannon_entropy(u) == doctest::Approx(std::log(4.0)));
  const std::vector<double> d{1.0, 0.0};
  CHECK(shannon_entropy(d) == 0.0);
  CHECK(kl_divergence(u, u) == 0.0);
  const std::vector<double> a{0.5, 0.5}, b{1.0, 0.0};
  CHECK(std::isinf(kl_divergence(a, b)));
  CHECK(kl_divergence(b, a) == doctest::Approx(std::log(2.0)));
}

TEST_CASE("divergence between measures aligns atoms by position") {
  const DiscreteMeasure a(1, {{0.0}, {1.0}}, {0.5, 0.5});
  const DiscreteMeasure b(1, {{1.0}, {0.0}}, {0.25, 0.75});
  CHECK(kl_divergence(a, b) == doctest::Approx(0.5 * std::log(0.5 / 0.75) + 0.5 * std::log(0.5 / 0.25)));
  const DiscreteMeasure c(1, {{2.0}}, {1.0});
  CHECK(std::isinf(kl_divergence(a, c)));
}

TEST_CASE("divergence agrees with a direct sum on random inputs") {
  std::mt19937_64 gen(11);
  for (int t = 0; t < 200; ++t) {
    const auto a = random_simplex(gen, 5, 0.2);
    const auto b = random_simplex(gen, 5, 0.0);
    CHECK(kl_divergence(a, b) == doctest::Approx(oracle::kl(a, b)).epsilon(1e-12));
  }
}

TEST_CASE("mutual information of products vanishes and of the diagonal is the entropy") {
  const Eigen::Vector3d p(0.2, 0.3, 0.5);
  const Eigen::Vector2d q(0.6, 0.4);
  CHECK(std::abs(mutual_information(Eigen::MatrixXd(p * q.transpose()))) < 1e-15);
  const Eigen::MatrixXd diag = p.asDiagonal();
  CHECK(mutual_information(diag) == doctest::Approx(shannon_entropy(std::vector<double>{0.2, 0.3, 0.5})));
}

TEST_CASE("product decomposition of the divergence on random couplings") {
  std::mt19937_64 gen(5);
  std::uniform_int_distribution<std::size_t> side(1, 6);
  for (int t = 0; t < 300; ++t) {
    const std::size_t m = side(gen), n = side(gen);
    const auto cells = random_simplex(gen, m * n, 0.2);
    Eigen::MatrixXd mass(m, n);
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < n; ++j) mass(i, j) = cells[i * n + j];
    }
    const Coupling g(1, line_atoms(m, 0.0), line_atoms(n, 100.0), mass);
    const DiscreteMeasure alpha(1, line_atoms(m, 0.0), random_simplex(gen, m, 0.0));
    const DiscreteMeasure beta(1, line_atoms(n, 100.0), random_simplex(gen, n, 0.0));
    const auto check = kl_product_decomposition_check(g, alpha, beta);
    // Independent left-hand side: divergence from the product, cell by cell.
    std::vector<double> flat, prod;
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        flat.push_back(mass(i, j));
        prod.push_back(alpha.weight(i) * beta.weight(j));
      }
    }
    CHECK(check.lhs == doctest::Approx(oracle::kl(flat, prod)).epsilon(1e-12));
    CHECK(check.residual <= 1e-10);
  }
}

TEST_CASE("coupling marginals and conditionals") {
  Eigen::MatrixXd mass(2, 2);
  mass << 0.1, 0.3, 0.2, 0.4;
  const Coupling g(1, {{0.0}, {1.0}}, {{5.0}, {6.0}}, mass);
  CHECK(g.x_marginal().weight(0) == doctest::Approx(0.4));
  CHECK(g.y_marginal().weight(1) == doctest::Approx(0.7));
  CHECK(g.column_conditional(1).weight(0) == doctest::Approx(0.3 / 0.7));
  const auto p = Coupling::product(g.x_marginal(), g.y_marginal());
  CHECK(mutual_information(p) == doctest::Approx(0.0).epsilon(1e-15));
}
