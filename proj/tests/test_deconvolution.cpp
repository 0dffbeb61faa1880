#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include <nlohmann/json.hpp>

#include "entdecon/costs.hpp"
#include "entdecon/deconvolution.hpp"
#include "entdecon/error.hpp"
#include "entdecon/generate.hpp"
#include "entdecon/relaxed.hpp"
#include "entdecon/sinkhorn.hpp"
#include "oracles.hpp"

using namespace entdecon;

namespace {

const CostModel kSq{GaussianHalfSq{1.0}, 1};

std::vector<Point> linspace(double a, double b, std::size_t m) {
  std::vector<Point> g(m);
  for (std::size_t i = 0; i < m; ++i) g[i] = {a + (b - a) * static_cast<double>(i) / static_cast<double>(m - 1)};
  return g;
}

Sample draw(std::uint64_t seed, std::size_t n, double s2) {
  const DiscreteMeasure pstar(1, {{-1.5}, {0.5}, {2.0}}, {0.3, 0.3, 0.4});
  return generate_sample(pstar, NoiseModel::gaussian(s2), n, seed);
}

Eigen::MatrixXd gauss_density(const Sample& s, const std::vector<Point>& grid, double s2) {
  Eigen::MatrixXd d(static_cast<Eigen::Index>(s.size()), static_cast<Eigen::Index>(grid.size()));
  for (std::size_t i = 0; i < s.size(); ++i) {
    for (std::size_t j = 0; j < grid.size(); ++j) {
      const double z = s.points()[i][0] - grid[j][0];
      d(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          std::exp(-z * z / (2 * s2)) / std::sqrt(2 * std::numbers::pi * s2);
    }
  }
  return d;
}

std::pair<double, double> sample_range(const Sample& s) {
  double lo = s.points()[0][0], hi = lo;
  for (const auto& p : s.points()) {
    lo = std::min(lo, p[0]);
    hi = std::max(hi, p[0]);
  }
  return {lo, hi};
}

}  // namespace

TEST_CASE("grid NPMLE agrees with projected gradient ascent and is stationary") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto s = draw(seed, 12, 1.0);
    const auto [lo, hi] = sample_range(s);
    const auto grid = linspace(lo, hi, 15);
    const auto r = mle_em_grid(s, GridClass{grid}, NoiseModel::gaussian(1.0));
    CHECK(r.converged);
    const auto dens = gauss_density(s, grid, 1.0);
    const auto ref = oracle::npmle_projected_gradient(dens, 20000);
    const double ours = oracle::mean_loglik(dens, r.estimate.weights());
    CHECK(ours >= ref.mean_loglik - 1e-10);
    CHECK(ours - ref.mean_loglik < 1e-6);
    CHECK(-r.objective_value == doctest::Approx(log_likelihood(r.estimate, s, NoiseModel::gaussian(1.0)).value));
    // Stationarity: no grid point raises the likelihood to first order.
    const Eigen::Map<const Eigen::VectorXd> w(r.estimate.weights().data(), 15);
    const Eigen::VectorXd mix = dens * w;
    const Eigen::VectorXd ratio = dens.transpose() * mix.cwiseInverse() / static_cast<double>(s.size());
    CHECK(ratio.maxCoeff() <= 1.0 + 1e-8);
  }
}

TEST_CASE("entropic grid projection reaches the likelihood optimum value") {
  for (std::uint64_t seed = 1; seed <= 4; ++seed) {
    const auto s = draw(seed, 10, 1.0);
    const auto [lo, hi] = sample_range(s);
    const auto grid = linspace(lo, hi, 15);
    const auto nu = empirical_measure(s);
    const auto r = project_entropic(MixtureClass(GridClass{grid}, 1), nu, kSq, 1.0);
    CHECK(r.converged);
    // Independent NPMLE, then its relaxed value: the two minima coincide.
    const auto dens = gauss_density(s, grid, 1.0);
    const auto ref = oracle::npmle_projected_gradient(dens, 20000);
    const double v_ref = -0.5 * std::log(2 * std::numbers::pi) - ref.mean_loglik;
    CHECK(r.objective_value == doctest::Approx(v_ref).epsilon(1e-7));
    // The reported value is the transport value of the reported estimate.
    const auto w = sinkhorn(r.estimate.support_only(), nu, kSq, 1.0).objective;
    CHECK(w == doctest::Approx(r.objective_value).epsilon(1e-9));
    for (std::size_t i = 1; i < r.trace.size(); ++i) CHECK(r.trace[i].objective <= r.trace[i - 1].objective + 1e-12);
  }
}

TEST_CASE("explicit classes: exhaustive search, ties to the first candidate") {
  const DiscreteMeasure a = DiscreteMeasure::dirac({0.0});
  const DiscreteMeasure b = DiscreteMeasure::dirac({3.0});
  const auto nu = empirical_measure(Sample(std::vector<Point>{{2.5}, {3.5}}));
  const MixtureClass cls(ExplicitFiniteClass{{a, b, b}}, 1);
  const auto r = project_entropic(cls, nu, kSq, 1.0);
  REQUIRE(r.candidate_index.has_value());
  CHECK(*r.candidate_index == 1);
  CHECK(r.candidate_objectives.size() == 3);
  const auto m = mle(Sample(std::vector<Point>{{2.5}, {3.5}}), cls, NoiseModel::gaussian(1.0));
  CHECK(*m.candidate_index == 1);
  const auto rel = project_relaxed(cls, nu, kSq, 1.0);
  CHECK(*rel.candidate_index == 1);
}

TEST_CASE("hard k-means equals exhaustive assignment on small samples") {
  std::mt19937_64 gen(31);
  std::normal_distribution<double> z(0.0, 1.0);
  for (int t = 0; t < 10; ++t) {
    std::vector<Point> pts(7);
    for (auto& p : pts) p = {z(gen) + (z(gen) > 0 ? 2.0 : -2.0)};
    const auto nu = empirical_measure(Sample(pts));
    double best = std::numeric_limits<double>::infinity();
    for (unsigned mask = 0; mask < (1u << 7); ++mask) {
      double sum[2] = {0, 0}, cnt[2] = {0, 0};
      for (unsigned i = 0; i < 7; ++i) {
        sum[(mask >> i) & 1] += pts[i][0];
        cnt[(mask >> i) & 1] += 1;
      }
      double obj = 0.0;
      for (unsigned i = 0; i < 7; ++i) {
        const unsigned k = (mask >> i) & 1;
        const double d = pts[i][0] - sum[k] / cnt[k];
        obj += 0.5 * d * d / 7.0;
      }
      best = std::min(best, obj);
    }
    EstimatorConfig cfg;
    cfg.restarts = 10;
    cfg.seed = 1;
    CHECK(project_hard_kmeans(nu, 2, cfg).objective_value == doctest::Approx(best).epsilon(1e-10));
  }
}

TEST_CASE("k-atom likelihood on a well-separated mixture") {
  const DiscreteMeasure pstar(1, {{-4.0}, {4.0}}, {0.5, 0.5});
  const auto s = generate_sample(pstar, NoiseModel::gaussian(0.25), 200, 3);
  EstimatorConfig cfg;
  cfg.seed = 2;
  cfg.restarts = 3;
  const auto r = mle(s, MixtureClass(KAtomClass{2}, 1), NoiseModel::gaussian(0.25), cfg);
  const auto support = r.estimate.support_only();
  REQUIRE(support.size() == 2);
  std::vector<double> xs;
  for (const auto& a : support.atoms()) xs.push_back(a[0]);
  std::sort(xs.begin(), xs.end());
  CHECK(xs[0] == doctest::Approx(-4.0).epsilon(0.05));
  CHECK(xs[1] == doctest::Approx(4.0).epsilon(0.05));
}

TEST_CASE("entropic k-atom projection approaches hard k-means as the weight vanishes") {
  const Sample s(std::vector<Point>{{-2.1}, {-1.9}, {-2.4}, {1.8}, {2.2}, {2.0}});
  const auto nu = empirical_measure(s);
  EstimatorConfig cfg;
  cfg.restarts = 5;
  cfg.seed = 1;
  const double hard = project_hard_kmeans(nu, 2, cfg).objective_value;
  const auto soft = project_entropic(MixtureClass(KAtomClass{2}, 1), nu, kSq, 0.01, cfg);
  CHECK(soft.objective_value >= hard - 1e-12);
  CHECK(soft.objective_value - hard <= 0.01 * std::log(2.0) + 1e-9);
}

TEST_CASE("relaxed projection on a grid reports the relaxed value of the likelihood estimate") {
  const auto s = draw(2, 10, 1.0);
  const auto [lo, hi] = sample_range(s);
  const MixtureClass cls(GridClass{linspace(lo, hi, 9)}, 1);
  const auto nu = empirical_measure(s);
  const auto r = project_relaxed(cls, nu, kSq, 1.0);
  const auto m = mle(s, cls, NoiseModel::gaussian(1.0));
  CHECK(total_variation_distance(r.estimate, m.estimate) < 1e-12);
  CHECK(r.objective_value == doctest::Approx(relaxed_transport(r.estimate, nu, kSq, 1.0).value).epsilon(1e-12));
}

TEST_CASE("class specs from JSON") {
  const auto g = mixture_class_from_json(nlohmann::json::parse(R"({"kind":"grid","atoms":[0,1,2]})"), 1);
  CHECK(std::get<GridClass>(g.kind()).grid.size() == 3);
  const auto k = mixture_class_from_json(nlohmann::json::parse(R"({"kind":"k-atom","k":3})"), 1);
  CHECK(std::get<KAtomClass>(k.kind()).k == 3);
  CHECK(k.closed_under_domination());
  const auto e = mixture_class_from_json(
      nlohmann::json::parse(R"({"kind":"explicit","candidates":[{"dim":1,"atoms":[[0]],"weights":[1]}]})"), 1);
  CHECK_FALSE(e.closed_under_domination());
  CHECK_THROWS_AS(mixture_class_from_json(nlohmann::json::parse(R"({"kind":"k-atom","k":0})"), 1), Error);
  CHECK_THROWS_AS(mixture_class_from_json(nlohmann::json::parse(R"({"kind":"lattice"})"), 1), Error);
  CHECK_THROWS_AS(mixture_class_from_json(nlohmann::json::parse(R"({"kind":"explicit"})"), 1), Error);
}

TEST_CASE("dimension mismatches are reported") {
  const auto s = draw(1, 5, 1.0);
  CHECK_THROWS_AS(mle(s, MixtureClass(GridClass{{{0.0, 0.0}}}, 2), NoiseModel::gaussian(1.0)), Error);
  CHECK_THROWS_AS(project_entropic(MixtureClass(KAtomClass{2}, 1), empirical_measure(s), kSq, 0.0), Error);
}
