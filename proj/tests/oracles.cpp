#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace oracle {

Primal entropic_ot_primal(const Eigen::MatrixXd& c, const Eigen::VectorXd& mu, const Eigen::VectorXd& nu, double s2) {
  const int m = static_cast<int>(mu.size());
  const int n = static_cast<int>(nu.size());
  const int k = (m - 1) * (n - 1);
  // g = b + A x, cells in row-major order.
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(m * n, k);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(m * n);
  auto cell = [n](int i, int j) { return i * n + j; };
  auto var = [n](int i, int j) { return i * (n - 1) + j; };
  for (int i = 0; i < m - 1; ++i) {
    for (int j = 0; j < n - 1; ++j) {
      A(cell(i, j), var(i, j)) = 1.0;
      A(cell(i, n - 1), var(i, j)) = -1.0;
      A(cell(m - 1, j), var(i, j)) = -1.0;
      A(cell(m - 1, n - 1), var(i, j)) = 1.0;
    }
    b(cell(i, n - 1)) = mu(i);
  }
  for (int j = 0; j < n - 1; ++j) b(cell(m - 1, j)) = nu(j);
  b(cell(m - 1, n - 1)) = nu(n - 1) - (mu.sum() - mu(m - 1));
  Eigen::VectorXd cv(m * n);
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) cv(cell(i, j)) = c(i, j);
  }
  auto value = [&](const Eigen::VectorXd& g) {
    double v = 0.0;
    for (int t = 0; t < g.size(); ++t) {
      if (!(g(t) > 0.0)) return std::numeric_limits<double>::infinity();
      v += cv(t) * g(t) + s2 * g(t) * std::log(g(t));
    }
    return v;
  };
  Eigen::VectorXd x(k);
  for (int i = 0; i < m - 1; ++i) {
    for (int j = 0; j < n - 1; ++j) x(var(i, j)) = mu(i) * nu(j);
  }
  Eigen::VectorXd g = b + A * x;
  double fx = value(g);
  for (int it = 0; it < 200 && k > 0; ++it) {
    const Eigen::VectorXd dg = cv + s2 * (g.array().log() + 1.0).matrix();
    const Eigen::VectorXd grad = A.transpose() * dg;
    const Eigen::MatrixXd H = s2 * A.transpose() * g.cwiseInverse().asDiagonal() * A;
    const Eigen::VectorXd step = -H.ldlt().solve(grad);
    const double decrement = -grad.dot(step);
    if (decrement < 1e-24) break;
    double t = 1.0;
    for (int ls = 0; ls < 80; ++ls, t *= 0.5) {
      const Eigen::VectorXd g2 = b + A * (x + t * step);
      const double f2 = value(g2);
      if (f2 <= fx - 0.25 * t * decrement) {
        x += t * step;
        g = g2;
        fx = f2;
        break;
      }
    }
  }
  Primal out;
  out.plan.resize(m, n);
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) out.plan(i, j) = g(cell(i, j));
  }
  // I(g) = sum g log g - sum mu log mu - sum nu log nu on the polytope.
  double h = 0.0;
  for (int i = 0; i < m; ++i) h += mu(i) * std::log(mu(i));
  for (int j = 0; j < n; ++j) h += nu(j) * std::log(nu(j));
  out.objective = value(g) - s2 * h;
  return out;
}

double kl(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] == 0.0) continue;
    if (b[i] == 0.0) return std::numeric_limits<double>::infinity();
    s += a[i] * std::log(a[i] / b[i]);
  }
  return s;
}

double mean_loglik(const Eigen::MatrixXd& dens, const std::vector<double>& w) {
  const Eigen::Map<const Eigen::VectorXd> wv(w.data(), static_cast<Eigen::Index>(w.size()));
  const Eigen::VectorXd mix = dens * wv;
  return mix.array().log().mean();
}

std::vector<double> project_simplex(std::vector<double> v) {
  std::vector<double> s = v;
  std::sort(s.begin(), s.end(), std::greater<>());
  double cum = 0.0, theta = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    cum += s[i];
    const double t = (cum - 1.0) / static_cast<double>(i + 1);
    if (s[i] - t > 0.0) theta = t;
  }
  for (double& x : v) x = std::max(x - theta, 0.0);
  return v;
}

Npmle npmle_projected_gradient(const Eigen::MatrixXd& dens, int iterations) {
  const auto m = static_cast<std::size_t>(dens.cols());
  std::vector<double> w(m, 1.0 / static_cast<double>(m));
  double f = mean_loglik(dens, w);
  double step = 1.0;
  for (int it = 0; it < iterations; ++it) {
    const Eigen::Map<const Eigen::VectorXd> wv(w.data(), static_cast<Eigen::Index>(m));
    const Eigen::VectorXd mix = dens * wv;
    const Eigen::VectorXd grad = dens.transpose() * mix.cwiseInverse() / static_cast<double>(dens.rows());
    step *= 2.0;
    for (int ls = 0; ls < 60; ++ls, step *= 0.5) {
      std::vector<double> trial(m);
      for (std::size_t j = 0; j < m; ++j) trial[j] = w[j] + step * grad(static_cast<Eigen::Index>(j));
      trial = project_simplex(trial);
      const double f2 = mean_loglik(dens, trial);
      double lin = 0.0, sq = 0.0;
      for (std::size_t j = 0; j < m; ++j) {
        lin += grad(static_cast<Eigen::Index>(j)) * (trial[j] - w[j]);
        sq += (trial[j] - w[j]) * (trial[j] - w[j]);
      }
      if (std::isfinite(f2) && f2 >= f + lin - sq / (2.0 * step)) {
        w = trial;
        f = f2;
        break;
      }
    }
  }
  return {w, f};
}

double simpson(const std::function<double(double)>& f, double a, double b, int n) {
  const double h = (b - a) / n;
  double s = f(a) + f(b);
  for (int i = 1; i < n; ++i) s += f(a + i * h) * (i % 2 == 1 ? 4.0 : 2.0);
  return s * h / 3.0;
}

}  // namespace oracle
