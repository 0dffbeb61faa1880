#include "entdecon/information.hpp"

#include <cmath>
#include <map>

#include "entdecon/costs.hpp"
#include "entdecon/error.hpp"

namespace entdecon {

double shannon_entropy(std::span<const double> weights) {
  double h = 0.0;
  for (double w : weights) {
    if (w > 0.0) h -= w * std::log(w);
  }
  return h;
}

double shannon_entropy(const DiscreteMeasure& m) { return shannon_entropy(m.canonical().weights()); }

double shannon_entropy(const Coupling& g) {
  return shannon_entropy(std::span<const double>(g.mass().data(), static_cast<std::size_t>(g.mass().size())));
}

double kl_divergence(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw Error(ErrorCode::DimensionMismatch, "kl_divergence: length mismatch");
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] <= 0.0) continue;
    if (b[i] <= 0.0) return kInf;
    d += a[i] * (std::log(a[i]) - std::log(b[i]));
  }
  return std::max(d, 0.0);
}

double kl_divergence(const DiscreteMeasure& a, const DiscreteMeasure& b) {
  if (a.dim() != b.dim()) throw Error(ErrorCode::DimensionMismatch, "kl_divergence: dimension mismatch");
  std::map<Point, std::pair<double, double>> both;
  for (std::size_t i = 0; i < a.size(); ++i) both[a.atom(i)].first += a.weight(i);
  for (std::size_t i = 0; i < b.size(); ++i) both[b.atom(i)].second += b.weight(i);
  std::vector<double> wa, wb;
  wa.reserve(both.size());
  wb.reserve(both.size());
  for (const auto& [x, w] : both) {
    wa.push_back(w.first);
    wb.push_back(w.second);
  }
  return kl_divergence(wa, wb);
}

double kl_divergence(const Coupling& a, const Coupling& b) {
  if (a.row_support() != b.row_support() || a.col_support() != b.col_support()) {
    throw Error(ErrorCode::DimensionMismatch, "kl_divergence: couplings live on different supports");
  }
  const auto n = static_cast<std::size_t>(a.mass().size());
  return kl_divergence(std::span<const double>(a.mass().data(), n), std::span<const double>(b.mass().data(), n));
}

// Log differences rather than ratios: denormal marginals must not overflow.
double mutual_information(const Eigen::MatrixXd& mass) {
  const Eigen::VectorXd r = mass.rowwise().sum();
  const Eigen::VectorXd c = mass.colwise().sum().transpose();
  double info = 0.0;
  for (Eigen::Index j = 0; j < mass.cols(); ++j) {
    for (Eigen::Index i = 0; i < mass.rows(); ++i) {
      const double m = mass(i, j);
      if (m > 0.0) info += m * (std::log(m) - std::log(r(i)) - std::log(c(j)));
    }
  }
  return std::max(info, 0.0);
}

double mutual_information(const Coupling& g) { return mutual_information(g.mass()); }

DecompositionCheck kl_product_decomposition_check(const Coupling& g, const DiscreteMeasure& alpha,
                                                  const DiscreteMeasure& beta) {
  if (alpha.dim() != g.dim() || beta.dim() != g.dim()) {
    throw Error(ErrorCode::DimensionMismatch, "kl_product_decomposition_check: dimension mismatch");
  }
  std::vector<double> a(g.rows()), b(g.cols());
  for (std::size_t i = 0; i < g.rows(); ++i) a[i] = alpha.mass_at(g.row_support()[i]);
  for (std::size_t j = 0; j < g.cols(); ++j) b[j] = beta.mass_at(g.col_support()[j]);

  DecompositionCheck out;
  // Left side, cell by cell against the product reference.
  double lhs = 0.0;
  for (std::size_t j = 0; j < g.cols() && lhs != kInf; ++j) {
    for (std::size_t i = 0; i < g.rows(); ++i) {
      const double m = g.mass()(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      if (m <= 0.0) continue;
      if (a[i] <= 0.0 || b[j] <= 0.0) {
        lhs = kInf;
        break;
      }
      lhs += m * (std::log(m) - std::log(a[i]) - std::log(b[j]));
    }
  }
  out.lhs = lhs;

  const Eigen::VectorXd r = g.row_sums();
  const Eigen::VectorXd c = g.col_sums();
  out.mutual_information = mutual_information(g);
  out.x_divergence = kl_divergence(std::span<const double>(r.data(), g.rows()), a);
  out.y_divergence = kl_divergence(std::span<const double>(c.data(), g.cols()), b);
  out.rhs = out.mutual_information + out.x_divergence + out.y_divergence;
  if (out.lhs == kInf && out.rhs == kInf) {
    out.residual = 0.0;
  } else if (out.lhs == kInf || out.rhs == kInf) {
    out.residual = kInf;
  } else {
    out.residual = std::abs(out.lhs - out.rhs);
  }
  return out;
}

}  // namespace entdecon
