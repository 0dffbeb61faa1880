#include "entdecon/coupling.hpp"

#include <cmath>
#include <sstream>

#include "entdecon/error.hpp"

namespace entdecon {

Coupling::Coupling(std::size_t dim, std::vector<Point> row_support, std::vector<Point> col_support,
                   Eigen::MatrixXd mass)
    : dim_(dim), row_support_(std::move(row_support)), col_support_(std::move(col_support)), mass_(std::move(mass)) {
  if (static_cast<std::size_t>(mass_.rows()) != row_support_.size() ||
      static_cast<std::size_t>(mass_.cols()) != col_support_.size()) {
    throw Error(ErrorCode::DimensionMismatch, "coupling: mass matrix shape does not match supports");
  }
  for (const auto& p : row_support_) {
    if (p.size() != dim_) throw Error(ErrorCode::DimensionMismatch, "coupling: row atom dimension mismatch");
  }
  for (const auto& p : col_support_) {
    if (p.size() != dim_) throw Error(ErrorCode::DimensionMismatch, "coupling: column atom dimension mismatch");
  }
  if (!mass_.allFinite() || (mass_.array() < 0.0).any()) {
    throw Error(ErrorCode::InvalidArgument, "coupling: mass must be finite and non-negative");
  }
  const double total = mass_.sum();
  if (std::abs(total - 1.0) > kMassTolerance) {
    std::ostringstream msg;
    msg.precision(17);
    msg << "coupling: total mass " << total << " is not 1";
    throw Error(ErrorCode::InvalidArgument, msg.str());
  }
}

Coupling Coupling::product(const DiscreteMeasure& a, const DiscreteMeasure& b) {
  if (a.dim() != b.dim()) throw Error(ErrorCode::DimensionMismatch, "coupling: marginal dimensions differ");
  const Eigen::Map<const Eigen::VectorXd> wa(a.weights().data(), static_cast<Eigen::Index>(a.size()));
  const Eigen::Map<const Eigen::VectorXd> wb(b.weights().data(), static_cast<Eigen::Index>(b.size()));
  return Coupling(a.dim(), a.atoms(), b.atoms(), wa * wb.transpose());
}

DiscreteMeasure Coupling::x_marginal() const {
  const Eigen::VectorXd r = row_sums();
  return DiscreteMeasure(dim_, row_support_, std::vector<double>(r.data(), r.data() + r.size()));
}

DiscreteMeasure Coupling::y_marginal() const {
  const Eigen::VectorXd c = col_sums();
  return DiscreteMeasure(dim_, col_support_, std::vector<double>(c.data(), c.data() + c.size()));
}

DiscreteMeasure Coupling::column_conditional(std::size_t j) const {
  const auto col = mass_.col(static_cast<Eigen::Index>(j));
  const double total = col.sum();
  if (!(total > 0.0)) throw Error(ErrorCode::InvalidArgument, "coupling: conditional of a zero-mass column");
  std::vector<double> w(static_cast<std::size_t>(col.size()));
  for (Eigen::Index i = 0; i < col.size(); ++i) w[static_cast<std::size_t>(i)] = col(i) / total;
  return DiscreteMeasure(dim_, row_support_, std::move(w));
}

nlohmann::json to_json(const Coupling& c) {
  nlohmann::json j;
  j["dim"] = c.dim();
  j["row_support"] = c.row_support();
  j["col_support"] = c.col_support();
  auto rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < c.mass().rows(); ++i) {
    std::vector<double> row(static_cast<std::size_t>(c.mass().cols()));
    for (Eigen::Index k = 0; k < c.mass().cols(); ++k) row[static_cast<std::size_t>(k)] = c.mass()(i, k);
    rows.push_back(row);
  }
  j["mass"] = std::move(rows);
  return j;
}

}  // namespace entdecon
