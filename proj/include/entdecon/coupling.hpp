#pragma once

#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "entdecon/measures.hpp"

namespace entdecon {

// Joint discrete measure on row_support x col_support.
class Coupling {
 public:
  static constexpr double kMassTolerance = 1e-10;

  Coupling(std::size_t dim, std::vector<Point> row_support, std::vector<Point> col_support, Eigen::MatrixXd mass);

  static Coupling product(const DiscreteMeasure& a, const DiscreteMeasure& b);

  std::size_t dim() const noexcept { return dim_; }
  std::size_t rows() const noexcept { return row_support_.size(); }
  std::size_t cols() const noexcept { return col_support_.size(); }
  const std::vector<Point>& row_support() const noexcept { return row_support_; }
  const std::vector<Point>& col_support() const noexcept { return col_support_; }
  const Eigen::MatrixXd& mass() const noexcept { return mass_; }

  Eigen::VectorXd row_sums() const { return mass_.rowwise().sum(); }
  Eigen::VectorXd col_sums() const { return mass_.colwise().sum().transpose(); }

  // pi_X and pi_Y.
  DiscreteMeasure x_marginal() const;
  DiscreteMeasure y_marginal() const;

  // Law of X given Y = col_support[j] (column j over its mass).
  DiscreteMeasure column_conditional(std::size_t j) const;

 private:
  std::size_t dim_;
  std::vector<Point> row_support_;
  std::vector<Point> col_support_;
  Eigen::MatrixXd mass_;
};

nlohmann::json to_json(const Coupling& c);

}  // namespace entdecon
