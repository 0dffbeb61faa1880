#pragma once

#include <span>

#include <Eigen/Dense>

#include "entdecon/coupling.hpp"
#include "entdecon/measures.hpp"

namespace entdecon {

// sum w log(1/w) over w > 0.
double shannon_entropy(std::span<const double> weights);
double shannon_entropy(const DiscreteMeasure& m);
double shannon_entropy(const Coupling& g);

// sum a log(a/b) over a > 0; +inf as soon as a > 0 where b == 0.
double kl_divergence(std::span<const double> a, std::span<const double> b);
// Measures are compared atom by atom over the union of their supports.
double kl_divergence(const DiscreteMeasure& a, const DiscreteMeasure& b);
// Couplings on identical supports, cell by cell.
double kl_divergence(const Coupling& a, const Coupling& b);

// D(g || pi_X g (x) pi_Y g).
double mutual_information(const Eigen::MatrixXd& mass);
double mutual_information(const Coupling& g);

struct DecompositionCheck {
  double lhs = 0.0;           // D(g || alpha (x) beta)
  double mutual_information = 0.0;
  double x_divergence = 0.0;  // D(pi_X g || alpha)
  double y_divergence = 0.0;  // D(pi_Y g || beta)
  double rhs = 0.0;
  double residual = 0.0;      // |lhs - rhs|; 0 when both sides are +inf
};

// D(g || alpha (x) beta) = I(g) + D(pi_X g || alpha) + D(pi_Y g || beta).
DecompositionCheck kl_product_decomposition_check(const Coupling& g, const DiscreteMeasure& alpha,
                                                  const DiscreteMeasure& beta);

}  // namespace entdecon
