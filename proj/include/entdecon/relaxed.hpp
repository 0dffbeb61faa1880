#pragma once

#include <optional>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "entdecon/costs.hpp"
#include "entdecon/coupling.hpp"
#include "entdecon/measures.hpp"
#include "entdecon/sinkhorn.hpp"

namespace entdecon {

// Minimizer over Q << P of  E_Q c(., y) + sigma2 D(Q || P):  Q_j proportional
// to p_j exp(-c(x_j, y) / sigma2). Returned on P's atoms.
DiscreteMeasure gibbs_posterior_row(const DiscreteMeasure& p, std::span<const double> y, const CostModel& cost,
                                    double sigma2);

struct RelaxedSolution {
  double value = 0.0;
  Coupling posterior_rows;        // column j carries nu_j * Q_j
  DiscreteMeasure x_marginal;     // pi_X of posterior_rows
  std::vector<double> per_row_values;  // -sigma2 log sum_j p_j exp(-c(x_j, y_i) / sigma2)
};

// One-sided relaxation: second marginal pinned to nu, first marginal
// penalized by sigma2 D(pi_X gamma || P) instead of being pinned. Evaluated in
// closed form, one log-sum-exp per atom of nu; nu may carry arbitrary weights.
RelaxedSolution relaxed_transport(const DiscreteMeasure& p, const DiscreteMeasure& nu, const CostModel& cost,
                                  double sigma2);

// Closed-form relaxed value on a precomputed cost matrix (rows: atoms of P,
// columns: atoms of nu). Returns +inf if some positive-mass column is unreachable.
double relaxed_value(const Eigen::MatrixXd& cost, const Eigen::VectorXd& p, const Eigen::VectorXd& nu, double sigma2);

// <c, gamma> + sigma2 I(gamma) + sigma2 D(pi_X gamma || P) for gamma with
// pi_Y gamma = nu (checked to 1e-10). +inf when pi_X gamma is not << P.
double vp_objective(const DiscreteMeasure& p, const DiscreteMeasure& nu, const Coupling& gamma, const CostModel& cost,
                    double sigma2);

// Transport with cost -log f(y - x) and entropic weight 1. Values include the
// log-normalizer, i.e. they are the genuine -log f objectives.
struct GeneralNoiseSolution {
  RelaxedSolution relaxed;
  std::optional<SinkhornSolution> balanced;
};

GeneralNoiseSolution general_noise_transport(const DiscreteMeasure& p, const DiscreteMeasure& nu,
                                             const NoiseModel& noise, bool with_balanced,
                                             const SolverConfig& cfg = {});

nlohmann::json to_json(const RelaxedSolution& r);

}  // namespace entdecon
