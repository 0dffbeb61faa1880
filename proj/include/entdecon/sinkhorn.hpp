#pragma once

#include <cstddef>
#include <limits>
#include <optional>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "entdecon/costs.hpp"
#include "entdecon/coupling.hpp"
#include "entdecon/measures.hpp"

namespace entdecon {

struct SolverConfig {
  double tolerance = 1e-10;  // L1 marginal error
  std::size_t max_iterations = 100000;
  bool epsilon_scaling = false;
  bool record_trace = false;

  void validate() const;
};

// Dense log-domain Sinkhorn on a precomputed cost matrix. The plan is
//
//   gamma_ij = mu_i nu_j exp((f_i + g_j - c_ij) / sigma2),
//
// so f and g are potentials relative to the product mu (x) nu. Infinite costs
// never enter a log-sum-exp. The result is returned even when not converged.
struct LogSinkhornResult {
  Eigen::MatrixXd plan;
  Eigen::VectorXd f;
  Eigen::VectorXd g;
  std::size_t iterations = 0;
  double marginal_error = std::numeric_limits<double>::infinity();
  bool converged = false;
  std::vector<double> error_trace;
};

LogSinkhornResult solve_log_sinkhorn(const Eigen::MatrixXd& cost, const Eigen::VectorXd& mu, const Eigen::VectorXd& nu,
                                     double sigma2, const SolverConfig& cfg,
                                     const Eigen::VectorXd* g_init = nullptr);

// max(L1 row deviation, L1 column deviation).
double marginal_error(const Eigen::MatrixXd& plan, const Eigen::VectorXd& mu, const Eigen::VectorXd& nu);

struct SinkhornSolution {
  Coupling coupling;
  Eigen::VectorXd dual_row;
  Eigen::VectorXd dual_col;
  std::size_t iterations = 0;
  double marginal_error = 0.0;
  double transport_cost = 0.0;
  double mutual_information = 0.0;
  double objective = 0.0;  // transport_cost + sigma2 * mutual_information
  std::vector<double> error_trace;
};

// Entropic transport W_{sigma2}(mu, nu). Throws NotConvergedError when the
// marginal tolerance is not met and Error(Infeasible) when some positive-mass
// row or column has no finite-cost partner.
SinkhornSolution sinkhorn(const DiscreteMeasure& mu, const DiscreteMeasure& nu, const CostModel& cost, double sigma2,
                          const SolverConfig& cfg = {}, const Eigen::VectorXd* g_init = nullptr);

// sum mass_ij c_ij over cells with positive mass; +inf if one of them is forbidden.
double transport_cost(const Eigen::MatrixXd& mass, const Eigen::MatrixXd& cost);
double transport_cost(const Coupling& g, const CostModel& cost);

struct EntropyOffset {
  double measured = 0.0;   // [<c,g> + s I(g)] - [<c,g> - s H(g)] at the solved coupling
  double predicted = 0.0;  // s (H(mu) + H(nu))
  SinkhornSolution solution;
};

// Mutual-information and Shannon-entropy formulations differ by a constant
// on M(mu, nu); returns both sides of that constant.
EntropyOffset entropy_formulation_offset(const DiscreteMeasure& mu, const DiscreteMeasure& nu, const CostModel& cost,
                                         double sigma2, const SolverConfig& cfg = {});

Eigen::VectorXd weights_vector(const DiscreteMeasure& m);

nlohmann::json to_json(const SinkhornSolution& s, bool emit_coupling);

}  // namespace entdecon
