#include "entdecon/relaxed.hpp"

#include <cmath>
#include <map>

#include "entdecon/error.hpp"
#include "entdecon/information.hpp"

namespace entdecon {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// log p_j - c_j / sigma2 for one observation, -inf where p_j = 0 or c_j = inf.
void gibbs_logits(const Eigen::MatrixXd& cost, Eigen::Index col, const Eigen::VectorXd& p, double sigma2,
                  Eigen::VectorXd& out, double& lse) {
  out.resize(p.size());
  double mx = kNegInf;
  for (Eigen::Index j = 0; j < p.size(); ++j) {
    const double c = cost(j, col);
    out(j) = (p(j) > 0.0 && c != kInf) ? std::log(p(j)) - c / sigma2 : kNegInf;
    mx = std::max(mx, out(j));
  }
  if (mx == kNegInf) {
    lse = kNegInf;
    return;
  }
  double s = 0.0;
  for (Eigen::Index j = 0; j < p.size(); ++j) {
    if (out(j) > kNegInf) s += std::exp(out(j) - mx);
  }
  lse = mx + std::log(s);
}

void check_sigma2(double sigma2) {
  if (!(sigma2 > 0.0) || !std::isfinite(sigma2)) {
    throw Error(ErrorCode::InvalidArgument, "relaxed transport: sigma2 must be positive");
  }
}

}  // namespace

DiscreteMeasure gibbs_posterior_row(const DiscreteMeasure& p, std::span<const double> y, const CostModel& cost,
                                    double sigma2) {
  check_sigma2(sigma2);
  if (y.size() != p.dim()) throw Error(ErrorCode::DimensionMismatch, "gibbs_posterior_row: dimension mismatch");
  const Eigen::MatrixXd c = cost_matrix(cost, p.atoms(), {Point(y.begin(), y.end())});
  Eigen::VectorXd logits;
  double lse = 0.0;
  gibbs_logits(c, 0, weights_vector(p), sigma2, logits, lse);
  if (lse == kNegInf) {
    throw Error(ErrorCode::Infeasible, "gibbs_posterior_row: every atom is at infinite cost from the observation");
  }
  std::vector<double> q(p.size());
  for (std::size_t j = 0; j < q.size(); ++j) {
    const double l = logits(static_cast<Eigen::Index>(j));
    q[j] = l == kNegInf ? 0.0 : std::exp(l - lse);
  }
  return DiscreteMeasure(p.dim(), p.atoms(), std::move(q));
}

double relaxed_value(const Eigen::MatrixXd& cost, const Eigen::VectorXd& p, const Eigen::VectorXd& nu, double sigma2) {
  Eigen::VectorXd logits;
  double value = 0.0;
  for (Eigen::Index i = 0; i < nu.size(); ++i) {
    if (nu(i) <= 0.0) continue;
    double lse = 0.0;
    gibbs_logits(cost, i, p, sigma2, logits, lse);
    if (lse == kNegInf) return kInf;
    value += nu(i) * (-sigma2 * lse);
  }
  return value;
}

RelaxedSolution relaxed_transport(const DiscreteMeasure& p, const DiscreteMeasure& nu, const CostModel& cost,
                                  double sigma2) {
  check_sigma2(sigma2);
  if (p.dim() != nu.dim() || p.dim() != cost.dim) {
    throw Error(ErrorCode::DimensionMismatch, "relaxed_transport: dimension mismatch");
  }
  const Eigen::MatrixXd c = cost_matrix(cost, p.atoms(), nu.atoms());
  const Eigen::VectorXd pw = weights_vector(p);
  Eigen::MatrixXd mass = Eigen::MatrixXd::Zero(c.rows(), c.cols());
  std::vector<double> per_row(nu.size(), 0.0);
  double value = 0.0;
  Eigen::VectorXd logits;
  for (std::size_t i = 0; i < nu.size(); ++i) {
    const auto col = static_cast<Eigen::Index>(i);
    double lse = 0.0;
    gibbs_logits(c, col, pw, sigma2, logits, lse);
    if (lse == kNegInf) {
      throw Error(ErrorCode::Infeasible,
                  "relaxed_transport: observation " + std::to_string(i) + " is at infinite cost from every atom");
    }
    per_row[i] = -sigma2 * lse;
    value += nu.weight(i) * per_row[i];
    for (Eigen::Index j = 0; j < c.rows(); ++j) {
      if (logits(j) > kNegInf) mass(j, col) = nu.weight(i) * std::exp(logits(j) - lse);
    }
  }
  Coupling rows(p.dim(), p.atoms(), nu.atoms(), std::move(mass));
  DiscreteMeasure xm = rows.x_marginal();
  return RelaxedSolution{value, std::move(rows), std::move(xm), std::move(per_row)};
}

double vp_objective(const DiscreteMeasure& p, const DiscreteMeasure& nu, const Coupling& gamma, const CostModel& cost,
                    double sigma2) {
  if (gamma.dim() != p.dim() || nu.dim() != p.dim()) {
    throw Error(ErrorCode::DimensionMismatch, "vp_objective: dimension mismatch");
  }
  // pi_Y gamma must equal nu.
  std::map<Point, double> diff;
  const Eigen::VectorXd cs = gamma.col_sums();
  for (std::size_t j = 0; j < gamma.cols(); ++j) diff[gamma.col_support()[j]] += cs(static_cast<Eigen::Index>(j));
  for (std::size_t j = 0; j < nu.size(); ++j) diff[nu.atom(j)] -= nu.weight(j);
  double dev = 0.0;
  for (const auto& [y, d] : diff) dev += std::abs(d);
  if (dev > 1e-10) throw Error(ErrorCode::InvalidArgument, "vp_objective: second marginal of gamma differs from nu");

  const double tc = transport_cost(gamma, cost);
  const double dx = kl_divergence(gamma.x_marginal(), p);
  if (tc == kInf || dx == kInf) return kInf;
  return tc + sigma2 * mutual_information(gamma) + sigma2 * dx;
}

GeneralNoiseSolution general_noise_transport(const DiscreteMeasure& p, const DiscreteMeasure& nu,
                                             const NoiseModel& noise, bool with_balanced, const SolverConfig& cfg) {
  const CostModel c = negative_log_density_cost(noise);
  GeneralNoiseSolution out{relaxed_transport(p, nu, c, 1.0), std::nullopt};
  if (with_balanced) out.balanced = sinkhorn(p, nu, c, 1.0, cfg);
  return out;
}

nlohmann::json to_json(const RelaxedSolution& r) {
  nlohmann::json j;
  j["value"] = r.value;
  j["x_marginal"] = to_json(r.x_marginal);
  j["per_row_values"] = r.per_row_values;
  return j;
}

}  // namespace entdecon
