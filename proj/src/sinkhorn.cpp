#include "entdecon/sinkhorn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "entdecon/error.hpp"
#include "entdecon/information.hpp"

namespace entdecon {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

Eigen::VectorXd safe_log(const Eigen::VectorXd& w) {
  Eigen::VectorXd out(w.size());
  for (Eigen::Index i = 0; i < w.size(); ++i) out(i) = w(i) > 0.0 ? std::log(w(i)) : kNegInf;
  return out;
}

void check_feasible(const Eigen::MatrixXd& neg_k, const Eigen::VectorXd& mu, const Eigen::VectorXd& nu) {
  for (Eigen::Index i = 0; i < neg_k.rows(); ++i) {
    if (mu(i) <= 0.0) continue;
    bool any = false;
    for (Eigen::Index j = 0; j < neg_k.cols() && !any; ++j) any = nu(j) > 0.0 && neg_k(i, j) > kNegInf;
    if (!any) {
      throw Error(ErrorCode::Infeasible,
                  "sinkhorn: row " + std::to_string(i) + " has no finite-cost route to the second marginal");
    }
  }
  for (Eigen::Index j = 0; j < neg_k.cols(); ++j) {
    if (nu(j) <= 0.0) continue;
    bool any = false;
    for (Eigen::Index i = 0; i < neg_k.rows() && !any; ++i) any = mu(i) > 0.0 && neg_k(i, j) > kNegInf;
    if (!any) {
      throw Error(ErrorCode::Infeasible,
                  "sinkhorn: column " + std::to_string(j) + " has no finite-cost route to the first marginal");
    }
  }
}

// Scaled potentials: F = f / sigma2, G = g / sigma2, logk = -c / sigma2.
struct LogState {
  const Eigen::MatrixXd& logk;
  Eigen::VectorXd log_mu;
  Eigen::VectorXd log_nu;

  // F_i = -log sum_j nu_j exp(G_j + logk_ij)
  void row_update(const Eigen::VectorXd& G, Eigen::VectorXd& F) const {
    const Eigen::Index n = logk.rows(), m = logk.cols();
    for (Eigen::Index i = 0; i < n; ++i) {
      double mx = kNegInf;
      for (Eigen::Index j = 0; j < m; ++j) {
        const double v = log_nu(j) + G(j) + logk(i, j);
        if (v > mx) mx = v;
      }
      if (mx == kNegInf) {
        F(i) = 0.0;  // unreachable row; only allowed with zero mass
        continue;
      }
      double s = 0.0;
      for (Eigen::Index j = 0; j < m; ++j) {
        const double v = log_nu(j) + G(j) + logk(i, j);
        if (v > kNegInf) s += std::exp(v - mx);
      }
      F(i) = -(mx + std::log(s));
    }
  }

  void col_update(const Eigen::VectorXd& F, Eigen::VectorXd& G) const {
    const Eigen::Index n = logk.rows(), m = logk.cols();
    for (Eigen::Index j = 0; j < m; ++j) {
      double mx = kNegInf;
      for (Eigen::Index i = 0; i < n; ++i) {
        const double v = log_mu(i) + F(i) + logk(i, j);
        if (v > mx) mx = v;
      }
      if (mx == kNegInf) {
        G(j) = 0.0;
        continue;
      }
      double s = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        const double v = log_mu(i) + F(i) + logk(i, j);
        if (v > kNegInf) s += std::exp(v - mx);
      }
      G(j) = -(mx + std::log(s));
    }
  }

  Eigen::MatrixXd plan(const Eigen::VectorXd& F, const Eigen::VectorXd& G) const {
    Eigen::MatrixXd p(logk.rows(), logk.cols());
    for (Eigen::Index j = 0; j < logk.cols(); ++j) {
      for (Eigen::Index i = 0; i < logk.rows(); ++i) {
        const double v = log_mu(i) + log_nu(j) + logk(i, j);
        p(i, j) = v == kNegInf ? 0.0 : std::exp(v + F(i) + G(j));
      }
    }
    return p;
  }
};

struct StageResult {
  Eigen::VectorXd F, G;
  std::size_t iterations = 0;
  double row_error = std::numeric_limits<double>::infinity();
  bool converged = false;
  double floor = 0.0;  // set when the stage stopped at the rounding floor
};

StageResult run_stage(const Eigen::MatrixXd& cost, const Eigen::VectorXd& mu, const Eigen::VectorXd& nu, double sigma2,
                      double tolerance, std::size_t max_iterations, const Eigen::VectorXd& g_init,
                      std::vector<double>* trace, bool exit_when_slow) {
  const Eigen::MatrixXd logk = cost.unaryExpr([sigma2](double c) { return c == kInf ? kNegInf : -c / sigma2; });
  LogState st{logk, safe_log(mu), safe_log(nu)};

  StageResult r;
  r.G = g_init / sigma2;
  r.F = Eigen::VectorXd::Zero(cost.rows());
  st.row_update(r.G, r.F);
  Eigen::VectorXd next_f(cost.rows());
  // Below tolerance is not always reachable: the potentials carry rounding of
  // order eps * |F|. A stage that stops improving within that floor has converged.
  double scale = 1.0;
  for (Eigen::Index k = 0; k < logk.size(); ++k) {
    if (logk.data()[k] != kNegInf) scale = std::max(scale, std::abs(logk.data()[k]));
  }
  const double floor = 1e3 * std::numeric_limits<double>::epsilon() * scale;
  constexpr std::size_t kStallWindow = 50;
  double best_err = kInf;
  std::size_t best_at = 0;
  // Crawl detection: less than 10% progress over a window of iterations.
  constexpr std::size_t kRateWindow = 200;
  double window_start_err = kInf;
  for (std::size_t it = 1; it <= max_iterations; ++it) {
    st.col_update(r.F, r.G);
    st.row_update(r.G, next_f);
    // Columns are exact after the column update; the row sums of the current
    // plan are mu_i exp(F_i - F'_i).
    double err = 0.0;
    for (Eigen::Index i = 0; i < mu.size(); ++i) {
      if (mu(i) > 0.0) err += std::abs(mu(i) * std::expm1(r.F(i) - next_f(i)));
    }
    r.iterations = it;
    r.row_error = err;
    if (trace) trace->push_back(err);
    if (err <= tolerance) {
      r.converged = true;
      break;
    }
    if (err < best_err) {
      best_err = err;
      best_at = it;
    } else if (it - best_at >= kStallWindow && err <= floor) {
      r.converged = true;
      r.floor = floor;
      break;
    }
    if (it % kRateWindow == 0) {
      if (exit_when_slow && err > 0.9 * window_start_err) break;
      window_start_err = err;
    }
    r.F.swap(next_f);
  }
  r.F *= sigma2;
  r.G *= sigma2;
  return r;
}

// Newton ascent on the semi-dual Phi(G) = sum_j nu_j G_j + sum_i mu_i F_i(G),
// with F(G) from the row update, so rows are exact and the gradient is
// nu - (column sums). Sinkhorn stalls when mass must cross between nearly
// decoupled blocks of the kernel; the Hessian resolves that direction directly.
// Returns the number of Newton steps taken.
std::size_t newton_polish(const LogState& st, const Eigen::VectorXd& mu, const Eigen::VectorXd& nu, double tolerance,
                          std::size_t max_steps, StageResult& r) {
  const Eigen::Index n = st.logk.rows(), m = st.logk.cols();
  auto semi_dual = [&](const Eigen::VectorXd& G, Eigen::VectorXd& F) {
    st.row_update(G, F);
    double v = 0.0;
    for (Eigen::Index j = 0; j < m; ++j) {
      if (nu(j) > 0.0) v += nu(j) * G(j);
    }
    for (Eigen::Index i = 0; i < n; ++i) {
      if (mu(i) > 0.0) v += mu(i) * F(i);
    }
    return v;
  };
  Eigen::VectorXd F(n), trial_F(n);
  double value = semi_dual(r.G, F);
  std::size_t steps = 0;
  for (; steps < max_steps; ++steps) {
    // pi_ij: row-conditional plan, sum_j pi_ij = 1.
    Eigen::MatrixXd pi(n, m);
    for (Eigen::Index j = 0; j < m; ++j) {
      for (Eigen::Index i = 0; i < n; ++i) {
        const double v = st.log_nu(j) + st.logk(i, j);
        pi(i, j) = v == kNegInf ? 0.0 : std::exp(v + F(i) + r.G(j));
      }
    }
    const Eigen::VectorXd cols = pi.transpose() * mu;
    const Eigen::VectorXd grad = nu - cols;
    r.row_error = grad.cwiseAbs().sum();
    if (r.row_error <= tolerance) {
      r.converged = true;
      break;
    }
    // -Hessian = diag(cols) - pi^T diag(mu) pi, singular along constants;
    // the rank-one term pins that direction without touching the step.
    Eigen::MatrixXd h = -(pi.transpose() * mu.asDiagonal() * pi);
    h.diagonal() += cols;
    h += Eigen::MatrixXd::Constant(m, m, 1.0 / static_cast<double>(m));
    const Eigen::VectorXd step = h.ldlt().solve(grad);
    if (!step.allFinite()) break;
    double t = 1.0;
    bool moved = false;
    for (int attempt = 0; attempt < 40; ++attempt, t *= 0.5) {
      const Eigen::VectorXd G = r.G + t * step;
      const double v = semi_dual(G, trial_F);
      if (v >= value + 1e-4 * t * grad.dot(step) || (v >= value && attempt > 30)) {
        r.G = G;
        F = trial_F;
        value = v;
        moved = true;
        break;
      }
    }
    if (!moved) break;
  }
  r.F = F;
  return steps;
}

}  // namespace

void SolverConfig::validate() const {
  if (!(tolerance > 0.0)) throw Error(ErrorCode::InvalidArgument, "solver config: tolerance must be positive");
  if (max_iterations < 1) throw Error(ErrorCode::InvalidArgument, "solver config: max_iterations must be >= 1");
}

double marginal_error(const Eigen::MatrixXd& plan, const Eigen::VectorXd& mu, const Eigen::VectorXd& nu) {
  const double rows = (plan.rowwise().sum() - mu).cwiseAbs().sum();
  const double cols = (plan.colwise().sum().transpose() - nu).cwiseAbs().sum();
  return std::max(rows, cols);
}

LogSinkhornResult solve_log_sinkhorn(const Eigen::MatrixXd& cost, const Eigen::VectorXd& mu, const Eigen::VectorXd& nu,
                                     double sigma2, const SolverConfig& cfg, const Eigen::VectorXd* g_init) {
  cfg.validate();
  if (!(sigma2 > 0.0) || !std::isfinite(sigma2)) {
    throw Error(ErrorCode::InvalidArgument, "sinkhorn: sigma2 must be positive (the unregularized limit is not handled here)");
  }
  if (cost.rows() != mu.size() || cost.cols() != nu.size()) {
    throw Error(ErrorCode::DimensionMismatch, "sinkhorn: cost matrix shape does not match marginals");
  }
  if (g_init && g_init->size() != nu.size()) {
    throw Error(ErrorCode::DimensionMismatch, "sinkhorn: initial column potential has the wrong length");
  }
  const Eigen::MatrixXd neg_k = cost.unaryExpr([](double c) { return c == kInf ? kNegInf : -c; });
  check_feasible(neg_k, mu, nu);

  LogSinkhornResult out;
  std::vector<double>* trace = cfg.record_trace ? &out.error_trace : nullptr;
  const Eigen::MatrixXd logk = cost.unaryExpr([sigma2](double c) { return c == kInf ? kNegInf : -c / sigma2; });
  LogState st{logk, safe_log(mu), safe_log(nu)};
  // Dense Newton is cheap enough below this many columns.
  constexpr Eigen::Index kNewtonMaxColumns = 500;
  constexpr std::size_t kNewtonMaxSteps = 50;
  const bool polish = nu.size() <= kNewtonMaxColumns;

  auto attempt = [&](bool scaling, const Eigen::VectorXd& g0) {
    Eigen::VectorXd g = g0;
    if (scaling) {
      double scale = 0.0;
      for (Eigen::Index k = 0; k < cost.size(); ++k) {
        if (cost.data()[k] != kInf) scale = std::max(scale, std::abs(cost.data()[k]));
      }
      const double stage_tol = std::max(cfg.tolerance, 1e-6);
      for (double eps = scale; eps > 2.0 * sigma2 && out.iterations < cfg.max_iterations; eps *= 0.5) {
        StageResult s = run_stage(cost, mu, nu, eps, stage_tol, cfg.max_iterations - out.iterations, g, trace, false);
        out.iterations += s.iterations;
        g = s.G;
      }
    }
    const std::size_t budget = std::max<std::size_t>(cfg.max_iterations - std::min(out.iterations, cfg.max_iterations), 1);
    StageResult s = run_stage(cost, mu, nu, sigma2, cfg.tolerance, budget, g, trace, polish);
    out.iterations += s.iterations;
    const std::size_t newton_budget = std::min(kNewtonMaxSteps, cfg.max_iterations - std::min(out.iterations, cfg.max_iterations));
    if (!s.converged && polish && newton_budget > 0) {
      s.F /= sigma2;
      s.G /= sigma2;
      out.iterations += newton_polish(st, mu, nu, cfg.tolerance, newton_budget, s);
      if (trace) trace->push_back(s.row_error);
      s.F *= sigma2;
      s.G *= sigma2;
    }
    out.f = s.F;
    out.g = s.G;
    out.plan = st.plan(out.f / sigma2, out.g / sigma2);
    out.marginal_error = marginal_error(out.plan, mu, nu);
    out.converged = s.converged && out.marginal_error <= std::max({cfg.tolerance, 1e-15, 2.0 * s.floor});
  };

  const Eigen::VectorXd g0 = g_init ? *g_init : Eigen::VectorXd::Zero(nu.size());
  attempt(cfg.epsilon_scaling, g0);
  // Small sigma2 relative to the cost range makes plain iterations crawl; annealing
  // the weight from the cost scale down usually recovers.
  if (!out.converged && !cfg.epsilon_scaling && out.iterations < cfg.max_iterations) attempt(true, g0);
  return out;
}

Eigen::VectorXd weights_vector(const DiscreteMeasure& m) {
  return Eigen::Map<const Eigen::VectorXd>(m.weights().data(), static_cast<Eigen::Index>(m.size()));
}

double transport_cost(const Eigen::MatrixXd& mass, const Eigen::MatrixXd& cost) {
  if (mass.rows() != cost.rows() || mass.cols() != cost.cols()) {
    throw Error(ErrorCode::DimensionMismatch, "transport_cost: shape mismatch");
  }
  double s = 0.0;
  for (Eigen::Index j = 0; j < mass.cols(); ++j) {
    for (Eigen::Index i = 0; i < mass.rows(); ++i) {
      const double m = mass(i, j);
      if (m <= 0.0) continue;
      if (cost(i, j) == kInf) return kInf;
      s += m * cost(i, j);
    }
  }
  return s;
}

double transport_cost(const Coupling& g, const CostModel& cost) {
  return transport_cost(g.mass(), cost_matrix(cost, g.row_support(), g.col_support()));
}

SinkhornSolution sinkhorn(const DiscreteMeasure& mu, const DiscreteMeasure& nu, const CostModel& cost, double sigma2,
                          const SolverConfig& cfg, const Eigen::VectorXd* g_init) {
  if (mu.dim() != nu.dim() || mu.dim() != cost.dim) {
    throw Error(ErrorCode::DimensionMismatch, "sinkhorn: marginals and cost model disagree on dimension");
  }
  const Eigen::MatrixXd c = cost_matrix(cost, mu.atoms(), nu.atoms());
  LogSinkhornResult r = solve_log_sinkhorn(c, weights_vector(mu), weights_vector(nu), sigma2, cfg, g_init);
  if (!r.converged) {
    std::ostringstream msg;
    msg.precision(6);
    msg << "sinkhorn: no convergence after " << r.iterations << " iterations (marginal error " << r.marginal_error
        << ", tolerance " << cfg.tolerance << ")";
    throw NotConvergedError(msg.str(), r.marginal_error, r.iterations);
  }
  const double tc = transport_cost(r.plan, c);
  const double mi = mutual_information(r.plan);
  return SinkhornSolution{Coupling(mu.dim(), mu.atoms(), nu.atoms(), std::move(r.plan)),
                          std::move(r.f),
                          std::move(r.g),
                          r.iterations,
                          r.marginal_error,
                          tc,
                          mi,
                          tc + sigma2 * mi,
                          std::move(r.error_trace)};
}

EntropyOffset entropy_formulation_offset(const DiscreteMeasure& mu, const DiscreteMeasure& nu, const CostModel& cost,
                                         double sigma2, const SolverConfig& cfg) {
  SinkhornSolution sol = sinkhorn(mu, nu, cost, sigma2, cfg);
  const double mi_form = sol.transport_cost + sigma2 * sol.mutual_information;
  const double entropy_form = sol.transport_cost - sigma2 * shannon_entropy(sol.coupling);
  EntropyOffset out{mi_form - entropy_form, sigma2 * (shannon_entropy(mu) + shannon_entropy(nu)), std::move(sol)};
  return out;
}

nlohmann::json to_json(const SinkhornSolution& s, bool emit_coupling) {
  nlohmann::json j;
  j["objective"] = s.objective;
  j["transport_cost"] = s.transport_cost;
  j["mutual_information"] = s.mutual_information;
  j["iterations"] = s.iterations;
  j["marginal_error"] = s.marginal_error;
  j["dual_row"] = std::vector<double>(s.dual_row.data(), s.dual_row.data() + s.dual_row.size());
  j["dual_col"] = std::vector<double>(s.dual_col.data(), s.dual_col.data() + s.dual_col.size());
  if (emit_coupling) j["coupling"] = to_json(s.coupling);
  return j;
}

}  // namespace entdecon
