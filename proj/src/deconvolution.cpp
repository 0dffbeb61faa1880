#include "entdecon/deconvolution.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <optional>

#include "entdecon/error.hpp"
#include "entdecon/information.hpp"
#include "entdecon/relaxed.hpp"
#include "entdecon/rng.hpp"

namespace entdecon {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

Eigen::Index idx(std::size_t i) { return static_cast<Eigen::Index>(i); }

std::vector<double> to_std(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

// Renormalize weights that sum to 1 up to accumulated rounding.
Eigen::VectorXd normalized(Eigen::VectorXd p) {
  const double s = p.sum();
  return p / s;
}

DiscreteMeasure measure_on(std::size_t dim, const std::vector<Point>& atoms, const Eigen::VectorXd& p) {
  return DiscreteMeasure(dim, atoms, to_std(normalized(p)));
}

// log f(y_k - x_j), rows = support atoms, columns = observations.
Eigen::MatrixXd log_density_matrix(const NoiseModel& noise, const std::vector<Point>& support,
                                   const std::vector<Point>& obs) {
  Eigen::MatrixXd l(idx(support.size()), idx(obs.size()));
  Point z(noise.dim());
  for (std::size_t k = 0; k < obs.size(); ++k) {
    for (std::size_t j = 0; j < support.size(); ++j) {
      for (std::size_t d = 0; d < z.size(); ++d) z[d] = obs[k][d] - support[j][d];
      l(idx(j), idx(k)) = log_density(noise, z);
    }
  }
  return l;
}

double column_lse(const Eigen::MatrixXd& logf, Eigen::Index k, const Eigen::VectorXd& log_p) {
  double mx = kNegInf;
  for (Eigen::Index j = 0; j < logf.rows(); ++j) mx = std::max(mx, log_p(j) + logf(j, k));
  if (mx == kNegInf) return kNegInf;
  double s = 0.0;
  for (Eigen::Index j = 0; j < logf.rows(); ++j) {
    const double v = log_p(j) + logf(j, k);
    if (v > kNegInf) s += std::exp(v - mx);
  }
  return mx + std::log(s);
}

Eigen::VectorXd log_weights(const Eigen::VectorXd& p) {
  return p.unaryExpr([](double w) { return w > 0.0 ? std::log(w) : kNegInf; });
}

struct FixedSupportEm {
  Eigen::VectorXd p;
  double avg_loglik = 0.0;
  std::vector<TracePoint> trace;  // negative log-likelihood, scaled
  std::size_t iterations = 0;
  bool converged = false;
  double gap = 0.0;
};

// sum_k w_k log mix_k with lse_k = log mix_k; -inf (or Infeasible when
// `strict`) if a weighted observation has zero density.
double average_loglik(const Eigen::MatrixXd& logf, const Eigen::VectorXd& w, const Eigen::VectorXd& p,
                      Eigen::VectorXd& lse, bool strict) {
  const Eigen::VectorXd log_p = log_weights(p);
  lse.resize(logf.cols());
  double avg = 0.0;
  for (Eigen::Index k = 0; k < logf.cols(); ++k) {
    lse(k) = column_lse(logf, k, log_p);
    if (w(k) <= 0.0) continue;
    if (lse(k) == kNegInf) {
      if (!strict) return kNegInf;
      throw Error(ErrorCode::Infeasible,
                  "em: observation " + std::to_string(k) + " has zero density under every support atom");
    }
    avg += w(k) * lse(k);
  }
  return avg;
}

// R_jk = f_jk / mix_k on weighted observations. The gradient of the average
// log-likelihood is R w, its negative Hessian R diag(w) R^T, and R w is also
// the EM multiplier: max_j (R w)_j - 1 is the Frank-Wolfe gap.
Eigen::MatrixXd likelihood_ratios(const Eigen::MatrixXd& logf, const Eigen::VectorXd& w, const Eigen::VectorXd& lse) {
  Eigen::MatrixXd r = Eigen::MatrixXd::Zero(logf.rows(), logf.cols());
  for (Eigen::Index k = 0; k < logf.cols(); ++k) {
    if (w(k) <= 0.0) continue;
    for (Eigen::Index j = 0; j < logf.rows(); ++j) {
      if (logf(j, k) > kNegInf) r(j, k) = std::exp(logf(j, k) - lse(k));
    }
  }
  return r;
}

constexpr std::size_t kEmWarmup = 100;

// Active-set Newton on the weights, started from an EM iterate. EM alone is
// sublinear once weights have to drain from an atom; here an atom with the
// largest gradient enters by a line search towards its vertex, the support
// takes damped Newton steps restricted to sum d = 0, and an atom leaves when a
// step drives it to zero. Every accepted step increases the likelihood.
void likelihood_newton(const Eigen::MatrixXd& logf, const Eigen::VectorXd& w, const EstimatorConfig& cfg,
                       double scale, FixedSupportEm& out) {
  const Eigen::Index m = logf.rows();
  Eigen::VectorXd p = out.p, lse, trial_lse;
  double damping = 1e-12;
  for (std::size_t it = out.iterations + 1; it <= cfg.max_iterations; ++it) {
    const double avg = average_loglik(logf, w, p, lse, true);
    const Eigen::MatrixXd r = likelihood_ratios(logf, w, lse);
    const Eigen::VectorXd g = r * w;
    Eigen::Index top = 0;
    out.gap = g.maxCoeff(&top) - 1.0;
    if (out.gap <= cfg.stationarity_tolerance) {
      out.converged = true;
      return;
    }
    auto accept = [&](const Eigen::VectorXd& q) {
      const double v = average_loglik(logf, w, q, trial_lse, false);
      if (!(v > avg)) return false;
      p = q;
      out.p = q;
      out.avg_loglik = v;
      out.iterations = it;
      out.trace.push_back({it, -scale * v});
      return true;
    };

    bool moved = false;
    if (p(top) == 0.0) {
      // Vertex step; the directional derivative is g_top - 1 > 0.
      double curv = 0.0;
      for (Eigen::Index k = 0; k < w.size(); ++k) curv += w(k) * (r(top, k) - 1.0) * (r(top, k) - 1.0);
      for (double t = std::min(1.0, out.gap / std::max(curv, 1e-300)); t > 1e-16 && !moved; t *= 0.5) {
        Eigen::VectorXd q = (1.0 - t) * p;
        q(top) += t;
        moved = accept(q);
      }
    } else {
      // Atoms on their way out with negligible weight would only block the step.
      std::vector<Eigen::Index> s, shed;
      for (Eigen::Index j = 0; j < m; ++j) {
        if (p(j) <= 0.0) continue;
        (p(j) < 1e-12 && g(j) < 1.0 ? shed : s).push_back(j);
      }
      const auto ns = static_cast<Eigen::Index>(s.size());
      Eigen::MatrixXd rs(ns, w.size());
      Eigen::VectorXd gs(ns);
      for (Eigen::Index a = 0; a < ns; ++a) {
        rs.row(a) = r.row(s[a]);
        gs(a) = g(s[a]);
      }
      const Eigen::MatrixXd h = rs * w.asDiagonal() * rs.transpose();
      const double scale_h = std::max(h.diagonal().maxCoeff(), 1e-300);
      while (!moved && damping <= 1e2) {
        Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(ns + 1, ns + 1);
        kkt.topLeftCorner(ns, ns) = h;
        kkt.topLeftCorner(ns, ns).diagonal().array() += damping * scale_h;
        kkt.block(0, ns, ns, 1).setOnes();
        kkt.block(ns, 0, 1, ns).setOnes();
        Eigen::VectorXd rhs = Eigen::VectorXd::Zero(ns + 1);
        rhs.head(ns) = gs;
        const Eigen::VectorXd d = kkt.fullPivLu().solve(rhs).head(ns);
        double t_max = 1.0;
        Eigen::Index blocking = -1;
        for (Eigen::Index a = 0; a < ns; ++a) {
          if (d(a) < 0.0 && -p(s[a]) / d(a) < t_max) {
            t_max = -p(s[a]) / d(a);
            blocking = a;
          }
        }
        for (double t = t_max; t > 1e-16 && !moved; t *= 0.5) {
          Eigen::VectorXd q = p;
          for (Eigen::Index j : shed) q(j) = 0.0;
          for (Eigen::Index a = 0; a < ns; ++a) q(s[a]) = std::max(0.0, p(s[a]) + t * d(a));
          if (t == t_max && blocking >= 0) q(s[blocking]) = 0.0;
          moved = accept(normalized(q));
        }
        if (moved) {
          damping = std::max(damping * 0.1, 1e-12);
        } else {
          damping *= 100.0;
        }
      }
      damping = std::min(damping, 1e-4);
    }
    // Plain EM step as the last resort.
    if (!moved) moved = accept(normalized(p.cwiseProduct(g)));
    if (!moved) {
      // Stationary to working precision when even the best vertex move,
      // worth about gap^2 / (2 curvature), is below the rounding of the
      // objective; otherwise converged stays false.
      double curv = 0.0;
      for (Eigen::Index k = 0; k < w.size(); ++k) curv += w(k) * (r(top, k) - 1.0) * (r(top, k) - 1.0);
      const double predicted = out.gap * out.gap / (2.0 * std::max(curv, 1e-300));
      out.converged = predicted <= 1e-15 * std::max(1.0, std::abs(avg));
      return;
    }
  }
}

// Weights on a fixed support: EM from p, then likelihood_newton. logf:
// support x observations, w: observation weights summing to 1, scale: the
// reported objective is -scale * sum_k w_k log mix(y_k).
FixedSupportEm em_fixed_support(const Eigen::MatrixXd& logf, const Eigen::VectorXd& w, Eigen::VectorXd p,
                                const EstimatorConfig& cfg, double scale) {
  FixedSupportEm out;
  Eigen::VectorXd lse;
  double prev = kInf;
  for (std::size_t it = 0;; ++it) {
    const double avg = average_loglik(logf, w, p, lse, true);
    const double objective = -scale * avg;
    if (objective > prev) break;  // only reachable through rounding at the fixed point
    out.p = p;
    out.avg_loglik = avg;
    out.iterations = it;
    out.trace.push_back({it, objective});
    const Eigen::VectorXd ratio = likelihood_ratios(logf, w, lse) * w;
    out.gap = ratio.maxCoeff() - 1.0;
    if (out.gap <= cfg.stationarity_tolerance) {
      out.converged = true;
      return out;
    }
    if (it >= std::min(cfg.max_iterations, kEmWarmup) || (it > 0 && prev - objective < cfg.gain_tolerance)) break;
    prev = objective;
    p = normalized(p.cwiseProduct(ratio));
  }
  likelihood_newton(logf, w, cfg, scale, out);
  return out;
}

void check_dims(std::size_t a, std::size_t b, const char* what) {
  if (a != b) throw Error(ErrorCode::DimensionMismatch, std::string(what) + ": dimension mismatch");
}

double sq_dist(const Point& a, const Point& b) {
  double s = 0.0;
  for (std::size_t d = 0; d < a.size(); ++d) s += (a[d] - b[d]) * (a[d] - b[d]);
  return s;
}

// Entropic objective of a Sinkhorn solve, evaluated through the potentials:
// with exact marginals <c, gamma> + sigma2 I(gamma) = <p, f> + <nu, g>.
double dual_value(const LogSinkhornResult& r, const Eigen::VectorXd& p, const Eigen::VectorXd& nu) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    if (p(i) > 0.0) s += p(i) * r.f(i);
  }
  for (Eigen::Index j = 0; j < nu.size(); ++j) {
    if (nu(j) > 0.0) s += nu(j) * r.g(j);
  }
  return s;
}

struct MirrorState {
  Eigen::VectorXd p;
  LogSinkhornResult solve;
  double value = kInf;
};

// value is +inf when the solve fails or no coupling avoids forbidden routes.
MirrorState solve_at(const Eigen::MatrixXd& c, const Eigen::VectorXd& p, const Eigen::VectorXd& nu, double sigma2,
                     const SolverConfig& scfg, const Eigen::VectorXd* g_warm) {
  MirrorState s{p, {}, kInf};
  try {
    s.solve = solve_log_sinkhorn(c, p, nu, sigma2, scfg, g_warm);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::Infeasible) throw;
    return s;
  }
  if (s.solve.converged) s.value = dual_value(s.solve, p, nu);
  return s;
}

// Frank-Wolfe gap of p -> W(p, nu) on the simplex, divided by sigma2.
double mirror_gap(const MirrorState& s, double sigma2) {
  double mn = kInf, avg = 0.0;
  for (Eigen::Index i = 0; i < s.p.size(); ++i) {
    mn = std::min(mn, s.solve.f(i));
    if (s.p(i) > 0.0) avg += s.p(i) * s.solve.f(i);
  }
  return (avg - mn) / sigma2;
}

// Relative rounding level of the dual objective; steps are accepted when they
// do not increase it by more than this.
constexpr double kObjectiveRounding = 1e-14;

bool no_worse(double next, double current) {
  return next <= current + kObjectiveRounding * std::max(1.0, std::abs(current));
}

// One step p <- p exp(-t (f - min f) / sigma2) with t = 1, halved while the
// objective increases. Returns false when no step size is accepted.
bool mirror_step(const Eigen::MatrixXd& c, const Eigen::VectorXd& nu, double sigma2, const SolverConfig& scfg,
                 MirrorState& state) {
  const Eigen::VectorXd& f = state.solve.f;
  const double fmin = f.minCoeff();
  double step = 1.0;
  for (int attempt = 0; attempt < 30; ++attempt, step *= 0.5) {
    Eigen::VectorXd logp(state.p.size());
    double mx = kNegInf;
    for (Eigen::Index i = 0; i < logp.size(); ++i) {
      logp(i) = state.p(i) > 0.0 ? std::log(state.p(i)) - step * (f(i) - fmin) / sigma2 : kNegInf;
      mx = std::max(mx, logp(i));
    }
    Eigen::VectorXd p_new = (logp.array() - mx).exp().matrix();
    p_new /= p_new.sum();
    MirrorState next = solve_at(c, p_new, nu, sigma2, scfg, &state.solve.g);
    if (no_worse(next.value, state.value)) {
      state = std::move(next);
      return true;
    }
  }
  return false;
}

void require_gaussian_cost(const CostModel& cost, const char* what) {
  if (!std::holds_alternative<GaussianHalfSq>(cost.kind)) {
    throw Error(ErrorCode::InvalidArgument, std::string(what) + ": k-atom classes require the Gaussian cost");
  }
}

std::vector<Point> barycenters(const Eigen::MatrixXd& plan, const std::vector<Point>& ys, std::vector<Point> atoms) {
  for (Eigen::Index i = 0; i < plan.rows(); ++i) {
    const double mass = plan.row(i).sum();
    if (!(mass > 0.0)) continue;
    Point a(ys.front().size(), 0.0);
    for (Eigen::Index j = 0; j < plan.cols(); ++j) {
      for (std::size_t d = 0; d < a.size(); ++d) a[d] += plan(i, j) * ys[static_cast<std::size_t>(j)][d];
    }
    for (auto& v : a) v /= mass;
    atoms[static_cast<std::size_t>(i)] = std::move(a);
  }
  return atoms;
}

// Derivative of the row potential f along a weight direction d (sum d = 0),
// from differentiating the Sinkhorn fixed point
//   sum_j nu_j A_ij = 1,  sum_i p_i A_ij = 1,  A_ij = exp((f_i + g_j - c_ij) / sigma2).
// The column system (I - T) dG = -A^T d has the constant vector as kernel and
// nu as left kernel; adding 1 nu^T selects the solution with nu^T dG = 0.
class PotentialJacobian {
 public:
  PotentialJacobian(const Eigen::MatrixXd& c, const Eigen::VectorXd& p, const Eigen::VectorXd& nu,
                    const LogSinkhornResult& r, double sigma2)
      : sigma2_(sigma2), nu_(nu) {
    a_.resize(c.rows(), c.cols());
    for (Eigen::Index j = 0; j < c.cols(); ++j) {
      for (Eigen::Index i = 0; i < c.rows(); ++i) {
        a_(i, j) = c(i, j) == kInf ? 0.0 : std::exp((r.f(i) + r.g(j) - c(i, j)) / sigma2);
      }
    }
    const Eigen::MatrixXd t = a_.transpose() * p.asDiagonal() * a_ * nu.asDiagonal();
    Eigen::MatrixXd sys = Eigen::MatrixXd::Identity(c.cols(), c.cols()) - t;
    sys += Eigen::VectorXd::Ones(c.cols()) * nu.transpose();
    lu_ = sys.partialPivLu();
  }

  Eigen::VectorXd df(const Eigen::VectorXd& d) const {
    const Eigen::VectorXd dg = lu_.solve(-(a_.transpose() * d));
    return -sigma2_ * (a_ * nu_.asDiagonal() * dg);
  }

 private:
  double sigma2_;
  Eigen::VectorXd nu_;
  Eigen::MatrixXd a_;
  Eigen::PartialPivLU<Eigen::MatrixXd> lu_;
};

// Second-order model of W(p) on weights supported on `active`, in reduced
// coordinates q: p = p0 + sum_b q_b (e_b - e_ref), ref the heaviest atom.
struct ReducedModel {
  Eigen::Index ref = 0;
  std::vector<Eigen::Index> free;
  Eigen::MatrixXd hessian;
  Eigen::VectorXd gradient;
  Eigen::MatrixXd metric;  // entropic metric diag(1/p) pulled back to q

  Eigen::VectorXd lift(const Eigen::VectorXd& q, Eigen::Index n) const {
    Eigen::VectorXd d = Eigen::VectorXd::Zero(n);
    for (std::size_t b = 0; b < free.size(); ++b) {
      d(free[b]) += q(idx(b));
      d(ref) -= q(idx(b));
    }
    return d;
  }
};

ReducedModel reduced_model(const Eigen::MatrixXd& c, const Eigen::VectorXd& nu, double sigma2, const MirrorState& s,
                           const std::vector<Eigen::Index>& active) {
  constexpr double kWeightFloor = 1e-6;
  ReducedModel m;
  m.ref = active.front();
  for (Eigen::Index i : active) {
    if (s.p(i) > s.p(m.ref)) m.ref = i;
  }
  for (Eigen::Index i : active) {
    if (i != m.ref) m.free.push_back(i);
  }
  const auto r = idx(m.free.size());
  m.hessian.resize(r, r);
  m.gradient.resize(r);
  m.metric = Eigen::MatrixXd::Constant(r, r, 1.0 / std::max(s.p(m.ref), kWeightFloor));
  if (r == 0) return m;
  const PotentialJacobian jac(c, s.p, nu, s.solve, sigma2);
  for (Eigen::Index b = 0; b < r; ++b) {
    const Eigen::Index fb = m.free[static_cast<std::size_t>(b)];
    Eigen::VectorXd d = Eigen::VectorXd::Zero(s.p.size());
    d(fb) = 1.0;
    d(m.ref) = -1.0;
    const Eigen::VectorXd dfb = jac.df(d);
    for (Eigen::Index a = 0; a < r; ++a) m.hessian(a, b) = dfb(m.free[static_cast<std::size_t>(a)]) - dfb(m.ref);
    m.gradient(b) = s.solve.f(fb) - s.solve.f(m.ref);
    m.metric(b, b) += 1.0 / std::max(s.p(fb), kWeightFloor);
  }
  m.hessian = 0.5 * (m.hessian + m.hessian.transpose());
  return m;
}

// Optimality system of min_p W(p, nu) on an active set S in semi-dual
// variables. With f_i(g) = -sigma2 log sum_j nu_j exp((g_j - c_ij) / sigma2)
// and a_ij = exp((f_i(g) + g_j - c_ij) / sigma2), solve
//
//   sum_{i in S} p_i a_ij = 1  (every column),    f_i(g) = 0  (i in S).
//
// The second block fixes the gauge of g, so a block of the plan that is
// nearly decoupled from the rest leaves this system well conditioned while
// the Hessian of p -> W(p, nu) becomes nearly singular. Atoms leave S when
// their weight turns negative and enter when f_i(g) < 0.
struct SemiDual {
  Eigen::VectorXd f;
  Eigen::MatrixXd a;
};

SemiDual semi_dual(const Eigen::MatrixXd& c, const Eigen::VectorXd& log_nu, const Eigen::VectorXd& g, double sigma2) {
  SemiDual s{Eigen::VectorXd(c.rows()), Eigen::MatrixXd::Zero(c.rows(), c.cols())};
  Eigen::VectorXd e(c.cols());
  for (Eigen::Index i = 0; i < c.rows(); ++i) {
    double mx = kNegInf;
    for (Eigen::Index j = 0; j < c.cols(); ++j) {
      e(j) = c(i, j) == kInf ? kNegInf : (g(j) - c(i, j)) / sigma2;
      mx = std::max(mx, log_nu(j) + e(j));
    }
    if (mx == kNegInf) {
      s.f(i) = kInf;
      continue;
    }
    double sum = 0.0;
    for (Eigen::Index j = 0; j < c.cols(); ++j) {
      if (e(j) > kNegInf) sum += std::exp(log_nu(j) + e(j) - mx);
    }
    const double lse = mx + std::log(sum);
    s.f(i) = -sigma2 * lse;
    for (Eigen::Index j = 0; j < c.cols(); ++j) {
      if (e(j) > kNegInf) s.a(i, j) = std::exp(e(j) - lse);
    }
  }
  return s;
}

struct OptimalityPoint {
  Eigen::VectorXd p, f, g;
};

std::optional<OptimalityPoint> solve_optimality_system(const Eigen::MatrixXd& c, const Eigen::VectorXd& nu,
                                                       double sigma2, const Eigen::VectorXd& p0, Eigen::VectorXd g) {
  const Eigen::Index m = c.rows(), n = c.cols();
  if ((nu.array() <= 0.0).any()) return std::nullopt;
  const Eigen::VectorXd log_nu = nu.array().log();
  std::vector<Eigen::Index> act;
  for (Eigen::Index i = 0; i < m; ++i) {
    if (p0(i) > 0.0) act.push_back(i);
  }
  Eigen::VectorXd p = p0;
  {
    const SemiDual s = semi_dual(c, log_nu, g, sigma2);
    double t = 0.0;
    for (Eigen::Index i : act) t += p(i) * s.f(i);
    if (!std::isfinite(t)) return std::nullopt;
    g.array() += t;  // f_i(g + t) = f_i(g) - t
  }
  auto residual = [&](const SemiDual& s, const Eigen::VectorXd& pp, const std::vector<Eigen::Index>& set) {
    Eigen::VectorXd r(n + static_cast<Eigen::Index>(set.size()));
    r.head(n).setConstant(-1.0);
    for (std::size_t b = 0; b < set.size(); ++b) {
      r.head(n) += pp(set[b]) * s.a.row(set[b]).transpose();
      r(n + idx(b)) = s.f(set[b]) / sigma2;
    }
    return r;
  };
  for (Eigen::Index round = 0; round < 2 * m + 2; ++round) {
    const auto ns = static_cast<Eigen::Index>(act.size());
    if (ns == 0) return std::nullopt;
    SemiDual s = semi_dual(c, log_nu, g, sigma2);
    Eigen::VectorXd r = residual(s, p, act);
    bool solved = false;
    for (int it = 0; it < 60; ++it) {
      const double norm = r.lpNorm<Eigen::Infinity>();
      if (norm <= 1e-14) {
        solved = true;
        break;
      }
      Eigen::MatrixXd as(ns, n);
      Eigen::VectorXd ps(ns);
      for (Eigen::Index b = 0; b < ns; ++b) {
        as.row(b) = s.a.row(act[idx(b)]);
        ps(b) = p(act[idx(b)]);
      }
      Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(n + ns, n + ns);
      const Eigen::VectorXd colsum = as.transpose() * ps;
      jac.topLeftCorner(n, n) = (Eigen::MatrixXd(colsum.asDiagonal()) -
                                 as.transpose() * ps.asDiagonal() * as * nu.asDiagonal()) / sigma2;
      jac.topRightCorner(n, ns) = as.transpose();
      jac.bottomLeftCorner(ns, n) = -(as * nu.asDiagonal()) / sigma2;
      const Eigen::VectorXd step = jac.partialPivLu().solve(-r);
      if (!step.allFinite()) return std::nullopt;
      bool moved = false;
      for (double t = 1.0; t > 1e-10; t *= 0.5) {
        Eigen::VectorXd g_t = g + t * step.head(n);
        Eigen::VectorXd p_t = p;
        for (Eigen::Index b = 0; b < ns; ++b) p_t(act[idx(b)]) += t * step(n + b);
        SemiDual s_t = semi_dual(c, log_nu, g_t, sigma2);
        Eigen::VectorXd r_t = residual(s_t, p_t, act);
        if (r_t.allFinite() && r_t.lpNorm<Eigen::Infinity>() < (1.0 - 1e-4 * t) * norm) {
          g = std::move(g_t);
          p = std::move(p_t);
          s = std::move(s_t);
          r = std::move(r_t);
          moved = true;
          break;
        }
      }
      if (!moved) {
        solved = norm <= 1e-12;
        break;
      }
    }
    if (!solved) return std::nullopt;
    Eigen::Index worst = -1;
    for (Eigen::Index i : act) {
      if (p(i) < 0.0 && (worst < 0 || p(i) < p(worst))) worst = i;
    }
    if (worst >= 0) {
      p(worst) = 0.0;
      std::erase(act, worst);
      continue;
    }
    Eigen::Index enter = -1;
    for (Eigen::Index i = 0; i < m; ++i) {
      if (std::find(act.begin(), act.end(), i) != act.end()) continue;
      if (s.f(i) / sigma2 < -1e-12 && (enter < 0 || s.f(i) < s.f(enter))) enter = i;
    }
    if (enter >= 0) {
      p(enter) = 0.0;
      act.push_back(enter);
      continue;
    }
    for (Eigen::Index i = 0; i < m; ++i) {
      if (std::find(act.begin(), act.end(), i) == act.end()) p(i) = 0.0;
    }
    return OptimalityPoint{normalized(p.cwiseMax(0.0)), s.f, g};
  }
  return std::nullopt;
}

constexpr Eigen::Index kOptimalitySystemMaxColumns = 500;

struct WeightSearch {
  std::size_t iterations = 0;
  bool converged = false;
  double gap = kInf;
  std::string note;
};

// Active-set Newton on the weights of fixed atoms: the support gains the atom
// with the smallest potential through a vertex step and loses atoms whose
// weight a damped Newton step drives to zero. A trial point whose solve does
// not converge is rejected.
WeightSearch optimize_weights(const Eigen::MatrixXd& c, const Eigen::VectorXd& nw, double sigma2,
                              const EstimatorConfig& cfg, MirrorState& state, std::vector<TracePoint>& trace) {
  const SolverConfig& trial = cfg.sinkhorn;
  const Eigen::Index m = c.rows();
  std::vector<Eigen::Index> active;
  for (Eigen::Index i = 0; i < m; ++i) {
    if (state.p(i) > 0.0) active.push_back(i);
  }
  double damping = sigma2;
  bool just_solved = false;
  WeightSearch out;
  for (std::size_t it = 0;; ++it) {
    trace.push_back({it, state.value});
    out.iterations = it;
    out.gap = mirror_gap(state, sigma2);
    if (out.gap <= cfg.stationarity_tolerance) {
      out.converged = true;
      break;
    }
    if (it >= cfg.max_iterations) break;

    Eigen::Index best = 0;
    const double fmin = state.solve.f.minCoeff(&best);
    const double slope = fmin - state.p.dot(state.solve.f);
    if (state.p(best) <= 0.0 && slope < 0.0) {
      Eigen::VectorXd d = -state.p;
      d(best) += 1.0;
      const double curvature = d.dot(PotentialJacobian(c, state.p, nw, state.solve, sigma2).df(d));
      double t = curvature > 0.0 ? std::min(1.0, -slope / curvature) : 1.0;
      for (int attempt = 0; attempt < 40; ++attempt, t *= 0.5) {
        MirrorState next = solve_at(c, state.p + t * d, nw, sigma2, trial, &state.solve.g);
        if (std::isfinite(next.value) && next.value < state.value) {
          state = std::move(next);
          active.push_back(best);
          break;
        }
      }
    }

    // Not twice in a row: a repeat from the point it produced would return the same point.
    if (c.cols() <= kOptimalitySystemMaxColumns && !just_solved) {
      just_solved = true;
      if (const auto opt = solve_optimality_system(c, nw, sigma2, state.p, state.solve.g)) {
        MirrorState next = solve_at(c, opt->p, nw, sigma2, trial, &opt->g);
        if (next.solve.converged) {
          // Same plan; the system's potentials also pin the relative gauge of
          // nearly decoupled blocks, which the marginal test cannot see.
          next.solve.f = opt->f;
          next.solve.g = opt->g;
          next.value = dual_value(next.solve, next.p, nw);
        }
        if (std::isfinite(next.value) && no_worse(next.value, state.value)) {
          state = std::move(next);
          active.clear();
          for (Eigen::Index i = 0; i < m; ++i) {
            if (state.p(i) > 0.0) active.push_back(i);
          }
          continue;
        }
      }
    }
    just_solved = false;

    const ReducedModel model = reduced_model(c, nw, sigma2, state, active);
    bool accepted = false;
    for (int attempt = 0; attempt < 40 && !accepted; ++attempt) {
      const Eigen::VectorXd q = (model.hessian + damping * model.metric).ldlt().solve(-model.gradient);
      const Eigen::VectorXd dir = model.lift(q, m);
      double alpha = 1.0;
      Eigen::Index blocking = -1;
      for (Eigen::Index i : active) {
        if (dir(i) < 0.0 && state.p(i) + alpha * dir(i) < 0.0) {
          alpha = state.p(i) / -dir(i);
          blocking = i;
        }
      }
      Eigen::VectorXd p_new = (state.p + alpha * dir).cwiseMax(0.0);
      if (blocking >= 0) p_new(blocking) = 0.0;
      p_new /= p_new.sum();
      const double predicted = alpha * model.gradient.dot(q) + 0.5 * alpha * alpha * q.dot(model.hessian * q);
      MirrorState next = solve_at(c, p_new, nw, sigma2, trial, &state.solve.g);
      if (std::isfinite(next.value) && no_worse(next.value, state.value)) {
        const double actual = next.value - state.value;
        if (predicted < 0.0 && actual <= 0.25 * predicted) damping = std::max(damping * 0.1, 1e-12 * sigma2);
        state = std::move(next);
        accepted = true;
      } else {
        damping *= 10.0;
      }
    }
    if (!accepted && !mirror_step(c, nw, sigma2, trial, state)) {
      out.note = "no descent step above rounding level; stopped at Frank-Wolfe gap " + std::to_string(out.gap);
      break;
    }
    std::erase_if(active, [&](Eigen::Index i) { return state.p(i) <= 0.0; });
  }
  return out;
}

EstimatorResult entropic_grid(const GridClass& grid, const DiscreteMeasure& nu, const CostModel& cost, double sigma2,
                              const EstimatorConfig& cfg) {
  const Eigen::MatrixXd c = cost_matrix(cost, grid.grid, nu.atoms());
  const Eigen::VectorXd nw = weights_vector(nu);
  const auto m = idx(grid.grid.size());
  // Direct solve: infeasibility of the uniform start surfaces as an error here.
  const Eigen::VectorXd p0 = Eigen::VectorXd::Constant(m, 1.0 / static_cast<double>(m));
  MirrorState state{p0, solve_log_sinkhorn(c, p0, nw, sigma2, cfg.sinkhorn, nullptr), kInf};
  if (state.solve.converged) state.value = dual_value(state.solve, p0, nw);
  if (!std::isfinite(state.value)) {
    throw NotConvergedError("project_entropic: initial Sinkhorn solve did not converge", state.solve.marginal_error,
                            state.solve.iterations);
  }
  EstimatorResult out{DiscreteMeasure(nu.dim(), grid.grid, std::vector<double>(grid.grid.size(), 1.0 / m)),
                      state.value, ObjectiveKind::EntropicProjection};
  const WeightSearch ws = optimize_weights(c, nw, sigma2, cfg, state, out.trace);
  out.iterations = ws.iterations;
  out.converged = ws.converged;
  out.stationarity_gap = ws.gap;
  out.note = ws.note;
  out.estimate = measure_on(nu.dim(), grid.grid, state.p);
  out.objective_value = state.value;
  return out;
}

// sum_j nu_j post(. | y_j), post(a | y) proportional to p_a exp(-c(a, y) / sigma2).
Eigen::VectorXd gibbs_marginal(const Eigen::MatrixXd& c, const Eigen::VectorXd& p, const Eigen::VectorXd& nu,
                               double sigma2) {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(p.size());
  Eigen::ArrayXd logits(p.size());
  for (Eigen::Index j = 0; j < c.cols(); ++j) {
    for (Eigen::Index a = 0; a < p.size(); ++a) {
      logits(a) = p(a) > 0.0 && c(a, j) != kInf ? std::log(p(a)) - c(a, j) / sigma2 : kNegInf;
    }
    const Eigen::ArrayXd post = (logits - logits.maxCoeff()).exp();
    out += (nu(j) / post.sum()) * post.matrix();
  }
  return out / out.sum();
}

// Start r: the caller's atom sets first, then k-means++ seeds.
std::vector<Point> initial_atoms(const EstimatorConfig& cfg, const DiscreteMeasure& nu, std::size_t k, std::size_t r) {
  if (r < cfg.initial_atoms.size()) {
    const auto& atoms = cfg.initial_atoms[r];
    if (atoms.size() != k) throw Error(ErrorCode::DimensionMismatch, "initial atoms: expected k atoms");
    for (const auto& a : atoms) {
      if (a.size() != nu.dim()) throw Error(ErrorCode::DimensionMismatch, "initial atoms: dimension mismatch");
    }
    return atoms;
  }
  return kmeanspp_seed(nu, k, cfg.seed + (r - cfg.initial_atoms.size()));
}

EstimatorResult entropic_katom(std::size_t k, const DiscreteMeasure& nu, const CostModel& cost, double sigma2,
                               const EstimatorConfig& cfg) {
  require_gaussian_cost(cost, "project_entropic");
  const std::size_t dim = nu.dim();
  const Eigen::VectorXd nw = weights_vector(nu);
  const SolverConfig& inner = cfg.sinkhorn;
  std::optional<EstimatorResult> best;
  const std::size_t starts = cfg.initial_atoms.size() + std::max<std::size_t>(cfg.restarts, 1);
  for (std::size_t r = 0; r < starts; ++r) {
    std::vector<Point> atoms = initial_atoms(cfg, nu, k, r);
    Eigen::MatrixXd c = cost_matrix(cost, atoms, nu.atoms());
    // Exact cluster proportions are a poor start: cross-cluster flows then
    // have to balance at exponentially small levels and Sinkhorn crawls.
    const Eigen::VectorXd p0 =
        gibbs_marginal(c, Eigen::VectorXd::Constant(idx(k), 1.0 / static_cast<double>(k)), nw, sigma2);
    MirrorState state = solve_at(c, p0, nw, sigma2, inner, nullptr);
    if (!std::isfinite(state.value)) continue;
    EstimatorResult res{measure_on(dim, atoms, state.p), state.value, ObjectiveKind::EntropicProjection};
    for (std::size_t it = 0;; ++it) {
      res.trace.push_back({it, state.value});
      res.iterations = it;
      if (it >= cfg.max_iterations) break;
      const double before = state.value;
      // Atoms to the barycenters of their transported mass, then weights.
      std::vector<Point> moved = barycenters(state.solve.plan, nu.atoms(), atoms);
      const Eigen::MatrixXd c_moved = cost_matrix(cost, moved, nu.atoms());
      MirrorState after_move = solve_at(c_moved, state.p, nw, sigma2, inner, &state.solve.g);
      if (no_worse(after_move.value, state.value)) {
        atoms = std::move(moved);
        c = c_moved;
        state = std::move(after_move);
      }
      // Weights to the first marginal of the Gibbs coupling at the current
      // weights. W cannot increase: W(p') <= V(p) <= W(p), V the relaxed value.
      MirrorState reweighted = solve_at(c, gibbs_marginal(c, state.p, nw, sigma2), nw, sigma2, inner, &state.solve.g);
      if (no_worse(reweighted.value, state.value)) state = std::move(reweighted);
      if (before - state.value < cfg.gain_tolerance) {
        res.trace.push_back({it + 1, state.value});
        res.iterations = it + 1;
        res.converged = true;
        break;
      }
    }
    res.stationarity_gap = mirror_gap(state, sigma2);
    res.estimate = measure_on(dim, atoms, state.p).canonical();
    res.objective_value = state.value;
    res.note = "k-atom alternation converges to a local minimum; best of " + std::to_string(starts) +
               " initializations";
    if (!best || res.objective_value < best->objective_value) best = std::move(res);
  }
  if (!best) throw Error(ErrorCode::NotConverged, "project_entropic: no initialization produced a converged solve");
  return *best;
}

EstimatorResult em_katom(const DiscreteMeasure& obs, double n, std::size_t k, const NoiseModel& noise,
                         const EstimatorConfig& cfg) {
  const auto* g = std::get_if<GaussianHalfSq>(&noise.kind());
  if (!g) throw Error(ErrorCode::InvalidArgument, "mle: k-atom classes require Gaussian noise");
  const std::size_t dim = obs.dim();
  const Eigen::VectorXd w = weights_vector(obs);
  std::optional<EstimatorResult> best;
  const std::size_t starts = cfg.initial_atoms.size() + std::max<std::size_t>(cfg.restarts, 1);
  for (std::size_t r = 0; r < starts; ++r) {
    std::vector<Point> atoms = initial_atoms(cfg, obs, k, r);
    Eigen::VectorXd p = Eigen::VectorXd::Constant(idx(k), 1.0 / static_cast<double>(k));
    EstimatorResult res{measure_on(dim, atoms, p), kInf, ObjectiveKind::NegLogLikelihood};
    double prev = kInf;
    for (std::size_t it = 0;; ++it) {
      const Eigen::MatrixXd logf = log_density_matrix(noise, atoms, obs.atoms());
      const Eigen::VectorXd log_p = log_weights(p);
      Eigen::MatrixXd post(idx(k), logf.cols());
      double avg = 0.0;
      for (Eigen::Index j = 0; j < logf.cols(); ++j) {
        const double lse = column_lse(logf, j, log_p);
        avg += w(j) * lse;
        for (Eigen::Index a = 0; a < idx(k); ++a) post(a, j) = std::exp(log_p(a) + logf(a, j) - lse);
      }
      const double objective = -n * avg;
      if (objective > prev) break;
      res.trace.push_back({it, objective});
      res.iterations = it;
      res.objective_value = objective;
      res.estimate = measure_on(dim, atoms, p);
      if (prev - objective < cfg.gain_tolerance) {
        res.converged = true;
        break;
      }
      if (it >= cfg.max_iterations) break;
      prev = objective;
      // M-step: weights and posterior means.
      Eigen::MatrixXd weighted = post * w.asDiagonal();
      Eigen::VectorXd mass = weighted.rowwise().sum();
      for (std::size_t a = 0; a < k; ++a) {
        if (!(mass(idx(a)) > 0.0)) continue;
        Point x(dim, 0.0);
        for (std::size_t j = 0; j < obs.size(); ++j) {
          for (std::size_t d = 0; d < dim; ++d) x[d] += weighted(idx(a), idx(j)) * obs.atom(j)[d];
        }
        for (auto& v : x) v /= mass(idx(a));
        atoms[a] = std::move(x);
      }
      p = normalized(mass);
    }
    res.estimate = res.estimate.canonical();
    res.note = "k-atom EM converges to a local maximum; best of " +
               std::to_string(std::max<std::size_t>(cfg.restarts, 1)) + " seeded initializations";
    if (!best || res.objective_value < best->objective_value) best = std::move(res);
  }
  return *best;
}

}  // namespace

MixtureClass::MixtureClass(Kind kind, std::size_t dim) : kind_(std::move(kind)), dim_(dim) {
  std::visit(Overloaded{
                 [&](const GridClass& g) {
                   if (g.grid.empty()) throw Error(ErrorCode::InvalidArgument, "grid class: empty grid");
                   for (const auto& x : g.grid) check_dims(x.size(), dim_, "grid class");
                 },
                 [&](const KAtomClass& k) {
                   if (k.k == 0) throw Error(ErrorCode::InvalidArgument, "k-atom class: k must be positive");
                 },
                 [&](const ExplicitFiniteClass& e) {
                   if (e.candidates.empty()) throw Error(ErrorCode::InvalidArgument, "explicit class: no candidates");
                   for (const auto& c : e.candidates) check_dims(c.dim(), dim_, "explicit class");
                 },
             },
             kind_);
}

bool MixtureClass::closed_under_domination() const noexcept {
  return !std::holds_alternative<ExplicitFiniteClass>(kind_);
}

std::string MixtureClass::name() const {
  return std::visit(Overloaded{[](const GridClass&) { return std::string("grid"); },
                               [](const KAtomClass&) { return std::string("k-atom"); },
                               [](const ExplicitFiniteClass&) { return std::string("explicit"); }},
                    kind_);
}

MixtureClass mixture_class_from_json(const nlohmann::json& j, std::size_t dim_hint, const std::string& base_dir) {
  if (!j.is_object() || !j.contains("kind") || !j["kind"].is_string()) {
    throw Error(ErrorCode::Parse, "class spec: expected an object with a string field 'kind'");
  }
  const auto kind = j["kind"].get<std::string>();
  if (kind == "grid") {
    if (!j.contains("atoms") || !j["atoms"].is_array()) throw Error(ErrorCode::Parse, "class spec: grid requires 'atoms'");
    std::vector<Point> grid;
    for (const auto& a : j["atoms"]) {
      if (a.is_number()) {
        grid.push_back({a.get<double>()});
      } else if (a.is_array()) {
        try {
          grid.push_back(a.get<Point>());
        } catch (const nlohmann::json::exception&) {
          throw Error(ErrorCode::Parse, "class spec: grid atoms must be numbers or numeric arrays");
        }
      } else {
        throw Error(ErrorCode::Parse, "class spec: grid atoms must be numbers or numeric arrays");
      }
    }
    const std::size_t dim = grid.empty() ? dim_hint : grid.front().size();
    return MixtureClass(GridClass{std::move(grid)}, dim);
  }
  if (kind == "k-atom") {
    if (!j.contains("k") || !j["k"].is_number_integer() || j["k"].get<long long>() <= 0) {
      throw Error(ErrorCode::Parse, "class spec: k-atom requires a positive integer 'k'");
    }
    return MixtureClass(KAtomClass{j["k"].get<std::size_t>()}, dim_hint);
  }
  if (kind == "explicit") {
    std::vector<DiscreteMeasure> cands;
    if (j.contains("files")) {
      for (const auto& f : j["files"]) {
        if (!f.is_string()) throw Error(ErrorCode::Parse, "class spec: 'files' must hold strings");
        std::filesystem::path path(f.get<std::string>());
        if (path.is_relative() && !base_dir.empty()) path = std::filesystem::path(base_dir) / path;
        cands.push_back(load_measure(path.string()));
      }
    }
    if (j.contains("candidates")) {
      for (const auto& c : j["candidates"]) cands.push_back(measure_from_json(c));
    }
    if (cands.empty()) throw Error(ErrorCode::Parse, "class spec: explicit class requires 'files' or 'candidates'");
    const std::size_t dim = cands.front().dim();
    return MixtureClass(ExplicitFiniteClass{std::move(cands)}, dim);
  }
  throw Error(ErrorCode::Parse, "class spec: unknown kind '" + kind + "'");
}

std::string to_string(ObjectiveKind kind) {
  switch (kind) {
    case ObjectiveKind::NegLogLikelihood:
      return "neg_log_likelihood";
    case ObjectiveKind::EntropicProjection:
      return "entropic_projection";
    case ObjectiveKind::RelaxedProjection:
      return "relaxed_projection";
    case ObjectiveKind::HardKMeans:
      return "hard_kmeans";
  }
  return "unknown";
}

LikelihoodResult log_likelihood(const DiscreteMeasure& p, const Sample& sample, const NoiseModel& noise) {
  check_dims(p.dim(), sample.dim(), "log_likelihood");
  check_dims(p.dim(), noise.dim(), "log_likelihood");
  const Eigen::MatrixXd logf = log_density_matrix(noise, p.atoms(), sample.points());
  const Eigen::VectorXd log_p = log_weights(weights_vector(p));
  LikelihoodResult out;
  for (Eigen::Index k = 0; k < logf.cols(); ++k) {
    const double l = column_lse(logf, k, log_p);
    if (l == kNegInf) {
      out.value = kNegInf;
      out.unreachable_row = static_cast<std::size_t>(k);
      return out;
    }
    out.value += l;
  }
  return out;
}

EstimatorResult mle_weighted(const DiscreteMeasure& obs, double n, const MixtureClass& cls, const NoiseModel& noise,
                             const EstimatorConfig& cfg) {
  check_dims(obs.dim(), cls.dim(), "mle");
  check_dims(obs.dim(), noise.dim(), "mle");
  return std::visit(
      Overloaded{
          [&](const GridClass& g) {
            const Eigen::MatrixXd logf = log_density_matrix(noise, g.grid, obs.atoms());
            const auto m = idx(g.grid.size());
            FixedSupportEm em = em_fixed_support(logf, weights_vector(obs),
                                                 Eigen::VectorXd::Constant(m, 1.0 / static_cast<double>(m)), cfg, n);
            EstimatorResult r{measure_on(obs.dim(), g.grid, em.p), em.trace.back().objective,
                              ObjectiveKind::NegLogLikelihood, std::move(em.trace), em.converged, em.iterations,
                              em.gap};
            return r;
          },
          [&](const KAtomClass& k) { return em_katom(obs, n, k.k, noise, cfg); },
          [&](const ExplicitFiniteClass& e) {
            std::vector<double> objs;
            std::size_t best = 0;
            for (std::size_t i = 0; i < e.candidates.size(); ++i) {
              const Eigen::MatrixXd logf = log_density_matrix(noise, e.candidates[i].atoms(), obs.atoms());
              const Eigen::VectorXd log_p = log_weights(weights_vector(e.candidates[i]));
              double avg = 0.0;
              for (Eigen::Index k = 0; k < logf.cols(); ++k) {
                if (obs.weight(static_cast<std::size_t>(k)) > 0.0) {
                  avg += obs.weight(static_cast<std::size_t>(k)) * column_lse(logf, k, log_p);
                }
              }
              objs.push_back(std::isnan(avg) ? kInf : -n * avg);
              if (objs[i] < objs[best]) best = i;
            }
            EstimatorResult r{e.candidates[best], objs[best], ObjectiveKind::NegLogLikelihood};
            r.trace.push_back({0, objs[best]});
            r.converged = true;
            r.candidate_index = best;
            r.candidate_objectives = std::move(objs);
            return r;
          },
      },
      cls.kind());
}

EstimatorResult mle(const Sample& sample, const MixtureClass& cls, const NoiseModel& noise, const EstimatorConfig& cfg) {
  return mle_weighted(empirical_measure(sample), static_cast<double>(sample.size()), cls, noise, cfg);
}

EstimatorResult mle_em_grid(const Sample& sample, const GridClass& grid, const NoiseModel& noise,
                            const EstimatorConfig& cfg) {
  return mle(sample, MixtureClass(grid, sample.dim()), noise, cfg);
}

EstimatorResult project_entropic(const MixtureClass& cls, const DiscreteMeasure& nu, const CostModel& cost,
                                 double sigma2, const EstimatorConfig& cfg) {
  check_dims(nu.dim(), cls.dim(), "project_entropic");
  check_dims(nu.dim(), cost.dim, "project_entropic");
  if (!(sigma2 > 0.0)) throw Error(ErrorCode::InvalidArgument, "project_entropic: sigma2 must be positive");
  return std::visit(Overloaded{
                        [&](const GridClass& g) { return entropic_grid(g, nu, cost, sigma2, cfg); },
                        [&](const KAtomClass& k) { return entropic_katom(k.k, nu, cost, sigma2, cfg); },
                        [&](const ExplicitFiniteClass& e) {
                          std::vector<double> objs;
                          std::size_t best = 0;
                          for (std::size_t i = 0; i < e.candidates.size(); ++i) {
                            double v = kInf;
                            try {
                              v = sinkhorn(e.candidates[i], nu, cost, sigma2, cfg.sinkhorn).objective;
                            } catch (const Error& err) {
                              if (err.code() != ErrorCode::Infeasible) throw;
                            }
                            objs.push_back(v);
                            if (objs[i] < objs[best]) best = i;
                          }
                          EstimatorResult r{e.candidates[best], objs[best], ObjectiveKind::EntropicProjection};
                          r.trace.push_back({0, objs[best]});
                          r.converged = true;
                          r.candidate_index = best;
                          r.candidate_objectives = std::move(objs);
                          return r;
                        },
                    },
                    cls.kind());
}

NoiseModel noise_for_cost(const CostModel& cost, double sigma2) {
  return std::visit(Overloaded{
                        [&](const GaussianHalfSq&) { return NoiseModel::gaussian(sigma2, cost.dim); },
                        [&](const NegLogDensity& n) {
                          if (sigma2 != 1.0) {
                            throw Error(ErrorCode::InvalidArgument, "negative log-density costs use entropic weight 1");
                          }
                          return *n.noise;
                        },
                        [&](const auto& other) {
                          if (sigma2 != 1.0) {
                            throw Error(ErrorCode::InvalidArgument,
                                        "costs other than gaussian are pre-scaled and use entropic weight 1");
                          }
                          return NoiseModel(other, cost.dim);
                        },
                    },
                    cost.kind);
}

EstimatorResult project_relaxed(const MixtureClass& cls, const DiscreteMeasure& nu, const CostModel& cost,
                                double sigma2, const EstimatorConfig& cfg) {
  check_dims(nu.dim(), cls.dim(), "project_relaxed");
  check_dims(nu.dim(), cost.dim, "project_relaxed");
  if (!(sigma2 > 0.0)) throw Error(ErrorCode::InvalidArgument, "project_relaxed: sigma2 must be positive");
  const Eigen::VectorXd nw = weights_vector(nu);
  if (const auto* e = std::get_if<ExplicitFiniteClass>(&cls.kind())) {
    std::vector<double> objs;
    std::size_t best = 0;
    for (std::size_t i = 0; i < e->candidates.size(); ++i) {
      const auto& cand = e->candidates[i];
      objs.push_back(relaxed_value(cost_matrix(cost, cand.atoms(), nu.atoms()), weights_vector(cand), nw, sigma2));
      if (objs[i] < objs[best]) best = i;
    }
    EstimatorResult r{e->candidates[best], objs[best], ObjectiveKind::RelaxedProjection};
    r.trace.push_back({0, objs[best]});
    r.converged = true;
    r.candidate_index = best;
    r.candidate_objectives = std::move(objs);
    return r;
  }
  // The relaxed value is an affine function of the average log-likelihood,
  // so the likelihood EM is the solver; its objective is mapped back.
  EstimatorResult r = mle_weighted(nu, 1.0, cls, noise_for_cost(cost, sigma2), cfg);
  const double offset = sigma2 * log_normalizer(noise_for_cost(cost, sigma2));
  for (auto& t : r.trace) t.objective = sigma2 * t.objective + offset;
  r.objective_value = relaxed_value(cost_matrix(cost, r.estimate.atoms(), nu.atoms()), weights_vector(r.estimate), nw,
                                    sigma2);
  r.objective_kind = ObjectiveKind::RelaxedProjection;
  return r;
}

std::vector<Point> kmeanspp_seed(const DiscreteMeasure& nu, std::size_t k, std::uint64_t seed) {
  CounterRng rng(seed);
  const auto pick = [&](const std::vector<double>& mass) {
    double total = 0.0;
    for (double v : mass) total += v;
    const double u = rng.uniform() * total;
    double acc = 0.0;
    for (std::size_t j = 0; j < mass.size(); ++j) {
      acc += mass[j];
      if (u < acc) return j;
    }
    return mass.size() - 1;
  };
  std::vector<Point> centers;
  centers.push_back(nu.atom(pick(nu.weights())));
  std::vector<double> d2(nu.size());
  while (centers.size() < k) {
    double total = 0.0;
    for (std::size_t j = 0; j < nu.size(); ++j) {
      double best = kInf;
      for (const auto& c : centers) best = std::min(best, sq_dist(nu.atom(j), c));
      d2[j] = nu.weight(j) * best;
      total += d2[j];
    }
    centers.push_back(nu.atom(total > 0.0 ? pick(d2) : pick(nu.weights())));
  }
  return centers;
}

EstimatorResult project_hard_kmeans(const DiscreteMeasure& nu, std::size_t k, const EstimatorConfig& cfg) {
  if (k == 0) throw Error(ErrorCode::InvalidArgument, "project_hard_kmeans: k must be positive");
  const std::size_t dim = nu.dim();
  std::optional<EstimatorResult> best;
  for (std::size_t r = 0; r < std::max<std::size_t>(cfg.restarts, 1); ++r) {
    std::vector<Point> centers = kmeanspp_seed(nu, k, cfg.seed + r);
    std::vector<std::size_t> assign(nu.size(), k);
    EstimatorResult res{DiscreteMeasure::dirac(centers.front()), kInf, ObjectiveKind::HardKMeans};
    for (std::size_t it = 0; it <= cfg.max_iterations; ++it) {
      bool changed = false;
      double objective = 0.0;
      for (std::size_t j = 0; j < nu.size(); ++j) {
        std::size_t arg = 0;
        double bd = kInf;
        for (std::size_t a = 0; a < k; ++a) {
          const double d = sq_dist(nu.atom(j), centers[a]);
          if (d < bd) {
            bd = d;
            arg = a;
          }
        }
        changed = changed || arg != assign[j];
        assign[j] = arg;
        objective += nu.weight(j) * 0.5 * bd;
      }
      res.trace.push_back({it, objective});
      res.iterations = it;
      res.objective_value = objective;
      if (!changed) {
        res.converged = true;
        break;
      }
      std::vector<Point> sums(k, Point(dim, 0.0));
      std::vector<double> mass(k, 0.0);
      for (std::size_t j = 0; j < nu.size(); ++j) {
        mass[assign[j]] += nu.weight(j);
        for (std::size_t d = 0; d < dim; ++d) sums[assign[j]][d] += nu.weight(j) * nu.atom(j)[d];
      }
      for (std::size_t a = 0; a < k; ++a) {
        if (mass[a] > 0.0) {
          for (std::size_t d = 0; d < dim; ++d) centers[a][d] = sums[a][d] / mass[a];
        }
      }
    }
    std::vector<double> mass(k, 0.0);
    for (std::size_t j = 0; j < nu.size(); ++j) mass[assign[j]] += nu.weight(j);
    Eigen::VectorXd mv = Eigen::Map<Eigen::VectorXd>(mass.data(), idx(k));
    res.estimate = measure_on(dim, centers, mv).support_only().canonical();
    res.note = "Lloyd iterations reach a local minimum; best of " +
               std::to_string(std::max<std::size_t>(cfg.restarts, 1)) + " seeded initializations";
    if (!best || res.objective_value < best->objective_value) best = std::move(res);
  }
  return *best;
}

nlohmann::json to_json(const EstimatorResult& r, std::size_t max_trace_points) {
  nlohmann::json j;
  j["estimate"] = to_json(r.estimate);
  j["objective_value"] = r.objective_value;
  j["objective_kind"] = to_string(r.objective_kind);
  j["converged"] = r.converged;
  j["iterations"] = r.iterations;
  if (std::isfinite(r.stationarity_gap)) j["stationarity_gap"] = r.stationarity_gap;
  if (r.candidate_index) {
    j["candidate_index"] = *r.candidate_index;
    auto objs = nlohmann::json::array();
    for (double v : r.candidate_objectives) {
      if (std::isfinite(v)) {
        objs.push_back(v);
      } else {
        objs.push_back(nullptr);
      }
    }
    j["candidate_objectives"] = objs;
  }
  if (!r.note.empty()) j["note"] = r.note;
  // Thin long traces to at most max_trace_points entries, always keeping the last.
  auto trace = nlohmann::json::array();
  const std::size_t n = r.trace.size();
  const std::size_t stride = n > max_trace_points && max_trace_points > 1 ? (n + max_trace_points - 2) / (max_trace_points - 1) : 1;
  for (std::size_t i = 0; i < n; i += stride) trace.push_back({r.trace[i].iteration, r.trace[i].objective});
  if (n > 0 && (n - 1) % stride != 0) trace.push_back({r.trace.back().iteration, r.trace.back().objective});
  j["trace"] = trace;
  return j;
}

}  // namespace entdecon
