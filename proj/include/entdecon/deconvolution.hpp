#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "entdecon/costs.hpp"
#include "entdecon/measures.hpp"
#include "entdecon/sinkhorn.hpp"

namespace entdecon {

// Free weights on a fixed support grid.
struct GridClass {
  std::vector<Point> grid;
};

// At most k atoms, free locations and weights.
struct KAtomClass {
  std::size_t k = 1;
};

// A fixed list of candidate measures.
struct ExplicitFiniteClass {
  std::vector<DiscreteMeasure> candidates;
};

class MixtureClass {
 public:
  using Kind = std::variant<GridClass, KAtomClass, ExplicitFiniteClass>;

  MixtureClass(Kind kind, std::size_t dim);

  const Kind& kind() const noexcept { return kind_; }
  std::size_t dim() const noexcept { return dim_; }
  // Grid and k-atom classes contain every measure dominated by a member; a
  // finite list of candidates in general does not.
  bool closed_under_domination() const noexcept;
  std::string name() const;

 private:
  Kind kind_;
  std::size_t dim_;
};

// {"kind":"grid","atoms":[..]} | {"kind":"k-atom","k":3} |
// {"kind":"explicit","files":[..]} | {"kind":"explicit","candidates":[<measure>..]}.
// Relative file names resolve against base_dir.
MixtureClass mixture_class_from_json(const nlohmann::json& j, std::size_t dim_hint, const std::string& base_dir = "");

enum class ObjectiveKind { NegLogLikelihood, EntropicProjection, RelaxedProjection, HardKMeans };

std::string to_string(ObjectiveKind kind);

struct TracePoint {
  std::size_t iteration = 0;
  double objective = 0.0;
};

struct EstimatorResult {
  DiscreteMeasure estimate;
  double objective_value = 0.0;
  ObjectiveKind objective_kind = ObjectiveKind::NegLogLikelihood;
  std::vector<TracePoint> trace;
  bool converged = false;
  std::size_t iterations = 0;
  // Frank-Wolfe gap of the weight subproblem, in units of the objective divided
  // by the entropic weight (NaN where not applicable).
  double stationarity_gap = std::numeric_limits<double>::quiet_NaN();
  std::optional<std::size_t> candidate_index;
  std::vector<double> candidate_objectives;
  std::string note;
};

struct EstimatorConfig {
  std::size_t max_iterations = 100000;
  double gain_tolerance = 1e-12;            // absolute objective gain
  double stationarity_tolerance = 1e-10;    // Frank-Wolfe gap (grid weights)
  SolverConfig sinkhorn{1e-13, 100000, false, false};
  std::uint64_t seed = 0;                   // k-atom initialization
  std::size_t restarts = 1;                 // k-atom initializations tried
  std::vector<std::vector<Point>> initial_atoms;  // extra k-atom starts, tried first
};

struct LikelihoodResult {
  double value = 0.0;                         // -inf if some observation is unreachable
  std::optional<std::size_t> unreachable_row;
};

// sum_i log sum_j p_j f(y_i - x_j), by log-sum-exp over the log-densities.
LikelihoodResult log_likelihood(const DiscreteMeasure& p, const Sample& sample, const NoiseModel& noise);

// Fixed-grid NPMLE from uniform weights: EM steps, then an active-set Newton
// on the likelihood once EM turns sublinear. Stops at Frank-Wolfe gap
// cfg.stationarity_tolerance (or when the gap is below what the objective can
// resolve in floating point). Objective: negative log-likelihood.
EstimatorResult mle_em_grid(const Sample& sample, const GridClass& grid, const NoiseModel& noise,
                            const EstimatorConfig& cfg = {});

// Maximum likelihood over any class: EM for grids, EM for k-atom classes
// (Gaussian noise only), exhaustive search for explicit classes.
EstimatorResult mle(const Sample& sample, const MixtureClass& cls, const NoiseModel& noise,
                    const EstimatorConfig& cfg = {});

// Same, with observations given as a weighted measure; n scales the reported
// negative log-likelihood.
EstimatorResult mle_weighted(const DiscreteMeasure& observations, double n, const MixtureClass& cls,
                             const NoiseModel& noise, const EstimatorConfig& cfg = {});

// argmin over the class of W_{sigma2}(P, nu).
//  - explicit: one Sinkhorn solve per candidate, ties to the lowest index;
//  - grid: descent on the grid weights driven by the Sinkhorn row potential
//    (the gradient of P -> W(P, nu)): atoms enter by vertex steps, the
//    active set takes damped Newton steps, and the optimality system in
//    semi-dual variables is solved on the active set when possible. The
//    trace is non-increasing;
//  - k-atom: from each start, atoms move to their coupling barycenters and
//    the weights take the Gibbs-marginal update, each step kept only if it
//    does not increase the objective (Gaussian cost only).
EstimatorResult project_entropic(const MixtureClass& cls, const DiscreteMeasure& nu, const CostModel& cost,
                                 double sigma2, const EstimatorConfig& cfg = {});

// argmin over the class of the relaxed transport value. Explicit classes are
// searched exhaustively in closed form; grid and k-atom classes run the
// likelihood EM with the noise paired with (cost, sigma2) and report the
// relaxed value of its estimate.
EstimatorResult project_relaxed(const MixtureClass& cls, const DiscreteMeasure& nu, const CostModel& cost,
                                double sigma2, const EstimatorConfig& cfg = {});

// Unregularized limit over k-atom classes: Lloyd iterations with hard
// assignments, best of cfg.restarts seeded initializations. Objective:
// sum_j nu_j (1/2) min_k ||y_j - a_k||^2.
EstimatorResult project_hard_kmeans(const DiscreteMeasure& nu, std::size_t k, const EstimatorConfig& cfg = {});

// Noise model whose log-density is C - cost / sigma2 (Gaussian) or C - cost
// (other kinds, which require sigma2 == 1).
NoiseModel noise_for_cost(const CostModel& cost, double sigma2);

// Weighted k-means++ seeding from the atoms of nu.
std::vector<Point> kmeanspp_seed(const DiscreteMeasure& nu, std::size_t k, std::uint64_t seed);

nlohmann::json to_json(const EstimatorResult& r, std::size_t max_trace_points = 200);

}  // namespace entdecon
