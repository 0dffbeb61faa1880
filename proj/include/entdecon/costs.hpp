#pragma once

#include <cstddef>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "entdecon/measures.hpp"
#include "entdecon/rng.hpp"

namespace entdecon {

inline constexpr double kInf = std::numeric_limits<double>::infinity();
inline constexpr double kHalfPi = 1.57079632679489661923;

// Forbidden transport routes are +inf; any finite value is an admissible cost.
inline bool is_forbidden(double cost) noexcept { return cost == kInf; }

// 1/2 ||x - y||^2. sigma2 is the known noise variance; it does not enter the
// cost itself, only the paired Gaussian density and the default entropic weight.
struct GaussianHalfSq {
  double sigma2 = 1.0;
};

// ||x - y||_p^p / scale, paired with f(z) proportional to exp(-||z||_p^p / scale).
// p = 1 is the Laplace model; p = 2 with scale = 2 sigma2 is the Gaussian
// model with its cost already divided by sigma2.
struct PExponential {
  double p = 1.0;
  double scale = 1.0;
};

// -log cos^2(min(||x - y||, pi/2)), paired with f(z) proportional to
// cos^2(||z||) on the ball of radius pi/2.
struct WfrCosine {};

// User-supplied translation-invariant cost; usable with the solvers but only
// has a density when a log-normalizer is declared.
struct CustomCost {
  std::function<double(std::span<const double> z)> cost_of_offset;
  std::optional<double> log_normalizer;
  std::string name = "custom";
};

class NoiseModel;

// -log f(y - x) of a noise model, constant included. Solving with this cost
// and entropic weight 1 is the general-noise formulation.
struct NegLogDensity {
  std::shared_ptr<const NoiseModel> noise;
};

using CostKind = std::variant<GaussianHalfSq, PExponential, WfrCosine, CustomCost, NegLogDensity>;

struct CostModel {
  CostKind kind;
  std::size_t dim = 1;
};

// Additive noise Z with density f on R^d, identified by the same kinds as the
// costs (NegLogDensity excluded).
class NoiseModel {
 public:
  NoiseModel(CostKind kind, std::size_t dim);

  static NoiseModel gaussian(double sigma2, std::size_t dim = 1);
  static NoiseModel p_exponential(double p, double scale = 1.0, std::size_t dim = 1);
  static NoiseModel wfr_cosine(std::size_t dim = 1);

  const CostKind& kind() const noexcept { return kind_; }
  std::size_t dim() const noexcept { return dim_; }

  // The cost c with log f(z) = C - c(z, 0) / effective_sigma2().
  CostModel cost_model() const { return CostModel{kind_, dim_}; }
  double effective_sigma2() const;

  // Draws one noise vector.
  Point sample(CounterRng& rng) const;

  std::string name() const;

 private:
  CostKind kind_;
  std::size_t dim_;
};

double cost(const CostModel& model, std::span<const double> x, std::span<const double> y);

double log_density(const NoiseModel& noise, std::span<const double> z);

// C such that log_density(z) = C - cost(z, 0) / effective_sigma2().
double log_normalizer(const NoiseModel& noise);

// cost(rows[i], cols[j]).
Eigen::MatrixXd cost_matrix(const CostModel& model, const std::vector<Point>& rows, const std::vector<Point>& cols);

// Lower bound on every finite cost value of the model.
double cost_lower_bound(const CostModel& model);

CostModel negative_log_density_cost(const NoiseModel& noise);

std::string cost_name(const CostModel& model);

// {"kind": "gaussian", "sigma2": s} | {"kind": "p-exponential", "p": p, "scale": s}
// | {"kind": "wfr-cosine"}; optional "dim". A wrapping {"cost": {...}} or
// {"noise": {...}} object is accepted.
NoiseModel noise_from_json(const nlohmann::json& j, std::size_t dim_hint = 1);
CostModel cost_from_json(const nlohmann::json& j, std::size_t dim_hint = 1);
nlohmann::json to_json(const NoiseModel& noise);

}  // namespace entdecon
