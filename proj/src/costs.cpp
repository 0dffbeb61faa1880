#include "entdecon/costs.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <cmath>
#include <numbers>

#include "entdecon/error.hpp"

namespace entdecon {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

double squared_norm(std::span<const double> z) {
  double s = 0.0;
  for (double v : z) s += v * v;
  return s;
}

void check_dim(std::size_t expected, std::size_t got, const char* what) {
  if (expected != got) {
    throw Error(ErrorCode::DimensionMismatch, std::string(what) + ": dimension " + std::to_string(got) +
                                                  ", expected " + std::to_string(expected));
  }
}

// Integral of cos^2(r) r^(d-1) over [0, r_max].
double wfr_radial_mass(std::size_t dim, double r_max) {
  if (r_max <= 0.0) return 0.0;
  if (dim == 1) return 0.5 * r_max + 0.25 * std::sin(2.0 * r_max);
  const auto integrand = [dim](double r) {
    const double c = std::cos(r);
    return c * c * std::pow(r, static_cast<double>(dim - 1));
  };
  return boost::math::quadrature::gauss_kronrod<double, 31>::integrate(integrand, 0.0, r_max, 10, 1e-14);
}

double unit_sphere_area(std::size_t dim) {
  const double h = 0.5 * static_cast<double>(dim);
  return 2.0 * std::pow(std::numbers::pi, h) / std::tgamma(h);
}

void validate_kind(const CostKind& kind) {
  std::visit(Overloaded{
                 [](const GaussianHalfSq& g) {
                   if (!(g.sigma2 > 0.0) || !std::isfinite(g.sigma2)) {
                     throw Error(ErrorCode::InvalidArgument, "gaussian: sigma2 must be positive");
                   }
                 },
                 [](const PExponential& p) {
                   if (!(p.p >= 1.0) || !std::isfinite(p.p)) {
                     throw Error(ErrorCode::InvalidArgument, "p-exponential: p must be >= 1");
                   }
                   if (!(p.scale > 0.0) || !std::isfinite(p.scale)) {
                     throw Error(ErrorCode::InvalidArgument, "p-exponential: scale must be positive");
                   }
                 },
                 [](const WfrCosine&) {},
                 [](const CustomCost& c) {
                   if (!c.cost_of_offset) throw Error(ErrorCode::InvalidArgument, "custom cost: no function");
                 },
                 [](const NegLogDensity& n) {
                   if (!n.noise) throw Error(ErrorCode::InvalidArgument, "neg-log-density cost: no noise model");
                 },
             },
             kind);
}

}  // namespace

NoiseModel::NoiseModel(CostKind kind, std::size_t dim) : kind_(std::move(kind)), dim_(dim) {
  if (dim_ == 0) throw Error(ErrorCode::InvalidArgument, "noise: dim must be positive");
  if (std::holds_alternative<NegLogDensity>(kind_)) {
    throw Error(ErrorCode::InvalidArgument, "noise: a negative log-density cost is not itself a noise model");
  }
  validate_kind(kind_);
}

NoiseModel NoiseModel::gaussian(double sigma2, std::size_t dim) { return NoiseModel(GaussianHalfSq{sigma2}, dim); }

NoiseModel NoiseModel::p_exponential(double p, double scale, std::size_t dim) {
  return NoiseModel(PExponential{p, scale}, dim);
}

NoiseModel NoiseModel::wfr_cosine(std::size_t dim) { return NoiseModel(WfrCosine{}, dim); }

double NoiseModel::effective_sigma2() const {
  if (const auto* g = std::get_if<GaussianHalfSq>(&kind_)) return g->sigma2;
  return 1.0;
}

std::string NoiseModel::name() const { return cost_name(cost_model()); }

Point NoiseModel::sample(CounterRng& rng) const {
  Point z(dim_, 0.0);
  std::visit(Overloaded{
                 [&](const GaussianHalfSq& g) {
                   const double s = std::sqrt(g.sigma2);
                   for (auto& v : z) v = s * rng.normal();
                 },
                 [&](const PExponential& p) {
                   // |z_k|^p / scale ~ Gamma(1/p, 1), independent symmetric coordinates.
                   for (auto& v : z) {
                     const double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
                     const double g = boost::math::gamma_p_inv(1.0 / p.p, rng.uniform());
                     v = sign * std::pow(p.scale * g, 1.0 / p.p);
                   }
                 },
                 [&](const WfrCosine&) {
                   // Radius by inverting the radial CDF, direction uniform on the sphere.
                   const double total = wfr_radial_mass(dim_, kHalfPi);
                   const double target = rng.uniform() * total;
                   double lo = 0.0, hi = kHalfPi;
                   for (int it = 0; it < 80; ++it) {
                     const double mid = 0.5 * (lo + hi);
                     (wfr_radial_mass(dim_, mid) < target ? lo : hi) = mid;
                   }
                   const double r = 0.5 * (lo + hi);
                   if (dim_ == 1) {
                     z[0] = rng.uniform() < 0.5 ? -r : r;
                   } else {
                     double norm = 0.0;
                     do {
                       for (auto& v : z) v = rng.normal();
                       norm = std::sqrt(squared_norm(z));
                     } while (norm == 0.0);
                     for (auto& v : z) v *= r / norm;
                   }
                 },
                 [&](const CustomCost&) {
                   throw Error(ErrorCode::InvalidArgument, "custom noise has no sampler");
                 },
                 [&](const NegLogDensity&) {},
             },
             kind_);
  return z;
}

double cost(const CostModel& model, std::span<const double> x, std::span<const double> y) {
  check_dim(model.dim, x.size(), "cost");
  check_dim(model.dim, y.size(), "cost");
  return std::visit(Overloaded{
                        [&](const GaussianHalfSq&) {
                          double s = 0.0;
                          for (std::size_t k = 0; k < x.size(); ++k) s += (x[k] - y[k]) * (x[k] - y[k]);
                          return 0.5 * s;
                        },
                        [&](const PExponential& p) {
                          double s = 0.0;
                          for (std::size_t k = 0; k < x.size(); ++k) {
                            const double a = std::abs(x[k] - y[k]);
                            s += p.p == 1.0 ? a : (p.p == 2.0 ? a * a : std::pow(a, p.p));
                          }
                          return s / p.scale;
                        },
                        [&](const WfrCosine&) {
                          double s = 0.0;
                          for (std::size_t k = 0; k < x.size(); ++k) s += (x[k] - y[k]) * (x[k] - y[k]);
                          const double r = std::sqrt(s);
                          if (r >= kHalfPi) return kInf;
                          return -2.0 * std::log(std::cos(r));
                        },
                        [&](const CustomCost& c) {
                          Point z(x.size());
                          for (std::size_t k = 0; k < x.size(); ++k) z[k] = x[k] - y[k];
                          return c.cost_of_offset(z);
                        },
                        [&](const NegLogDensity& n) {
                          Point z(x.size());
                          for (std::size_t k = 0; k < x.size(); ++k) z[k] = y[k] - x[k];
                          return -log_density(*n.noise, z);
                        },
                    },
                    model.kind);
}

double log_normalizer(const NoiseModel& noise) {
  const auto d = static_cast<double>(noise.dim());
  return std::visit(Overloaded{
                        [&](const GaussianHalfSq& g) { return -0.5 * d * std::log(2.0 * std::numbers::pi * g.sigma2); },
                        [&](const PExponential& p) {
                          // The density factorizes over coordinates:
                          // int exp(-|t|^p / s) dt = 2 s^(1/p) Gamma(1 + 1/p).
                          return -d * (std::log(2.0) + std::log(p.scale) / p.p + std::lgamma(1.0 + 1.0 / p.p));
                        },
                        [&](const WfrCosine&) {
                          const double mass = noise.dim() == 1 ? 2.0 * wfr_radial_mass(1, kHalfPi)
                                                               : unit_sphere_area(noise.dim()) *
                                                                     wfr_radial_mass(noise.dim(), kHalfPi);
                          return -std::log(mass);
                        },
                        [&](const CustomCost& c) -> double {
                          if (!c.log_normalizer) {
                            throw Error(ErrorCode::InvalidArgument,
                                        "custom noise '" + c.name + "' has no declared log-normalizer");
                          }
                          return *c.log_normalizer;
                        },
                        [&](const NegLogDensity&) -> double { return 0.0; },
                    },
                    noise.kind());
}

double log_density(const NoiseModel& noise, std::span<const double> z) {
  check_dim(noise.dim(), z.size(), "log_density");
  return std::visit(Overloaded{
                        [&](const GaussianHalfSq& g) {
                          return log_normalizer(noise) - squared_norm(z) / (2.0 * g.sigma2);
                        },
                        [&](const PExponential& p) {
                          double s = 0.0;
                          for (double v : z) s += std::pow(std::abs(v), p.p);
                          return log_normalizer(noise) - s / p.scale;
                        },
                        [&](const WfrCosine&) {
                          const double r = std::sqrt(squared_norm(z));
                          if (r >= kHalfPi) return -kInf;
                          return log_normalizer(noise) + 2.0 * std::log(std::cos(r));
                        },
                        [&](const CustomCost& c) { return log_normalizer(noise) - c.cost_of_offset(z); },
                        [&](const NegLogDensity&) { return 0.0; },
                    },
                    noise.kind());
}

Eigen::MatrixXd cost_matrix(const CostModel& model, const std::vector<Point>& rows, const std::vector<Point>& cols) {
  Eigen::MatrixXd c(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < cols.size(); ++j) {
      c(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = cost(model, rows[i], cols[j]);
    }
  }
  return c;
}

double cost_lower_bound(const CostModel& model) {
  return std::visit(Overloaded{
                        [](const GaussianHalfSq&) { return 0.0; },
                        [](const PExponential&) { return 0.0; },
                        [](const WfrCosine&) { return 0.0; },
                        [](const CustomCost&) { return -kInf; },
                        [](const NegLogDensity& n) {
                          if (std::holds_alternative<CustomCost>(n.noise->kind())) return -kInf;
                          return -log_normalizer(*n.noise);
                        },
                    },
                    model.kind);
}

CostModel negative_log_density_cost(const NoiseModel& noise) {
  return CostModel{NegLogDensity{std::make_shared<const NoiseModel>(noise)}, noise.dim()};
}

std::string cost_name(const CostModel& model) {
  return std::visit(Overloaded{
                        [](const GaussianHalfSq&) { return std::string("gaussian"); },
                        [](const PExponential&) { return std::string("p-exponential"); },
                        [](const WfrCosine&) { return std::string("wfr-cosine"); },
                        [](const CustomCost& c) { return c.name; },
                        [](const NegLogDensity& n) { return "neg-log-density(" + n.noise->name() + ")"; },
                    },
                    model.kind);
}

namespace {

const nlohmann::json& unwrap(const nlohmann::json& j) {
  if (j.is_object() && j.size() == 1) {
    if (j.contains("cost")) return j["cost"];
    if (j.contains("noise")) return j["noise"];
  }
  return j;
}

double number_field(const nlohmann::json& j, const char* key, double fallback) {
  if (!j.contains(key)) return fallback;
  if (!j[key].is_number()) throw Error(ErrorCode::Parse, std::string("cost spec: field '") + key + "' must be a number");
  return j[key].get<double>();
}

CostKind kind_from_json(const nlohmann::json& spec) {
  if (!spec.is_object() || !spec.contains("kind") || !spec["kind"].is_string()) {
    throw Error(ErrorCode::Parse, "cost spec: expected an object with a string field 'kind'");
  }
  const auto kind = spec["kind"].get<std::string>();
  if (kind == "gaussian") {
    if (!spec.contains("sigma2")) throw Error(ErrorCode::Parse, "cost spec: gaussian requires 'sigma2'");
    return GaussianHalfSq{number_field(spec, "sigma2", 1.0)};
  }
  if (kind == "p-exponential") {
    if (!spec.contains("p")) throw Error(ErrorCode::Parse, "cost spec: p-exponential requires 'p'");
    return PExponential{number_field(spec, "p", 1.0), number_field(spec, "scale", 1.0)};
  }
  if (kind == "laplace") return PExponential{1.0, number_field(spec, "scale", 1.0)};
  if (kind == "wfr-cosine") return WfrCosine{};
  throw Error(ErrorCode::Parse, "cost spec: unknown kind '" + kind + "'");
}

std::size_t dim_from_json(const nlohmann::json& spec, std::size_t dim_hint) {
  if (!spec.contains("dim")) return dim_hint;
  if (!spec["dim"].is_number_integer() || spec["dim"].get<long long>() <= 0) {
    throw Error(ErrorCode::Parse, "cost spec: field 'dim' must be a positive integer");
  }
  return spec["dim"].get<std::size_t>();
}

}  // namespace

NoiseModel noise_from_json(const nlohmann::json& j, std::size_t dim_hint) {
  const auto& spec = unwrap(j);
  CostKind kind = kind_from_json(spec);
  validate_kind(kind);
  return NoiseModel(std::move(kind), dim_from_json(spec, dim_hint));
}

CostModel cost_from_json(const nlohmann::json& j, std::size_t dim_hint) {
  const auto& spec = unwrap(j);
  CostKind kind = kind_from_json(spec);
  validate_kind(kind);
  return CostModel{std::move(kind), dim_from_json(spec, dim_hint)};
}

nlohmann::json to_json(const NoiseModel& noise) {
  nlohmann::json j;
  std::visit(Overloaded{
                 [&](const GaussianHalfSq& g) {
                   j["kind"] = "gaussian";
                   j["sigma2"] = g.sigma2;
                 },
                 [&](const PExponential& p) {
                   j["kind"] = "p-exponential";
                   j["p"] = p.p;
                   j["scale"] = p.scale;
                 },
                 [&](const WfrCosine&) { j["kind"] = "wfr-cosine"; },
                 [&](const CustomCost& c) { j["kind"] = c.name; },
                 [&](const NegLogDensity&) { j["kind"] = "neg-log-density"; },
             },
             noise.kind());
  j["dim"] = noise.dim();
  return j;
}

}  // namespace entdecon
