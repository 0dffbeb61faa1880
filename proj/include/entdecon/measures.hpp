#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace entdecon {

using Point = std::vector<double>;

// Finitely supported probability measure on R^d. Immutable once built: the
// constructor validates shape, non-negativity and normalization (|sum - 1| <=
// 1e-12) and never rescales the weights it is given.
class DiscreteMeasure {
 public:
  static constexpr double kNormalizationTolerance = 1e-12;

  DiscreteMeasure(std::size_t dim, std::vector<Point> atoms, std::vector<double> weights);

  static DiscreteMeasure dirac(Point x);
  // Equal weights on the given atoms (duplicates are kept, see canonical()).
  static DiscreteMeasure uniform(std::size_t dim, std::vector<Point> atoms);

  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return atoms_.size(); }
  const std::vector<Point>& atoms() const noexcept { return atoms_; }
  const std::vector<double>& weights() const noexcept { return weights_; }
  const Point& atom(std::size_t i) const { return atoms_.at(i); }
  double weight(std::size_t i) const { return weights_.at(i); }

  // Mass at x (exact coordinate match); 0 when x is not an atom.
  double mass_at(std::span<const double> x) const;

  // Merges bitwise-identical atoms by summing weights. Order of first
  // occurrence is kept.
  DiscreteMeasure canonical() const;

  // Atoms carrying strictly positive weight.
  DiscreteMeasure support_only() const;

 private:
  std::size_t dim_;
  std::vector<Point> atoms_;
  std::vector<double> weights_;
};

// Observations y_1..y_n in R^d.
class Sample {
 public:
  explicit Sample(std::vector<Point> points);

  std::size_t size() const noexcept { return points_.size(); }
  std::size_t dim() const noexcept { return dim_; }
  const std::vector<Point>& points() const noexcept { return points_; }

 private:
  std::size_t dim_;
  std::vector<Point> points_;
};

DiscreteMeasure empirical_measure(const Sample& sample);

double second_moment(const DiscreteMeasure& m);

// 1/2 sum over the union of atoms of |a(x) - b(x)|.
double total_variation_distance(const DiscreteMeasure& a, const DiscreteMeasure& b);

// {"dim": d, "atoms": [[..],..], "weights": [..]}
nlohmann::json to_json(const DiscreteMeasure& m);
DiscreteMeasure measure_from_json(const nlohmann::json& j);
DiscreteMeasure load_measure(const std::string& path);
void save_measure(const DiscreteMeasure& m, const std::string& path);

// CSV: one observation per row, d columns, no header.
Sample parse_sample_csv(const std::string& text);
Sample load_sample(const std::string& path);
std::string sample_to_csv(const Sample& s);

}  // namespace entdecon
