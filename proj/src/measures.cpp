#include "entdecon/measures.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "entdecon/error.hpp"

namespace entdecon {

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool same_point(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) return false;
  for (std::size_t k = 0; k < a.size(); ++k) {
    if (a[k] != b[k]) return false;
  }
  return true;
}

}  // namespace

DiscreteMeasure::DiscreteMeasure(std::size_t dim, std::vector<Point> atoms, std::vector<double> weights)
    : dim_(dim), atoms_(std::move(atoms)), weights_(std::move(weights)) {
  if (dim_ == 0) throw Error(ErrorCode::InvalidArgument, "measure: dim must be positive");
  if (atoms_.empty()) throw Error(ErrorCode::InvalidArgument, "measure: no atoms");
  if (atoms_.size() != weights_.size()) {
    throw Error(ErrorCode::InvalidArgument, "measure: atoms and weights differ in length");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < atoms_.size(); ++i) {
    if (atoms_[i].size() != dim_) {
      throw Error(ErrorCode::DimensionMismatch,
                  "measure: atom " + std::to_string(i) + " has dimension " + std::to_string(atoms_[i].size()) +
                      ", expected " + std::to_string(dim_));
    }
    for (double v : atoms_[i]) {
      if (!std::isfinite(v)) throw Error(ErrorCode::InvalidArgument, "measure: non-finite atom coordinate");
    }
    if (!(weights_[i] >= 0.0) || !std::isfinite(weights_[i])) {
      throw Error(ErrorCode::InvalidArgument, "measure: weight " + std::to_string(i) + " is negative or not finite");
    }
    total += weights_[i];
  }
  if (std::abs(total - 1.0) > kNormalizationTolerance) {
    std::ostringstream msg;
    msg.precision(17);
    msg << "measure: weights sum to " << total << ", not 1";
    throw Error(ErrorCode::InvalidArgument, msg.str());
  }
}

DiscreteMeasure DiscreteMeasure::dirac(Point x) {
  const std::size_t d = x.size();
  return DiscreteMeasure(d, {std::move(x)}, {1.0});
}

DiscreteMeasure DiscreteMeasure::uniform(std::size_t dim, std::vector<Point> atoms) {
  std::vector<double> w(atoms.size(), atoms.empty() ? 0.0 : 1.0 / static_cast<double>(atoms.size()));
  return DiscreteMeasure(dim, std::move(atoms), std::move(w));
}

double DiscreteMeasure::mass_at(std::span<const double> x) const {
  double m = 0.0;
  for (std::size_t i = 0; i < atoms_.size(); ++i) {
    if (same_point(atoms_[i], x)) m += weights_[i];
  }
  return m;
}

DiscreteMeasure DiscreteMeasure::canonical() const {
  std::map<Point, std::size_t> index;
  std::vector<Point> atoms;
  std::vector<double> weights;
  for (std::size_t i = 0; i < atoms_.size(); ++i) {
    auto [it, inserted] = index.emplace(atoms_[i], atoms.size());
    if (inserted) {
      atoms.push_back(atoms_[i]);
      weights.push_back(weights_[i]);
    } else {
      weights[it->second] += weights_[i];
    }
  }
  return DiscreteMeasure(dim_, std::move(atoms), std::move(weights));
}

DiscreteMeasure DiscreteMeasure::support_only() const {
  std::vector<Point> atoms;
  std::vector<double> weights;
  for (std::size_t i = 0; i < atoms_.size(); ++i) {
    if (weights_[i] > 0.0) {
      atoms.push_back(atoms_[i]);
      weights.push_back(weights_[i]);
    }
  }
  return DiscreteMeasure(dim_, std::move(atoms), std::move(weights));
}

Sample::Sample(std::vector<Point> points) : dim_(0), points_(std::move(points)) {
  if (points_.empty()) throw Error(ErrorCode::InvalidArgument, "sample: no observations");
  dim_ = points_.front().size();
  if (dim_ == 0) throw Error(ErrorCode::InvalidArgument, "sample: zero-dimensional observation");
  for (std::size_t i = 0; i < points_.size(); ++i) {
    if (points_[i].size() != dim_) {
      throw Error(ErrorCode::DimensionMismatch, "sample: row " + std::to_string(i) + " has dimension " +
                                                    std::to_string(points_[i].size()) + ", expected " +
                                                    std::to_string(dim_));
    }
  }
}

DiscreteMeasure empirical_measure(const Sample& sample) {
  return DiscreteMeasure::uniform(sample.dim(), sample.points()).canonical();
}

double second_moment(const DiscreteMeasure& m) {
  double s = 0.0;
  for (std::size_t i = 0; i < m.size(); ++i) {
    double sq = 0.0;
    for (double v : m.atom(i)) sq += v * v;
    s += m.weight(i) * sq;
  }
  return s;
}

double total_variation_distance(const DiscreteMeasure& a, const DiscreteMeasure& b) {
  if (a.dim() != b.dim()) {
    throw Error(ErrorCode::DimensionMismatch, "total_variation_distance: dimension mismatch");
  }
  std::map<Point, double> diff;
  for (std::size_t i = 0; i < a.size(); ++i) diff[a.atom(i)] += a.weight(i);
  for (std::size_t i = 0; i < b.size(); ++i) diff[b.atom(i)] -= b.weight(i);
  double s = 0.0;
  for (const auto& [x, d] : diff) s += std::abs(d);
  return std::min(1.0, 0.5 * s);
}

nlohmann::json to_json(const DiscreteMeasure& m) {
  nlohmann::json j;
  j["dim"] = m.dim();
  j["atoms"] = m.atoms();
  j["weights"] = m.weights();
  return j;
}

DiscreteMeasure measure_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw Error(ErrorCode::Parse, "measure: expected a JSON object");
  for (const char* key : {"dim", "atoms", "weights"}) {
    if (!j.contains(key)) throw Error(ErrorCode::Parse, std::string("measure: missing field '") + key + "'");
  }
  if (!j["dim"].is_number_integer() || j["dim"].get<long long>() <= 0) {
    throw Error(ErrorCode::Parse, "measure: field 'dim' must be a positive integer");
  }
  const auto dim = j["dim"].get<std::size_t>();
  std::vector<Point> atoms;
  std::vector<double> weights;
  try {
    atoms = j["atoms"].get<std::vector<Point>>();
  } catch (const nlohmann::json::exception&) {
    throw Error(ErrorCode::Parse, "measure: field 'atoms' must be an array of numeric arrays");
  }
  try {
    weights = j["weights"].get<std::vector<double>>();
  } catch (const nlohmann::json::exception&) {
    throw Error(ErrorCode::Parse, "measure: field 'weights' must be an array of numbers");
  }
  return DiscreteMeasure(dim, std::move(atoms), std::move(weights));
}

DiscreteMeasure load_measure(const std::string& path) {
  const std::string text = read_file(path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::Parse, path + ": " + e.what());
  }
  try {
    return measure_from_json(j);
  } catch (const Error& e) {
    throw Error(e.code(), path + ": " + e.what());
  }
}

void save_measure(const DiscreteMeasure& m, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write '" + path + "'");
  out << to_json(m).dump(2) << '\n';
}

Sample parse_sample_csv(const std::string& text) {
  std::vector<Point> points;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    Point row;
    std::istringstream fields(line);
    std::string field;
    std::size_t col = 0;
    while (std::getline(fields, field, ',')) {
      ++col;
      const auto first = field.find_first_not_of(" \t");
      const auto last = field.find_last_not_of(" \t");
      const char* b = field.data() + (first == std::string::npos ? field.size() : first);
      const char* e = field.data() + (last == std::string::npos ? field.size() : last + 1);
      if (b < e && *b == '+') ++b;
      double v = 0.0;
      const auto [end, ec] = std::from_chars(b, e, v);
      if (b == e || ec != std::errc() || end != e || !std::isfinite(v)) {
        throw Error(ErrorCode::Parse, "sample csv: line " + std::to_string(line_no) + ", column " +
                                          std::to_string(col) + ": not a number: '" + field + "'");
      }
      row.push_back(v);
    }
    points.push_back(std::move(row));
  }
  return Sample(std::move(points));
}

Sample load_sample(const std::string& path) {
  try {
    return parse_sample_csv(read_file(path));
  } catch (const Error& e) {
    if (e.code() == ErrorCode::Io) throw;
    throw Error(e.code(), path + ": " + e.what());
  }
}

std::string sample_to_csv(const Sample& s) {
  std::ostringstream out;
  out.imbue(std::locale::classic());
  out.precision(17);
  for (const auto& p : s.points()) {
    for (std::size_t k = 0; k < p.size(); ++k) {
      if (k) out << ',';
      out << p[k];
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace entdecon
