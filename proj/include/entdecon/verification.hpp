#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "entdecon/costs.hpp"
#include "entdecon/measures.hpp"

namespace entdecon {

struct CertificateCheck {
  std::string name;
  double max_residual = 0.0;
  double tolerance = 0.0;
  bool pass = false;
};

// pass = every check passed. max_residual/tolerance repeat the first (primary)
// check; details hold per-instance records.
struct CertificateReport {
  std::string claim_id;
  std::size_t instances = 0;
  double max_residual = 0.0;
  double tolerance = 0.0;
  bool pass = false;
  std::vector<CertificateCheck> checks;
  nlohmann::json details = nlohmann::json::array();
};

nlohmann::json to_json(const CertificateReport& r);

// first, first + 1, ..., first + count - 1.
std::vector<std::uint64_t> default_seeds(std::size_t count, std::uint64_t first = 1);

// Grid NPMLE by EM against the entropic projection of the empirical measure,
// Gaussian noise. Also checks V <= W at both argmins and carries the Gibbs
// identity check on kGibbsIdentityPairs random pairs.
CertificateReport certify_theorem1(const std::vector<std::uint64_t>& seeds, std::size_t n, std::size_t grid_size,
                                   double sigma2);

// Relaxed transport value = sigma2 * (C - mean log-likelihood) on random
// (P, sample) pairs, closed form against likelihood evaluation.
CertificateReport certify_gibbs_identity(const std::vector<std::uint64_t>& seeds, std::size_t pairs_per_seed);

// Two-candidate class P1 = (d0 + d4s)/2, P2 = (d2s + d6s)/2 with one
// observation Y on the grid sigma * k / 100.
CertificateReport certify_counterexample(double sigma, const std::vector<double>& grid_of_y);
std::vector<double> counterexample_grid(double sigma);
// P(first <= Y < last) for Y ~ (N(0, s^2) + N(4s, s^2)) / 2, in units of s.
double counterexample_probability(double first, double last);

// The relaxed projection agrees with the MLE on explicit finite classes.
CertificateReport certify_relaxed_identity(const std::vector<std::uint64_t>& seeds);

// Grid agreement as in certify_theorem1, with cost -log f and entropic weight 1. For
// Gaussian noise it additionally checks the shift against the Gaussian path.
CertificateReport certify_general_noise(const NoiseModel& noise, const std::vector<std::uint64_t>& seeds);

// Lloyd vs exhaustive assignment at sigma2 = 0, then the entropic k-atom
// projection gap along the decreasing sigma2 sequence.
CertificateReport certify_kmeans_limit(const Sample& sample, std::size_t k, const std::vector<double>& sigma2_sequence,
                                       bool exploratory = false);
Sample kmeans_default_sample(std::uint64_t seed);

// KL product decomposition on random couplings up to 6x6.
CertificateReport certify_lemma1(const std::vector<std::uint64_t>& seeds, std::size_t per_seed);

// Claim ids: theorem1, counterexample, general-noise, kmeans, lemma1, all.
// Empty seeds selects the default seed count of each certificate, numbered
// from first_seed.
std::vector<CertificateReport> certify_claim(const std::string& claim, const std::vector<std::uint64_t>& seeds,
                                             bool exploratory = false, unsigned threads = 1,
                                             std::uint64_t first_seed = 1);

}  // namespace entdecon
