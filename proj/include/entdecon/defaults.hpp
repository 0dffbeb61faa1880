#pragma once

#include <array>
#include <cstddef>
#include <cstdint>

// Desk-scale certificate parameters. Bump kDefaultsVersion whenever a value
// changes: reports record it, and reproducibility is only promised per version.
namespace entdecon::defaults {

inline constexpr int kDefaultsVersion = 1;

// Grid agreement of likelihood and entropic projection (and the Gibbs identity
// check that rides along with it).
inline constexpr std::size_t kTheorem1Seeds = 20;  // seeds 1..20
inline constexpr std::size_t kTheorem1N = 10;
inline constexpr std::size_t kTheorem1GridSize = 15;
inline constexpr double kTheorem1Sigma2 = 1.0;
inline constexpr double kArgminTvTolerance = 1e-4;
inline constexpr double kMinValueTolerance = 1e-6;
inline constexpr std::size_t kGibbsIdentityPairs = 100;
inline constexpr double kAffineTolerance = 1e-9;

// Counterexample: Y runs over sigma * (1.01, 1.02, ..., 2.99).
inline constexpr std::array<double, 2> kCounterexampleSigmas{1.0, 2.0};
inline constexpr int kCounterexampleFirstHundredth = 101;
inline constexpr int kCounterexampleEndHundredth = 300;  // excluded
inline constexpr double kStrictGap = 1e-9;
inline constexpr double kClosedFormTolerance = 1e-12;
inline constexpr double kProbabilityBound = 0.15;
inline constexpr double kProbabilityDerived = 0.156;
inline constexpr double kProbabilityTolerance = 0.002;
inline constexpr std::size_t kRelaxedIdentityClasses = 20;

// General noise.
inline constexpr std::size_t kGeneralNoiseSeeds = 10;
inline constexpr std::size_t kGeneralNoiseN = 10;
inline constexpr std::size_t kGeneralNoiseGridSize = 15;
inline constexpr double kWfrGridMargin = 0.05;
inline constexpr double kShiftTolerance = 1e-9;
inline constexpr double kMixtureDensityTolerance = 1e-6;  // log-density, where weights are not identified

// k-means limit.
inline constexpr std::size_t kKMeansN = 8;
inline constexpr std::size_t kKMeansK = 2;
inline constexpr std::size_t kKMeansRestarts = 10;
inline constexpr std::uint64_t kKMeansSeed = 1;
inline constexpr std::array<double, 4> kKMeansSigma2{1.0, 0.1, 0.01, 0.001};
inline constexpr double kHardObjectiveTolerance = 1e-8;
inline constexpr double kFinalGapTolerance = 1e-3;

// Divergence product decomposition.
inline constexpr std::size_t kLemma1Seeds = 10;  // seeds 1..10
inline constexpr std::size_t kLemma1PerSeed = 100;
inline constexpr std::size_t kLemma1MaxSide = 6;
inline constexpr double kLemma1Tolerance = 1e-10;

}  // namespace entdecon::defaults
