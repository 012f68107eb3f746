#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <utility>
#include <vector>

#include "daps/counts.hpp"
#include "daps/linalg.hpp"

// Everything in this header is detector-agnostic: inputs are measured counts
// (or exact tables) only, never detector models or response matrices.

namespace daps {

/// Sampled estimate with random error sigma, systematic error eps from
/// coincidence asymmetry, and the combined delta = sqrt(sigma^2 + eps^2).
struct EstimateWithError {
  double mean = 0.0;
  double sigma = 0.0;
  double eps = 0.0;
  double delta = 0.0;
  std::uint64_t events = 0;

  static EstimateWithError exact(double mean) { return {mean, 0.0, 0.0, 0.0, 0}; }
};

/// Outcome weights (z_0,...,z_K) of the generating function.
struct ZVector {
  std::vector<double> z;

  static ZVector ones(int K) { return {std::vector<double>(K + 1, 1.0)}; }
  static ZVector powers(double z, int K) {
    std::vector<double> v(K + 1);
    double p = 1.0;
    for (int k = 0; k <= K; ++k) {
      v[k] = p;
      p *= z;
    }
    return {v};
  }
};

/// Correlation matrix M of the multinomial nonclassicality test together
/// with its minimal eigenvalue and eigenvector.
struct MultinomialMatrix {
  SymMatrix M;
  EstimateWithError mu_min;
  std::vector<double> eigenvector;
};

using TupleFunctional = std::function<double(std::span<const int>)>;

/// Split counts into the permutation-symmetric part and the remainder;
/// sym + asym reconstructs the input exactly.
std::pair<Table, Table> symmetrize(const CoincidenceCounts& counts);

/// Symmetric part of a real tuple table (used for exact tables).
Table symmetric_part(const Table& table);

/// Sampling-formula estimate of a tuple functional: mean from raw counts,
/// sigma from the sample variance, eps from the asymmetric part.
EstimateWithError estimate(const TupleFunctional& f, const CoincidenceCounts& counts);

/// Mean of a functional against an exact probability table.
double mean_of(const TupleFunctional& f, const Table& probs);

/// g_{z_0,...,z_K} = sum prod_i z_{k_i} weighted by counts.
EstimateWithError generating_function(const CoincidenceCounts& counts, const ZVector& zvec);
double generating_function(const Table& probs, const ZVector& zvec);

/// G_z = g with z_k = z^k.
EstimateWithError daps_gz(const CoincidenceCounts& counts, double z);
double daps_gz(const Table& probs, double z);

/// Generic dispatch over a per-setting view (sampled counts preferred).
EstimateWithError daps_gz(const SettingCounts& setting, double z);

/// Minimal-eigenvalue analysis of the normalized symmetric coincidence
/// matrix at one setting (N = 2 only).
struct SettingEigen {
  int index = 0;
  double beta2 = 0.0;
  std::vector<double> zvec;  // optimal unit-norm Z
  EstimateWithError est;     // quadratic form on raw counts, fixed Z
};

struct GminScan {
  std::vector<SettingEigen> settings;
  std::size_t argmin = 0;

  const SettingEigen& best() const { return settings[argmin]; }
};

GminScan g_min_scan(std::span<const SettingCounts> scan);
SettingEigen eigen_min_setting(const SettingCounts& setting);

/// Sub-multinomial test matrix M with mu_min (errors via fixed-eigenvector
/// propagation when counts are sampled).
MultinomialMatrix multinomial_test(const CoincidenceCounts& counts);
MultinomialMatrix multinomial_test(const Table& probs);
MultinomialMatrix multinomial_test(const SettingCounts& setting);

/// Detector-independent LO amplitude |beta^DI| from vacuum-scan statistics.
double di_amplitude(const CoincidenceCounts& counts);
double di_amplitude(const Table& probs);

/// |beta^DI|^2 with full errors (reporting convenience).
EstimateWithError di_intensity(const SettingCounts& setting);

/// Bootstrap cross-check of the eigenvalue error bars: resample tuples,
/// recompute the statistic, return the sample standard deviation.
enum class EigenStatistic { lambda_min, mu_min };
double bootstrap_eigen_sigma(const CoincidenceCounts& counts, EigenStatistic stat, int resamples,
                             std::uint64_t seed);

}  // namespace daps
