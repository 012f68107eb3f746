#pragma once

#include <string>
#include <vector>

namespace daps {

/// Fock-diagonal detector model: p(k, n) = P(outcome k | n photons) for
/// k = 0..K, n = 0..n_max. Columns sum to 1 (POVM completeness). When the
/// outcome range cannot hold every photon number (K < n_max for a counter),
/// the excess mass is folded into k = K and overflow_folded is set.
struct ResponseMatrix {
  int K = 0;
  int n_max = 0;
  bool overflow_folded = false;
  std::vector<double> p;  // (K+1) x (n_max+1), row-major over k

  double at(int k, int n) const { return p[static_cast<std::size_t>(k) * (n_max + 1) + n]; }
  double& at(int k, int n) { return p[static_cast<std::size_t>(k) * (n_max + 1) + n]; }
};

/// Closed-form coherent-state response p_k(mu) with mu the mean photon
/// number hitting the detector.
struct CoherentResponse {
  enum class Model { photoelectric, onoff, tes };
  Model model = Model::photoelectric;
  double eta = 1.0;
  double eta2 = 0.0;
  int K = 0;
  bool folded = false;  // photoelectric only: fold k >= K into K

  std::vector<double> operator()(double mu) const;
};

/// Detector description shared by the builders and the CLI config schema.
struct DetectorSpec {
  std::string model = "tes";  // photoelectric | onoff | tes
  double eta = 0.9;
  double eta2 = 0.01;
  int K = 4;
};

/// Photoelectric counter: P(k|n) = C(n,k) eta^k (1-eta)^(n-k); folds overflow
/// into k = K when K < n_max.
ResponseMatrix photoelectric_response(double eta, int K, int n_max);

/// On-off (click/no-click) detector, K = 1.
ResponseMatrix onoff_response(double eta, int n_max);

/// TES-like finite-resolution detector with response Gamma(n) = eta n + eta2 n^2;
/// bins k < K from the normal-ordered series, bin K by completeness.
ResponseMatrix tes_response(double eta, double eta2, int K, int n_max);

ResponseMatrix response_matrix_of(const DetectorSpec& spec, int n_max);
CoherentResponse coherent_response_of(const DetectorSpec& spec);

}  // namespace daps
