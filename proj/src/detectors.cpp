#include "daps/detectors.hpp"

#include <cmath>
#include <stdexcept>

#include "daps/errors.hpp"

namespace daps {

namespace {

constexpr double kTesEta2Max = 0.05;
constexpr int kTesNMaxCap = 170;  // n! representable in double
constexpr double kClampTol = 1e-9;

void check_eta(double eta) {
  if (!(eta >= 0.0 && eta <= 1.0))
    throw std::invalid_argument("detector efficiency eta outside [0,1]");
}

double binom_pmf(int n, int k, double eta) {
  if (k < 0 || k > n) return 0.0;
  if (eta == 0.0) return k == 0 ? 1.0 : 0.0;
  if (eta == 1.0) return k == n ? 1.0 : 0.0;
  const double lc = std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
  return std::exp(lc + k * std::log(eta) + (n - k) * std::log1p(-eta));
}

/// Taylor coefficients of e^(-eta2 mu^2) (eta mu + eta2 mu^2)^k / k! up to
/// degree j_max.
std::vector<double> tes_series(double eta, double eta2, int k, int j_max) {
  std::vector<double> a(j_max + 1, 0.0);  // (eta mu + eta2 mu^2)^k / k!
  const double inv_kfact = std::exp(-std::lgamma(k + 1.0));
  for (int i = 0; i <= k; ++i) {
    const int deg = k + i;
    if (deg > j_max) break;
    const double lc = std::lgamma(k + 1.0) - std::lgamma(i + 1.0) - std::lgamma(k - i + 1.0);
    a[deg] = std::exp(lc) * std::pow(eta, k - i) * std::pow(eta2, i) * inv_kfact;
  }
  if (eta2 == 0.0) return a;
  std::vector<double> g(j_max + 1, 0.0);
  // convolve with sum_m (-eta2)^m mu^(2m) / m!
  double bm = 1.0;
  for (int m = 0; 2 * m <= j_max; ++m) {
    for (int d = 0; d + 2 * m <= j_max; ++d) {
      if (a[d] != 0.0) g[d + 2 * m] += a[d] * bm;
    }
    bm *= -eta2 / (m + 1);
  }
  return g;
}

/// P(k|n) = sum_j n^(j) (1-eta)^(n-j) g_j where g is the Taylor series of
/// p_k(mu) with the e^(-eta mu) factor absorbed into the falling-factorial
/// map mu^j e^(-eta mu) -> n^(j) (1-eta)^(n-j). The sum terminates exactly
/// at j = n, so the only failure mode is term growth eating the absolute
/// accuracy; max_term tracks it.
double tes_fock_element(int n, double eta, const std::vector<double>& g, double& max_term) {
  max_term = 0.0;
  const int j_hi = std::min<int>(n, static_cast<int>(g.size()) - 1);
  if (eta == 1.0) {
    if (j_hi < n) return 0.0;
    const double t = std::exp(std::lgamma(n + 1.0));
    const double term = t * g[n];
    max_term = std::abs(term);
    return term;
  }
  double acc = 0.0;
  double t = std::exp(n * std::log1p(-eta));  // n^(0) (1-eta)^n
  for (int j = 0; j <= j_hi; ++j) {
    const double term = t * g[j];
    acc += term;
    max_term = std::max(max_term, std::abs(term));
    t *= (n - j) / (1.0 - eta);
  }
  return acc;
}

double clamp_probability(double v, const char* what) {
  if (v < 0.0) {
    if (v < -kClampTol)
      throw NumericError(std::string(what) + ": negative probability beyond clamp tolerance");
    return 0.0;
  }
  return v;
}

/// Round-off goes to zero; anything larger is an inherent negativity of the
/// quadratic-response model (the normal-ordered form with convex Gamma is
/// not a strict POVM) and is kept so that Poisson consistency with the
/// coherent response stays exact.
double clamp_roundoff(double v) { return (v < 0.0 && v > -kClampTol) ? 0.0 : v; }

}  // namespace

ResponseMatrix photoelectric_response(double eta, int K, int n_max) {
  check_eta(eta);
  if (K < 0 || n_max < 0) throw std::invalid_argument("photoelectric_response: bad shape");
  ResponseMatrix m;
  m.K = K;
  m.n_max = n_max;
  m.overflow_folded = K < n_max;
  m.p.assign(static_cast<std::size_t>(K + 1) * (n_max + 1), 0.0);
  for (int n = 0; n <= n_max; ++n) {
    double below = 0.0;
    for (int k = 0; k < K && k <= n; ++k) {
      const double v = binom_pmf(n, k, eta);
      m.at(k, n) = v;
      below += v;
    }
    // bin K collects k = K and, when folding, every k > K as well
    if (K <= n) m.at(K, n) = clamp_probability(1.0 - below, "photoelectric_response");
  }
  return m;
}

ResponseMatrix onoff_response(double eta, int n_max) {
  check_eta(eta);
  if (n_max < 0) throw std::invalid_argument("onoff_response: bad shape");
  ResponseMatrix m;
  m.K = 1;
  m.n_max = n_max;
  m.p.assign(static_cast<std::size_t>(2) * (n_max + 1), 0.0);
  for (int n = 0; n <= n_max; ++n) {
    const double p0 = eta == 1.0 ? (n == 0 ? 1.0 : 0.0) : std::exp(n * std::log1p(-eta));
    m.at(0, n) = p0;
    m.at(1, n) = 1.0 - p0;
  }
  return m;
}

ResponseMatrix tes_response(double eta, double eta2, int K, int n_max) {
  check_eta(eta);
  if (!(eta2 >= 0.0 && eta2 <= kTesEta2Max))
    throw std::invalid_argument("tes_response: eta2 outside [0, 0.05]");
  if (K < 1) throw std::invalid_argument("tes_response: K must be >= 1");
  if (n_max < 0 || n_max > kTesNMaxCap)
    throw std::invalid_argument("tes_response: n_max outside supported range");

  ResponseMatrix m;
  m.K = K;
  m.n_max = n_max;
  m.p.assign(static_cast<std::size_t>(K + 1) * (n_max + 1), 0.0);

  for (int k = 0; k < K; ++k) {
    const auto g = tes_series(eta, eta2, k, n_max);
    for (int n = 0; n <= n_max; ++n) {
      double max_term = 0.0;
      const double v = tes_fock_element(n, eta, g, max_term);
      // growing series terms destroy the absolute accuracy long before the
      // finite sum ends; 1e6 keeps round-off below the 1e-9 clamp budget
      if (!std::isfinite(v) || max_term > 1e6) {
        throw NumericError(
            "tes_response: series coefficients not decaying by order n_max (eta2 too large "
            "for the requested truncation)");
      }
      m.at(k, n) = clamp_roundoff(v);
    }
  }
  for (int n = 0; n <= n_max; ++n) {
    double below = 0.0;
    for (int k = 0; k < K; ++k) below += m.at(k, n);
    m.at(K, n) = clamp_probability(1.0 - below, "tes_response");
  }
  return m;
}

std::vector<double> CoherentResponse::operator()(double mu) const {
  if (!(mu >= 0.0)) throw std::invalid_argument("CoherentResponse: mu must be >= 0");
  std::vector<double> out(K + 1, 0.0);
  switch (model) {
    case Model::photoelectric: {
      double term = std::exp(-eta * mu);
      double below = 0.0;
      for (int k = 0; k <= K; ++k) {
        out[k] = term;
        below += term;
        term *= eta * mu / (k + 1);
      }
      if (folded) out[K] += 1.0 - below;
      break;
    }
    case Model::onoff: {
      out[0] = std::exp(-eta * mu);
      out[1] = 1.0 - out[0];
      break;
    }
    case Model::tes: {
      const double gamma = eta * mu + eta2 * mu * mu;
      double term = std::exp(-gamma);
      double below = 0.0;
      for (int k = 0; k < K; ++k) {
        out[k] = term;
        below += term;
        term *= gamma / (k + 1);
      }
      out[K] = std::max(0.0, 1.0 - below);
      break;
    }
  }
  return out;
}

ResponseMatrix response_matrix_of(const DetectorSpec& spec, int n_max) {
  if (spec.model == "photoelectric") return photoelectric_response(spec.eta, spec.K, n_max);
  if (spec.model == "onoff") return onoff_response(spec.eta, n_max);
  if (spec.model == "tes") return tes_response(spec.eta, spec.eta2, spec.K, n_max);
  throw ConfigError("unknown detector model: " + spec.model);
}

CoherentResponse coherent_response_of(const DetectorSpec& spec) {
  CoherentResponse r;
  r.eta = spec.eta;
  r.eta2 = spec.eta2;
  if (spec.model == "photoelectric") {
    check_eta(spec.eta);
    r.model = CoherentResponse::Model::photoelectric;
    r.K = spec.K;
  } else if (spec.model == "onoff") {
    check_eta(spec.eta);
    r.model = CoherentResponse::Model::onoff;
    r.K = 1;
  } else if (spec.model == "tes") {
    check_eta(spec.eta);
    if (!(spec.eta2 >= 0.0 && spec.eta2 <= kTesEta2Max))
      throw std::invalid_argument("coherent_response_of: eta2 outside [0, 0.05]");
    r.model = CoherentResponse::Model::tes;
    r.K = spec.K;
  } else {
    throw ConfigError("unknown detector model: " + spec.model);
  }
  return r;
}

}  // namespace daps
