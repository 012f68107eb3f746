#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "daps/rng.hpp"

namespace daps::oracles {

namespace {

using CMat = std::vector<std::vector<Complex>>;

CMat cmat(int dim) { return CMat(dim, std::vector<Complex>(dim, Complex{0.0})); }

CMat multiply(const CMat& a, const CMat& b) {
  const int n = static_cast<int>(a.size());
  CMat out = cmat(n);
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < n; ++k) {
      const Complex aik = a[i][k];
      if (aik == Complex{0.0}) continue;
      for (int j = 0; j < n; ++j) out[i][j] += aik * b[k][j];
    }
  }
  return out;
}

}  // namespace

std::vector<std::vector<Complex>> displacement_matrix_exp(Complex gamma, int dim) {
  // generator gamma a^dag - gamma^* a in the truncated basis
  CMat gen = cmat(dim);
  for (int n = 0; n + 1 < dim; ++n) {
    gen[n + 1][n] = gamma * std::sqrt(n + 1.0);        // a^dag
    gen[n][n + 1] = -std::conj(gamma) * std::sqrt(n + 1.0);  // -gamma^* a
  }
  double norm = 0.0;
  for (const auto& row : gen) {
    double acc = 0.0;
    for (const auto& v : row) acc += std::abs(v);
    norm = std::max(norm, acc);
  }
  int squarings = 0;
  while (norm > 0.25) {
    norm *= 0.5;
    ++squarings;
  }
  const double scale = std::ldexp(1.0, -squarings);

  CMat term = cmat(dim), result = cmat(dim);
  for (int i = 0; i < dim; ++i) {
    term[i][i] = 1.0;
    result[i][i] = 1.0;
  }
  CMat scaled = gen;
  for (auto& row : scaled)
    for (auto& v : row) v *= scale;
  for (int k = 1; k <= 24; ++k) {
    term = multiply(term, scaled);
    for (auto& row : term)
      for (auto& v : row) v /= static_cast<double>(k);
    for (int i = 0; i < dim; ++i)
      for (int j = 0; j < dim; ++j) result[i][j] += term[i][j];
  }
  for (int s = 0; s < squarings; ++s) result = multiply(result, result);
  return result;
}

double brute_force_min_quadratic(const SymMatrix& a, int n_dirs, std::uint64_t seed) {
  const int n = a.dim;
  Rng rng(seed);
  std::vector<double> best(n, 0.0), v(n, 0.0);
  double best_val = 0.0;
  bool first = true;
  for (int d = 0; d < n_dirs; ++d) {
    double norm = 0.0;
    for (int i = 0; i < n; ++i) {
      v[i] = rng.normal();
      norm += v[i] * v[i];
    }
    norm = std::sqrt(norm);
    for (int i = 0; i < n; ++i) v[i] /= norm;
    const double val = quadratic_form(a, v);
    if (first || val < best_val) {
      best_val = val;
      best = v;
      first = false;
    }
  }

  // projected gradient descent with backtracking on the sphere
  std::vector<double> grad(n, 0.0), trial(n, 0.0);
  for (int it = 0; it < 2000; ++it) {
    for (int i = 0; i < n; ++i) {
      grad[i] = 0.0;
      for (int j = 0; j < n; ++j) grad[i] += 2.0 * a.at(i, j) * best[j];
    }
    double dot = 0.0;
    for (int i = 0; i < n; ++i) dot += grad[i] * best[i];
    double tangent_norm = 0.0;
    for (int i = 0; i < n; ++i) {
      grad[i] -= dot * best[i];
      tangent_norm += grad[i] * grad[i];
    }
    tangent_norm = std::sqrt(tangent_norm);
    if (tangent_norm < 1e-12) break;

    double step = 0.5;
    bool moved = false;
    for (int back = 0; back < 60; ++back) {
      double norm = 0.0;
      for (int i = 0; i < n; ++i) {
        trial[i] = best[i] - step * grad[i];
        norm += trial[i] * trial[i];
      }
      norm = std::sqrt(norm);
      for (int i = 0; i < n; ++i) trial[i] /= norm;
      const double val = quadratic_form(a, trial);
      if (val < best_val - 1e-16) {
        best_val = val;
        best = trial;
        moved = true;
        break;
      }
      step *= 0.5;
    }
    if (!moved) break;
  }
  return best_val;
}

namespace {

/// Sum over photon compositions n_1 + ... + n_rest = remaining of the
/// multinomial coefficient times the per-arm response product.
double composition_sum(const ResponseMatrix& det, const std::vector<int>& tuple, int N, int arm,
                       int remaining, double coeff) {
  if (arm == N - 1) return coeff * det.at(tuple[arm], remaining);
  double acc = 0.0;
  double binom = 1.0;  // C(remaining, take)
  for (int take = 0; take <= remaining; ++take) {
    acc += composition_sum(det, tuple, N, arm + 1, remaining - take,
                           coeff * binom * det.at(tuple[arm], take));
    binom = binom * (remaining - take) / (take + 1.0);
  }
  return acc;
}

}  // namespace

Table click_statistics_bruteforce(const FockDistribution& dist, const ResponseMatrix& det, int N) {
  TableShape shape{N, det.K};
  Table out(shape);
  std::vector<int> tuple(N);
  for (std::size_t idx = 0; idx < shape.entries(); ++idx) {
    shape.decode(idx, tuple);
    double p = 0.0;
    for (int n = 0; n <= dist.n_max; ++n) {
      if (dist.probs[n] == 0.0) continue;
      p += dist.probs[n] * std::pow(1.0 / N, n) * composition_sum(det, tuple, N, 0, n, 1.0);
    }
    out.v[idx] = p;
  }
  return out;
}

namespace {

/// Fornberg weights for the p-th derivative at 0 on the given nodes.
std::vector<long double> fornberg_weights(const std::vector<long double>& x, int p) {
  const int n = static_cast<int>(x.size());
  std::vector<std::vector<long double>> c(n, std::vector<long double>(p + 1, 0.0L));
  long double c1 = 1.0L;
  long double c4 = x[0];
  c[0][0] = 1.0L;
  for (int i = 1; i < n; ++i) {
    const int mn = std::min(i, p);
    long double c2 = 1.0L;
    const long double c5 = c4;
    c4 = x[i];
    for (int j = 0; j < i; ++j) {
      const long double c3 = x[i] - x[j];
      c2 *= c3;
      if (j == i - 1) {
        for (int k = mn; k >= 1; --k)
          c[i][k] = c1 * (k * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
        c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
      }
      for (int k = mn; k >= 1; --k) c[j][k] = (c4 * c[j][k] - k * c[j][k - 1]) / c3;
      c[j][0] = c4 * c[j][0] / c3;
    }
    c1 = c2;
  }
  std::vector<long double> w(n);
  for (int i = 0; i < n; ++i) w[i] = c[i][p];
  return w;
}

}  // namespace

double central_derivative_exp(double c, double u, int p) {
  if (p == 0) return std::exp(-c * u);
  // wide symmetric stencil: order ~ 2m+1-p with long-double accumulation
  const int m = p / 2 + 4;
  const long double h = 0.12L / std::sqrt(static_cast<long double>(c) + 1.0L);
  std::vector<long double> nodes;
  for (int k = -m; k <= m; ++k) nodes.push_back(k * h);
  const auto w = fornberg_weights(nodes, p);
  long double acc = 0.0L;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    acc += w[i] * std::exp(static_cast<long double>(-c) * (u + nodes[i]));
  }
  return static_cast<double>(acc);
}

double fd_laguerre_derivative(double c, double u, int j) {
  // d^j d*^j g(|beta|^2) = sum_i C(j,i)^2 i! u^(j-i) g^(2j-i)(u)
  double acc = 0.0;
  for (int i = 0; i <= j; ++i) {
    double cji = 1.0;
    for (int t = 0; t < i; ++t) cji = cji * (j - t) / (t + 1.0);
    double ifact = 1.0;
    for (int t = 2; t <= i; ++t) ifact *= t;
    acc += cji * cji * ifact * std::pow(u, j - i) * central_derivative_exp(c, u, 2 * j - i);
  }
  return acc;
}

}  // namespace daps::oracles
