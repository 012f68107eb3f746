#include "daps/linalg.hpp"

#include <cmath>
#include <cstdlib>
#include <numbers>
#include <stdexcept>

#include "daps/errors.hpp"

namespace daps {

namespace {

double frobenius_norm(const SymMatrix& m) {
  double s = 0.0;
  for (double v : m.a) s += v * v;
  return std::sqrt(s);
}

}  // namespace

SymEigenMin symmetric_eigen_min(const SymMatrix& m) {
  const int n = m.dim;
  if (n <= 0) throw std::invalid_argument("symmetric_eigen_min: empty matrix");
  const double norm = frobenius_norm(m);
  // absolute floor: near-zero matrices (classical-state M) are legitimate
  const double sym_tol = 1e-12 * std::max(norm, 1.0);
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      if (std::abs(m.at(i, j) - m.at(j, i)) > sym_tol) {
        throw std::invalid_argument("symmetric_eigen_min: matrix not symmetric");
      }
    }
  }

  SymMatrix a = m;
  // enforce exact symmetry so sweeps terminate cleanly
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const double avg = 0.5 * (a.at(i, j) + a.at(j, i));
      a.at(i, j) = avg;
      a.at(j, i) = avg;
    }
  }

  std::vector<double> v(static_cast<std::size_t>(n) * n, 0.0);
  for (int i = 0; i < n; ++i) v[static_cast<std::size_t>(i) * n + i] = 1.0;

  const int max_sweeps = 64;
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double off = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) off += a.at(i, j) * a.at(i, j);
    if (std::sqrt(2.0 * off) <= 1e-15 * (norm > 0.0 ? norm : 1.0)) break;

    for (int p = 0; p < n - 1; ++p) {
      for (int q = p + 1; q < n; ++q) {
        const double apq = a.at(p, q);
        if (apq == 0.0) continue;
        const double app = a.at(p, p);
        const double aqq = a.at(q, q);
        const double theta = 0.5 * (aqq - app) / apq;
        double t = 1.0 / (std::abs(theta) + std::sqrt(1.0 + theta * theta));
        if (theta < 0.0) t = -t;
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = t * c;
        const double tau = s / (1.0 + c);

        a.at(p, p) = app - t * apq;
        a.at(q, q) = aqq + t * apq;
        a.at(p, q) = 0.0;
        a.at(q, p) = 0.0;
        for (int k = 0; k < n; ++k) {
          if (k == p || k == q) continue;
          const double akp = a.at(k, p);
          const double akq = a.at(k, q);
          a.at(k, p) = akp - s * (akq + tau * akp);
          a.at(p, k) = a.at(k, p);
          a.at(k, q) = akq + s * (akp - tau * akq);
          a.at(q, k) = a.at(k, q);
        }
        for (int k = 0; k < n; ++k) {
          const double vkp = v[static_cast<std::size_t>(k) * n + p];
          const double vkq = v[static_cast<std::size_t>(k) * n + q];
          v[static_cast<std::size_t>(k) * n + p] = vkp - s * (vkq + tau * vkp);
          v[static_cast<std::size_t>(k) * n + q] = vkq + s * (vkp - tau * vkq);
        }
      }
    }
  }

  int arg = 0;
  for (int i = 1; i < n; ++i)
    if (a.at(i, i) < a.at(arg, arg)) arg = i;

  SymEigenMin out;
  out.value = a.at(arg, arg);
  out.vector.resize(n);
  for (int i = 0; i < n; ++i) out.vector[i] = v[static_cast<std::size_t>(i) * n + arg];

  double vn = 0.0;
  for (double x : out.vector) vn += x * x;
  vn = std::sqrt(vn);
  int big = 0;
  for (int i = 1; i < n; ++i)
    if (std::abs(out.vector[i]) > std::abs(out.vector[big])) big = i;
  const double flip = out.vector[big] < 0.0 ? -1.0 : 1.0;
  for (double& x : out.vector) x = x / vn * flip;

  // residual check ||Av - lambda v||
  double res = 0.0;
  for (int i = 0; i < n; ++i) {
    double acc = 0.0;
    for (int j = 0; j < n; ++j) acc += m.at(i, j) * out.vector[j];
    const double d = acc - out.value * out.vector[i];
    res += d * d;
  }
  if (std::sqrt(res) > 1e-10 * (norm > 0.0 ? norm : 1.0)) {
    throw NumericError("symmetric_eigen_min: residual exceeds 1e-10 * ||A||");
  }
  return out;
}

double quadratic_form(const SymMatrix& m, std::span<const double> x) {
  double acc = 0.0;
  for (int i = 0; i < m.dim; ++i) {
    for (int j = 0; j < m.dim; ++j) acc += x[i] * m.at(i, j) * x[j];
  }
  return acc;
}

std::vector<double> solve_linear(std::vector<double> a, std::vector<double> b, int n) {
  if (static_cast<int>(b.size()) != n ||
      a.size() != static_cast<std::size_t>(n) * n) {
    throw std::invalid_argument("solve_linear: shape mismatch");
  }
  for (int col = 0; col < n; ++col) {
    int piv = col;
    for (int r = col + 1; r < n; ++r) {
      if (std::abs(a[static_cast<std::size_t>(r) * n + col]) >
          std::abs(a[static_cast<std::size_t>(piv) * n + col]))
        piv = r;
    }
    if (a[static_cast<std::size_t>(piv) * n + col] == 0.0) {
      throw NumericError("solve_linear: singular matrix");
    }
    if (piv != col) {
      for (int c = 0; c < n; ++c)
        std::swap(a[static_cast<std::size_t>(piv) * n + c],
                  a[static_cast<std::size_t>(col) * n + c]);
      std::swap(b[piv], b[col]);
    }
    const double d = a[static_cast<std::size_t>(col) * n + col];
    for (int r = col + 1; r < n; ++r) {
      const double f = a[static_cast<std::size_t>(r) * n + col] / d;
      if (f == 0.0) continue;
      for (int c = col; c < n; ++c)
        a[static_cast<std::size_t>(r) * n + c] -= f * a[static_cast<std::size_t>(col) * n + c];
      b[r] -= f * b[col];
    }
  }
  std::vector<double> x(n, 0.0);
  for (int r = n - 1; r >= 0; --r) {
    double acc = b[r];
    for (int c = r + 1; c < n; ++c) acc -= a[static_cast<std::size_t>(r) * n + c] * x[c];
    x[r] = acc / a[static_cast<std::size_t>(r) * n + r];
  }
  return x;
}

std::pair<std::vector<double>, std::vector<double>> gauss_legendre(int order) {
  if (order < 1) throw std::invalid_argument("gauss_legendre: order must be >= 1");
  std::vector<double> x(order), w(order);
  const int half = (order + 1) / 2;
  for (int i = 0; i < half; ++i) {
    // Chebyshev-like initial guess, then Newton on P_n.
    double z = std::cos(std::numbers::pi * (i + 0.75) / (order + 0.5));
    double pp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = 0.0;
      for (int j = 0; j < order; ++j) {
        const double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * j + 1.0) * z * p1 - j * p2) / (j + 1.0);
      }
      pp = order * (z * p0 - p1) / (z * z - 1.0);
      const double dz = p0 / pp;
      z -= dz;
      if (std::abs(dz) < 1e-15) break;
    }
    x[i] = -z;
    x[order - 1 - i] = z;
    w[i] = 2.0 / ((1.0 - z * z) * pp * pp);
    w[order - 1 - i] = w[i];
  }
  return {x, w};
}

double normal_cdf(double x) {
  return 0.5 * std::erfc(-x / std::numbers::sqrt2);
}

}  // namespace daps
