#pragma once

#include <span>
#include <utility>
#include <vector>

namespace daps {

/// Dense symmetric matrix, row-major, dimension dim x dim.
struct SymMatrix {
  int dim = 0;
  std::vector<double> a;  // dim*dim entries

  SymMatrix() = default;
  explicit SymMatrix(int d) : dim(d), a(static_cast<std::size_t>(d) * d, 0.0) {}

  double& at(int i, int j) { return a[static_cast<std::size_t>(i) * dim + j]; }
  double at(int i, int j) const { return a[static_cast<std::size_t>(i) * dim + j]; }
};

struct SymEigenMin {
  double value = 0.0;
  std::vector<double> vector;  // unit norm
};

/// Smallest eigenvalue and eigenvector of a symmetric matrix via cyclic
/// Jacobi rotations. Input must be symmetric within 1e-12 relative to its
/// Frobenius norm; the residual ||Av - lambda v|| <= 1e-10 ||A||_F is
/// verified before returning. The eigenvector sign is fixed so that its
/// largest-magnitude component is positive.
SymEigenMin symmetric_eigen_min(const SymMatrix& m);

/// Quadratic form x^T A x.
double quadratic_form(const SymMatrix& m, std::span<const double> x);

/// Solve A x = b by Gaussian elimination with partial pivoting (small dense
/// systems; A is overwritten conceptually, caller keeps ownership).
std::vector<double> solve_linear(std::vector<double> a, std::vector<double> b, int n);

/// Gauss-Legendre nodes and weights on [-1, 1].
std::pair<std::vector<double>, std::vector<double>> gauss_legendre(int order);

/// Standard normal CDF, accurate to ~1e-15 via erfc.
double normal_cdf(double x);

}  // namespace daps
