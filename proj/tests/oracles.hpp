#pragma once

// Test-only oracles. Each one is an independent route to a quantity the
// library computes; none of them call the implementation they check.

#include <complex>
#include <vector>

#include "daps/counts.hpp"
#include "daps/detectors.hpp"
#include "daps/fock.hpp"
#include "daps/linalg.hpp"

namespace daps::oracles {

/// Dense <n|exp(gamma a^dag - gamma^* a)|m> by scaling-and-squaring matrix
/// exponential in a truncated Fock space; entry (n, m) at row n.
std::vector<std::vector<Complex>> displacement_matrix_exp(Complex gamma, int dim);

/// min over unit vectors of x^T A x: random directions plus projected
/// gradient polish (never calls the Jacobi solver).
double brute_force_min_quadratic(const SymMatrix& a, int n_dirs, std::uint64_t seed);

/// Direct multinomial composition sum of the joint click statistics,
/// feasible for small n_max and N.
Table click_statistics_bruteforce(const FockDistribution& dist, const ResponseMatrix& det, int N);

/// p-th derivative of exp(-c t) at t = u via direct central stencils with
/// two Richardson levels (long double arithmetic).
double central_derivative_exp(double c, double u, int p);

/// d^j d*^j exp(-c |beta|^2) assembled from radial central-difference
/// derivatives: sum_i C(j,i)^2 i! u^(j-i) g^(2j-i)(u).
double fd_laguerre_derivative(double c, double u, int j);

}  // namespace daps::oracles
