#pragma once

#include <complex>
#include <vector>

namespace daps {

using Complex = std::complex<double>;

/// Photon-number distribution P_n, n = 0..n_max. Entries are nonnegative and
/// sum to 1 after construction; mass lost to truncation is recorded in
/// truncation_loss.
struct FockDistribution {
  std::vector<double> probs;
  int n_max = 0;
  double truncation_loss = 0.0;

  double mean() const;
  double sum() const;
};

/// Diagonal (or coherent) signal state description. A state is a convex
/// mixture of the primitive kinds below; phase_randomized marks coherent
/// amplitudes as phase-averaged, which makes the whole state Fock-diagonal.
struct StateSpec {
  enum class Kind { vacuum, fock, coherent, thermal };

  struct Component {
    Kind kind = Kind::vacuum;
    int m = 0;           // fock
    Complex alpha{0.0};  // coherent
    double nbar = 0.0;   // thermal
  };

  std::vector<std::pair<double, Component>> components;  // weight, component
  bool phase_randomized = false;

  static StateSpec vacuum();
  static StateSpec fock(int m);
  static StateSpec coherent(Complex alpha, bool phase_randomized = false);
  static StateSpec thermal(double nbar);
  static StateSpec mixture(std::vector<std::pair<double, StateSpec>> parts);

  /// Nonnegative Glauber-Sudarshan function (coherent/thermal mixtures).
  bool is_classical() const;
  double mean_photons() const;
  void validate() const;
};

/// Beam-splitter front end: signal transmitted with t, LO reflected with r,
/// |t|^2 + |r|^2 = 1 within 1e-12 (checked). n_max is the Fock truncation
/// used downstream.
struct FrontendConfig {
  Complex t{1.0};
  Complex r{0.0};
  int n_max = 0;

  FrontendConfig() = default;
  FrontendConfig(Complex t_, Complex r_, int n_max_);
  /// Convenience: real amplitudes from a |t|^2 split.
  static FrontendConfig from_t2(double t2, int n_max);

  double t2() const { return std::norm(t); }
  double r2() const { return std::norm(r); }
};

/// <n|D(gamma)|m> for the displacement D(gamma) = exp(gamma a^dag - gamma^* a).
/// Stable two-term recurrence over the Fock table; |result| <= 1.
Complex displaced_fock_overlap(int n, int m, Complex gamma);

/// Column <n|D(gamma)|m> for n = 0..n_max at fixed m.
std::vector<Complex> displaced_fock_column(int m, Complex gamma, int n_max);

/// Photon statistics of Fock state m after transmittance tau: binomial.
FockDistribution loss_diagonal(int m, double tau);

/// Photon-number distribution of the state entering the multiplexer when the
/// signal meets the LO |beta> on the front-end splitter. Throws NumericError
/// when more than tail_bound probability falls beyond cfg.n_max.
FockDistribution frontend_distribution(const StateSpec& state, const FrontendConfig& cfg,
                                       Complex beta, double tail_bound = 1e-10);

/// Smallest n_max for which the frontend tail stays below tail_bound across
/// the given LO amplitudes (doubles an initial moment-based guess).
int suggest_n_max(const StateSpec& state, Complex t, Complex r,
                  double beta_abs_max, double tail_bound = 1e-10);

}  // namespace daps
