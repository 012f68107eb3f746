#include "daps/fock.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "daps/errors.hpp"

namespace daps {

namespace {

constexpr int kMaxFockIndex = 4096;
// The forward recurrence loses accuracy slowly as the input index grows
// (the j-cascade amplifies the log-scaled seed row); beyond ~128 the error
// can pass 1e-7. Physical input states here stay below ~100, and the
// front end additionally self-checks the output mass.
constexpr int kMaxDisplacedInput = 128;

/// Poisson pmf row, truncated at n_max; returns lost tail mass.
double poisson_row(double mean, int n_max, std::vector<double>& out) {
  out.assign(n_max + 1, 0.0);
  if (mean < 0.0) throw std::invalid_argument("poisson_row: negative mean");
  if (mean == 0.0) {
    out[0] = 1.0;
    return 0.0;
  }
  // iterate in linear space; underflow to 0 is fine here
  double sum = 0.0;
  double term = std::exp(-mean);
  for (int n = 0; n <= n_max; ++n) {
    out[n] = term;
    sum += term;
    term *= mean / (n + 1);
  }
  return std::max(0.0, 1.0 - sum);
}

/// Binomial pmf B(j; m, tau) for j = 0..m.
std::vector<double> binomial_row(int m, double tau) {
  std::vector<double> out(m + 1, 0.0);
  if (tau == 0.0) {
    out[0] = 1.0;
    return out;
  }
  if (tau == 1.0) {
    out[m] = 1.0;
    return out;
  }
  const double lt = std::log(tau);
  const double lq = std::log1p(-tau);
  for (int j = 0; j <= m; ++j) {
    const double lc = std::lgamma(m + 1.0) - std::lgamma(j + 1.0) - std::lgamma(m - j + 1.0);
    out[j] = std::exp(lc + j * lt + (m - j) * lq);
  }
  return out;
}

/// Fock-diagonal input weights for the diagonal frontend route.
/// Returns weights w_j, j = 0..n_max (thermal tails beyond n_max are left
/// out and show up as truncation loss).
std::vector<double> diagonal_input_weights(const StateSpec::Component& c,
                                           bool phase_randomized, int n_max) {
  std::vector<double> w(n_max + 1, 0.0);
  switch (c.kind) {
    case StateSpec::Kind::vacuum:
      w[0] = 1.0;
      break;
    case StateSpec::Kind::fock:
      if (c.m > n_max) break;  // all mass beyond truncation
      w[c.m] = 1.0;
      break;
    case StateSpec::Kind::thermal: {
      if (c.nbar == 0.0) {
        w[0] = 1.0;
        break;
      }
      const double q = c.nbar / (1.0 + c.nbar);
      double term = 1.0 / (1.0 + c.nbar);
      for (int j = 0; j <= n_max; ++j) {
        w[j] = term;
        term *= q;
      }
      break;
    }
    case StateSpec::Kind::coherent: {
      if (!phase_randomized) {
        throw std::invalid_argument("diagonal route requires phase-randomized coherent");
      }
      std::vector<double> row;
      poisson_row(std::norm(c.alpha), n_max, row);
      w = std::move(row);
      break;
    }
  }
  return w;
}

}  // namespace

double FockDistribution::mean() const {
  double acc = 0.0;
  for (std::size_t n = 0; n < probs.size(); ++n) acc += static_cast<double>(n) * probs[n];
  return acc;
}

double FockDistribution::sum() const {
  double acc = 0.0;
  for (double p : probs) acc += p;
  return acc;
}

StateSpec StateSpec::vacuum() {
  StateSpec s;
  s.components.push_back({1.0, Component{Kind::vacuum, 0, Complex{0.0}, 0.0}});
  return s;
}

StateSpec StateSpec::fock(int m) {
  if (m < 0) throw std::invalid_argument("StateSpec::fock: m must be >= 0");
  StateSpec s;
  s.components.push_back({1.0, Component{Kind::fock, m, Complex{0.0}, 0.0}});
  return s;
}

StateSpec StateSpec::coherent(Complex alpha, bool phase_randomized) {
  StateSpec s;
  s.components.push_back({1.0, Component{Kind::coherent, 0, alpha, 0.0}});
  s.phase_randomized = phase_randomized;
  return s;
}

StateSpec StateSpec::thermal(double nbar) {
  if (nbar < 0.0) throw std::invalid_argument("StateSpec::thermal: nbar must be >= 0");
  StateSpec s;
  s.components.push_back({1.0, Component{Kind::thermal, 0, Complex{0.0}, nbar}});
  return s;
}

StateSpec StateSpec::mixture(std::vector<std::pair<double, StateSpec>> parts) {
  StateSpec s;
  for (auto& [w, part] : parts) {
    if (w < 0.0) throw std::invalid_argument("StateSpec::mixture: negative weight");
    s.phase_randomized = s.phase_randomized || part.phase_randomized;
    for (auto& [wi, ci] : part.components) s.components.push_back({w * wi, ci});
  }
  s.validate();
  return s;
}

bool StateSpec::is_classical() const {
  for (const auto& [w, c] : components) {
    if (w == 0.0) continue;
    if (c.kind == Kind::fock && c.m > 0) return false;
  }
  return true;
}

double StateSpec::mean_photons() const {
  double acc = 0.0;
  for (const auto& [w, c] : components) {
    switch (c.kind) {
      case Kind::vacuum: break;
      case Kind::fock: acc += w * c.m; break;
      case Kind::coherent: acc += w * std::norm(c.alpha); break;
      case Kind::thermal: acc += w * c.nbar; break;
    }
  }
  return acc;
}

void StateSpec::validate() const {
  if (components.empty()) throw std::invalid_argument("StateSpec: no components");
  double total = 0.0;
  for (const auto& [w, c] : components) {
    if (!(w >= 0.0)) throw std::invalid_argument("StateSpec: negative mixture weight");
    if (c.kind == Kind::fock && c.m < 0) throw std::invalid_argument("StateSpec: fock m < 0");
    if (c.kind == Kind::thermal && c.nbar < 0.0)
      throw std::invalid_argument("StateSpec: thermal nbar < 0");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-12)
    throw std::invalid_argument("StateSpec: mixture weights must sum to 1");
}

FrontendConfig::FrontendConfig(Complex t_, Complex r_, int n_max_) : t(t_), r(r_), n_max(n_max_) {
  if (std::abs(std::norm(t) + std::norm(r) - 1.0) > 1e-12)
    throw std::invalid_argument("FrontendConfig: |t|^2 + |r|^2 must equal 1");
  if (n_max < 0) throw std::invalid_argument("FrontendConfig: n_max must be >= 0");
}

FrontendConfig FrontendConfig::from_t2(double t2, int n_max) {
  if (t2 < 0.0 || t2 > 1.0) throw std::invalid_argument("FrontendConfig: t2 outside [0,1]");
  return FrontendConfig(std::sqrt(t2), std::sqrt(1.0 - t2), n_max);
}

std::vector<Complex> displaced_fock_column(int m, Complex gamma, int n_max) {
  if (m < 0 || n_max < 0 || m > kMaxDisplacedInput || n_max > kMaxFockIndex)
    throw std::invalid_argument("displaced_fock_column: index out of supported range");
  if (!std::isfinite(gamma.real()) || !std::isfinite(gamma.imag()))
    throw std::invalid_argument("displaced_fock_column: gamma must be finite");

  const double xi = std::norm(gamma);
  // table d[n][j] = <n|D(gamma)|j>, built over j = 0..m
  std::vector<std::vector<Complex>> d(n_max + 1, std::vector<Complex>(m + 1, Complex{0.0}));

  // top row <0|D|j> = (-gamma^*)^j / sqrt(j!) e^{-xi/2}, log-accumulated
  if (std::abs(gamma) == 0.0) {
    d[0][0] = 1.0;
  } else {
    const Complex phase_step = -std::conj(gamma) / std::abs(gamma);
    Complex phase{1.0};
    const double lg = std::log(std::abs(gamma));
    for (int j = 0; j <= m; ++j) {
      const double logmag = j * lg - 0.5 * std::lgamma(j + 1.0) - 0.5 * xi;
      d[0][j] = phase * std::exp(logmag);
      phase *= phase_step;
    }
  }

  // sqrt(n+1) <n+1|D|j> = gamma <n|D|j> + sqrt(j) <n|D|j-1>
  for (int n = 0; n < n_max; ++n) {
    const double inv = 1.0 / std::sqrt(n + 1.0);
    for (int j = 0; j <= m; ++j) {
      Complex acc = gamma * d[n][j];
      if (j > 0) acc += std::sqrt(static_cast<double>(j)) * d[n][j - 1];
      d[n + 1][j] = acc * inv;
    }
  }

  std::vector<Complex> col(n_max + 1);
  for (int n = 0; n <= n_max; ++n) col[n] = d[n][m];
  return col;
}

Complex displaced_fock_overlap(int n, int m, Complex gamma) {
  if (n < 0 || m < 0 || n > kMaxFockIndex || m > kMaxFockIndex)
    throw std::invalid_argument("displaced_fock_overlap: index out of supported range");
  if (m <= kMaxDisplacedInput) return displaced_fock_column(m, gamma, n)[n];
  // <n|D(gamma)|m> = <m|D(-gamma)|n>^*
  if (n <= kMaxDisplacedInput) return std::conj(displaced_fock_column(n, -gamma, m)[m]);
  throw std::invalid_argument("displaced_fock_overlap: index out of supported range");
}

FockDistribution loss_diagonal(int m, double tau) {
  if (m < 0) throw std::invalid_argument("loss_diagonal: m must be >= 0");
  if (tau < 0.0 || tau > 1.0) throw std::invalid_argument("loss_diagonal: tau outside [0,1]");
  FockDistribution out;
  out.probs = binomial_row(m, tau);
  out.n_max = m;
  return out;
}

namespace {

std::vector<double> frontend_probs(const StateSpec& state, const FrontendConfig& cfg,
                                   Complex beta, double& tail_out) {
  const int n_max = cfg.n_max;
  const double tau = cfg.t2();
  const Complex gamma_d = -cfg.r * beta;

  std::vector<double> probs(n_max + 1, 0.0);
  double tail = 0.0;

  // group diagonal-route components so the displacement table is built once
  std::vector<double> diag_in(n_max + 1, 0.0);
  bool have_diag = false;

  std::vector<double> row;
  for (const auto& [w, c] : state.components) {
    if (w == 0.0) continue;
    const bool coherent_fixed_phase =
        c.kind == StateSpec::Kind::coherent && !state.phase_randomized;
    if (c.kind == StateSpec::Kind::vacuum || coherent_fixed_phase) {
      const Complex amp = cfg.t * (c.kind == StateSpec::Kind::coherent ? c.alpha : Complex{0.0}) -
                          cfg.r * beta;
      tail += w * poisson_row(std::norm(amp), n_max, row);
      for (int n = 0; n <= n_max; ++n) probs[n] += w * row[n];
    } else {
      const auto w_in = diagonal_input_weights(c, state.phase_randomized, n_max);
      double in_sum = 0.0;
      for (double x : w_in) in_sum += x;
      tail += w * std::max(0.0, 1.0 - in_sum);
      for (int j = 0; j <= n_max; ++j) diag_in[j] += w * w_in[j];
      have_diag = true;
    }
  }

  if (have_diag) {
    // transmit: w2_j = sum_m diag_in[m] B(j; m, tau)
    std::vector<double> w2(n_max + 1, 0.0);
    for (int m = n_max; m >= 0; --m) {
      if (diag_in[m] == 0.0) continue;
      const auto b = binomial_row(m, tau);
      for (int j = 0; j <= m; ++j) w2[j] += diag_in[m] * b[j];
    }
    // negligible weights are folded into the tail budget so huge formal
    // supports (thermal tails) do not trip the displacement range guard
    int support = 0;
    for (int j = 0; j <= n_max; ++j) {
      if (w2[j] == 0.0) continue;
      if (w2[j] < 1e-16) {
        tail += w2[j];
        w2[j] = 0.0;
        continue;
      }
      support = j;
    }
    if (support > kMaxDisplacedInput && std::abs(gamma_d) > 0.0) {
      throw NumericError(
          "frontend_distribution: diagonal support exceeds the validated displacement range");
    }

    if (std::abs(gamma_d) == 0.0) {
      for (int j = 0; j <= n_max; ++j) probs[j] += w2[j];
    } else {
      // displace: P_n += sum_j w2_j |<n|D(gamma_d)|j>|^2, shared table pass
      const double xi = std::norm(gamma_d);
      const Complex phase_step = -std::conj(gamma_d) / std::abs(gamma_d);
      const double lg = std::log(std::abs(gamma_d));
      std::vector<Complex> top(support + 1);
      {
        Complex phase{1.0};
        for (int j = 0; j <= support; ++j) {
          top[j] = phase * std::exp(j * lg - 0.5 * std::lgamma(j + 1.0) - 0.5 * xi);
          phase *= phase_step;
        }
      }
      // column-major over j with rolling rows: iterate rows n, keep d[n][*]
      std::vector<Complex> dn(top.begin(), top.end());
      for (int n = 0;; ++n) {
        for (int j = 0; j <= support; ++j) probs[n] += w2[j] * std::norm(dn[j]);
        if (n == n_max) break;
        const double inv = 1.0 / std::sqrt(n + 1.0);
        Complex left{0.0};
        for (int j = 0; j <= support; ++j) {
          const Complex next = (gamma_d * dn[j] + std::sqrt(static_cast<double>(j)) * left) * inv;
          left = dn[j];
          dn[j] = next;
        }
      }
    }
  }

  double total = 0.0;
  for (double p : probs) total += p;
  tail = std::max(tail, 1.0 - total);
  tail_out = tail;
  return probs;
}

}  // namespace

FockDistribution frontend_distribution(const StateSpec& state, const FrontendConfig& cfg,
                                       Complex beta, double tail_bound) {
  state.validate();
  if (cfg.n_max <= 0) throw std::invalid_argument("frontend_distribution: n_max must be > 0");

  double tail = 0.0;
  auto probs = frontend_probs(state, cfg, beta, tail);
  if (tail > tail_bound) {
    char msg[160];
    std::snprintf(msg, sizeof(msg),
                  "frontend_distribution: truncation tail %.3e exceeds bound %.3e at n_max=%d",
                  tail, tail_bound, cfg.n_max);
    throw NumericError(msg);
  }
  {
    // excess mass cannot come from truncation; it flags lost recurrence
    // accuracy at deep input indices
    double total = 0.0;
    for (double p : probs) total += p;
    if (total - 1.0 > tail_bound) {
      throw NumericError("frontend_distribution: output mass exceeds 1 (displacement accuracy)");
    }
  }

  if (state.phase_randomized && std::abs(beta) > 0.0) {
    // diagnostic: output must not depend on arg(beta)
    double tail2 = 0.0;
    const auto rotated = frontend_probs(state, cfg, beta * std::polar(1.0, 0.7), tail2);
    for (int n = 0; n <= cfg.n_max; ++n) {
      if (std::abs(rotated[n] - probs[n]) > 1e-12) {
        throw NumericError("frontend_distribution: phase_randomized output depends on arg(beta)");
      }
    }
  }

  FockDistribution out;
  out.n_max = cfg.n_max;
  out.truncation_loss = tail;
  double total = 0.0;
  for (double p : probs) total += p;
  out.probs.resize(probs.size());
  for (std::size_t n = 0; n < probs.size(); ++n) out.probs[n] = probs[n] / total;
  return out;
}

int suggest_n_max(const StateSpec& state, Complex t, Complex r, double beta_abs_max,
                  double tail_bound) {
  const double mu = std::norm(t) * state.mean_photons() + std::norm(r) * beta_abs_max * beta_abs_max;
  int max_fock = 0;
  for (const auto& [w, c] : state.components)
    if (c.kind == StateSpec::Kind::fock && w > 0.0) max_fock = std::max(max_fock, c.m);
  int guess = static_cast<int>(std::ceil(mu + 12.0 * std::sqrt(mu + 1.0) + 16.0)) + max_fock;
  for (; guess <= kMaxFockIndex; guess = guess * 3 / 2 + 8) {
    try {
      FrontendConfig cfg(t, r, guess);
      frontend_distribution(state, cfg, Complex{beta_abs_max, 0.0}, tail_bound);
      frontend_distribution(state, cfg, Complex{0.0, 0.0}, tail_bound);
      return guess;
    } catch (const NumericError&) {
      continue;
    }
  }
  throw NumericError("suggest_n_max: no adequate truncation below hard cap");
}

}  // namespace daps
