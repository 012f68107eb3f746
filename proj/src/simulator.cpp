#include "daps/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <functional>
#include <numbers>
#include <stdexcept>

#include "daps/errors.hpp"
#include "daps/rng.hpp"

namespace daps {

namespace {

constexpr int kMaxArms = 8;
constexpr int kEgfNMaxCap = 160;           // 1/n! stays normal in double
constexpr std::uint64_t kChunkTrials = 1 << 16;
constexpr std::size_t kMcEntriesCap = 4096;  // tuple table cap for the MC oracle

std::size_t chunk_count(std::uint64_t work, std::size_t slot_bytes) {
  // pure function of the workload so the chunk layout never depends on the
  // machine or thread count
  std::size_t chunks = static_cast<std::size_t>((work + kChunkTrials - 1) / kChunkTrials);
  chunks = std::max<std::size_t>(chunks, 1);
  const std::size_t budget = 64u << 20;
  const std::size_t cap = std::max<std::size_t>(1, budget / std::max<std::size_t>(slot_bytes, 1));
  return std::min(chunks, cap);
}

/// Per-arm EGF rows: row[k][j] = P(k|j) w^j / j!.
std::vector<std::vector<double>> egf_rows(const ResponseMatrix& det, double weight, int deg) {
  std::vector<std::vector<double>> rows(det.K + 1, std::vector<double>(deg + 1, 0.0));
  std::vector<double> wpow(deg + 1);  // w^j / j!
  wpow[0] = 1.0;
  for (int j = 1; j <= deg; ++j) wpow[j] = wpow[j - 1] * weight / j;
  for (int k = 0; k <= det.K; ++k)
    for (int j = 0; j <= deg; ++j) rows[k][j] = det.at(k, j) * wpow[j];
  return rows;
}

void convolve_truncated(const std::vector<double>& a, const std::vector<double>& b,
                        std::vector<double>& out) {
  const int deg = static_cast<int>(out.size()) - 1;
  std::fill(out.begin(), out.end(), 0.0);
  for (int i = 0; i <= deg; ++i) {
    if (a[i] == 0.0) continue;
    const int jmax = deg - i;
    for (int j = 0; j <= jmax; ++j) out[i + j] += a[i] * b[j];
  }
}

}  // namespace

void MultiplexConfig::validate() const {
  if (S < 1 || N() > kMaxArms)
    throw std::invalid_argument("MultiplexConfig: N = 2^S must be in [2, 8]");
  if (imbalance) {
    const auto& imb = *imbalance;
    if (static_cast<int>(imb.weights.size()) != N())
      throw std::invalid_argument("MultiplexConfig: imbalance weights must have N entries");
    double total = 0.0;
    for (double w : imb.weights) {
      if (!(w > 0.0)) throw std::invalid_argument("MultiplexConfig: imbalance weights must be positive");
      total += w;
    }
    if (std::abs(total - 1.0) > 1e-12)
      throw std::invalid_argument("MultiplexConfig: imbalance weights must sum to 1");
    if (!imb.per_arm.empty() && static_cast<int>(imb.per_arm.size()) != N())
      throw std::invalid_argument("MultiplexConfig: per-arm responses must have N entries");
    for (const auto& d : imb.per_arm) {
      if (d.K != detector.K)
        throw std::invalid_argument("MultiplexConfig: per-arm responses must share K");
    }
  }
}

namespace {

Table click_statistics_impl(const FockDistribution& dist, std::span<const ResponseMatrix> dets,
                            std::span<const double> weights, int N) {
  if (N < 1 || N > kMaxArms) throw std::invalid_argument("click_statistics_exact: N outside [1,8]");
  const int n_max = dist.n_max;
  if (n_max > kEgfNMaxCap)
    throw NumericError("click_statistics_exact: n_max exceeds tractable bound");
  const int K = dets[0].K;
  for (const auto& d : dets) {
    if (d.K != K) throw std::invalid_argument("click_statistics_exact: inconsistent K");
    if (d.n_max < n_max)
      throw std::invalid_argument("click_statistics_exact: detector n_max below distribution n_max");
  }

  const bool shared = dets.size() == 1;
  const bool balanced = weights.empty();

  TableShape shape{N, K};
  if (!balanced && shape.entries() > (1u << 20))
    throw NumericError("click_statistics_exact: imbalanced table too large");
  Table out(shape);

  // n! prefactors applied to the assembled coefficient
  std::vector<double> factorial(n_max + 1);
  factorial[0] = 1.0;
  for (int n = 1; n <= n_max; ++n) factorial[n] = factorial[n - 1] * n;

  std::vector<std::vector<std::vector<double>>> arm_rows;
  if (shared && balanced) {
    arm_rows.push_back(egf_rows(dets[0], 1.0 / N, n_max));
  } else {
    for (int a = 0; a < N; ++a) {
      const ResponseMatrix& d = shared ? dets[0] : dets[a];
      const double w = balanced ? 1.0 / N : weights[a];
      arm_rows.push_back(egf_rows(d, w, n_max));
    }
  }

  std::vector<double> acc(n_max + 1), tmp(n_max + 1);
  std::vector<int> tuple(N, 0);

  auto rows_for_arm = [&](int a) -> const std::vector<std::vector<double>>& {
    return arm_rows.size() == 1 ? arm_rows[0] : arm_rows[a];
  };
  auto tuple_probability = [&](std::span<const int> t) {
    acc = rows_for_arm(0)[t[0]];
    for (int a = 1; a < N; ++a) {
      convolve_truncated(acc, rows_for_arm(a)[t[a]], tmp);
      std::swap(acc, tmp);
    }
    double p = 0.0;
    for (int n = 0; n <= n_max; ++n) p += dist.probs[n] * factorial[n] * acc[n];
    return p;
  };

  if (balanced && shared) {
    // identical arms: evaluate one representative per multiset and copy the
    // value to every arrangement, which keeps exchange symmetry exact
    std::function<void(int, int)> visit = [&](int arm, int low) {
      if (arm == N) {
        const double p = tuple_probability(tuple);
        std::vector<int> perm(tuple.begin(), tuple.end());
        std::sort(perm.begin(), perm.end());
        do {
          out.v[shape.index(perm)] = p;
        } while (std::next_permutation(perm.begin(), perm.end()));
        return;
      }
      for (int k = low; k <= K; ++k) {
        tuple[arm] = k;
        visit(arm + 1, k);
      }
    };
    visit(0, 0);
  } else {
    for (std::size_t idx = 0; idx < shape.entries(); ++idx) {
      shape.decode(idx, tuple);
      out.v[idx] = tuple_probability(tuple);
    }
  }

  const double total = out.sum();
  if (std::abs(total - 1.0) > 1e-10)
    throw NumericError("click_statistics_exact: table sum deviates from 1 by " +
                       std::to_string(std::abs(total - 1.0)));
  return out;
}

}  // namespace

Table click_statistics_exact(const FockDistribution& dist, const ResponseMatrix& det, int N) {
  return click_statistics_impl(dist, {&det, 1}, {}, N);
}

Table click_statistics_exact(const FockDistribution& dist, const MultiplexConfig& cfg) {
  cfg.validate();
  if (!cfg.imbalance) return click_statistics_impl(dist, {&cfg.detector, 1}, {}, cfg.N());
  const auto& imb = *cfg.imbalance;
  if (imb.per_arm.empty())
    return click_statistics_impl(dist, {&cfg.detector, 1}, imb.weights, cfg.N());
  return click_statistics_impl(dist, imb.per_arm, imb.weights, cfg.N());
}

CoincidenceCounts sample_events(const Table& probs, std::uint64_t trials, std::uint64_t seed,
                                Exec exec) {
  if (trials < 1) throw std::invalid_argument("sample_events: trials must be >= 1");
  std::vector<double> weights(probs.v);
  for (double& w : weights) {
    if (w < 0.0) {
      if (w < -1e-12)
        throw NumericError(
            "sample_events: table has negative probabilities (detector model out of its "
            "validity range)");
      w = 0.0;
    }
  }
  const AliasTable alias(weights);

  const std::size_t n_chunks = chunk_count(trials, 0);
  const std::uint64_t per_chunk = (trials + n_chunks - 1) / n_chunks;

  CoincidenceCounts out(probs.shape);
  std::vector<std::vector<std::uint64_t>> partial(n_chunks);

  run_chunks(n_chunks, exec, [&](std::size_t c) {
    const std::uint64_t begin = c * per_chunk;
    const std::uint64_t end = std::min<std::uint64_t>(trials, begin + per_chunk);
    if (begin >= end) return;
    Rng rng(mix_seed(seed, 0x73616d70ULL, c));
    std::vector<std::uint64_t> local(probs.shape.entries(), 0);
    for (std::uint64_t t = begin; t < end; ++t) ++local[alias.sample(rng)];
    partial[c] = std::move(local);
  });

  for (const auto& local : partial) {
    if (local.empty()) continue;
    for (std::size_t i = 0; i < out.counts.size(); ++i) out.counts[i] += local[i];
  }
  out.total = trials;
  return out;
}

std::pair<StateSpec, double> heralded_pdc_state(double lambda, double herald_tau,
                                                const ResponseMatrix& herald, int k_h) {
  if (!(lambda >= 0.0 && lambda < 1.0))
    throw std::invalid_argument("heralded_pdc_state: lambda outside [0,1)");
  if (!(herald_tau >= 0.0 && herald_tau <= 1.0))
    throw std::invalid_argument("heralded_pdc_state: herald transmittance outside [0,1]");
  if (k_h < 0 || k_h > herald.K)
    throw std::invalid_argument("heralded_pdc_state: heralding bin outside detector range");

  const double lam2 = lambda * lambda;
  int n_support = 4 + k_h;
  if (lam2 > 0.0) {
    n_support = std::max<int>(n_support,
                              static_cast<int>(std::ceil(std::log(1e-18) / std::log(lam2))) + k_h);
  }
  if (herald.n_max < n_support)
    throw std::invalid_argument("heralded_pdc_state: herald detector n_max too small (need " +
                                std::to_string(n_support) + ")");

  std::vector<double> w(n_support + 1, 0.0);
  double geom = 1.0 - lam2;
  double total = 0.0;
  for (int n = 0; n <= n_support; ++n) {
    // P(herald reads k_h | idler carried n) after the herald loss
    double ph = 0.0;
    const auto thin = loss_diagonal(n, herald_tau);
    for (int j = 0; j <= n; ++j) ph += thin.probs[j] * herald.at(k_h, j);
    w[n] = geom * ph;
    total += w[n];
    geom *= lam2;
  }
  if (!(total > 1e-300)) throw NumericError("heralded_pdc_state: zero heralding probability");

  std::vector<std::pair<double, StateSpec>> parts;
  for (int n = 0; n <= n_support; ++n) {
    if (w[n] / total < 1e-15) continue;
    parts.push_back({w[n], StateSpec::fock(n)});
  }
  double kept = 0.0;
  for (auto& p : parts) kept += p.first;
  for (auto& p : parts) p.first /= kept;
  return {StateSpec::mixture(std::move(parts)), total};
}

std::vector<SettingCounts> setting_views(const std::vector<ScanSetting>& scan, bool prefer_events) {
  std::vector<SettingCounts> out;
  out.reserve(scan.size());
  for (const auto& s : scan) {
    SettingCounts v;
    v.index = s.index;
    v.beta2 = s.beta2;
    if (prefer_events && s.events) {
      v.events = &*s.events;
    } else if (s.exact) {
      v.exact = &*s.exact;
    } else if (s.events) {
      v.events = &*s.events;
    }
    out.push_back(v);
  }
  return out;
}

ScanDataset scan_experiment(const StateSpec& state, const MultiplexConfig& cfg,
                            std::span<const double> beta2_grid, std::uint64_t trials,
                            std::uint64_t seed, Exec exec) {
  cfg.validate();
  state.validate();
  if (beta2_grid.empty()) throw std::invalid_argument("scan_experiment: empty LO grid");

  ScanDataset ds;
  ds.shape = TableShape{cfg.N(), cfg.detector.K};
  ds.seed = seed;
  ds.trials = trials;
  ds.signal.resize(beta2_grid.size());
  ds.vacuum.resize(beta2_grid.size());

  const StateSpec vac = StateSpec::vacuum();
  const std::size_t n_settings = beta2_grid.size();

  run_chunks(2 * n_settings, exec, [&](std::size_t slot) {
    const bool is_vacuum = slot >= n_settings;
    const std::size_t i = is_vacuum ? slot - n_settings : slot;
    const double beta2 = beta2_grid[i];
    if (!(beta2 >= 0.0)) throw std::invalid_argument("scan_experiment: negative |beta|^2");
    const Complex beta{std::sqrt(beta2), 0.0};

    ScanSetting s;
    s.index = static_cast<int>(i);
    s.beta2 = beta2;
    const auto dist = frontend_distribution(is_vacuum ? vac : state, cfg.frontend, beta);
    s.exact = click_statistics_exact(dist, cfg);
    if (trials > 0) {
      const std::uint64_t stream = mix_seed(seed, is_vacuum ? 0x766163ULL : 0x736967ULL, i);
      s.events = sample_events(*s.exact, trials, stream, Exec::serial);
    }
    (is_vacuum ? ds.vacuum : ds.signal)[i] = std::move(s);
  });

  return ds;
}

McTable pfunction_mc_oracle(const StateSpec& state, const FrontendConfig& fe,
                            const CoherentResponse& resp, int N, Complex beta,
                            std::uint64_t samples, std::uint64_t seed, Exec exec,
                            std::span<const double> arm_weights) {
  state.validate();
  if (!state.is_classical())
    throw std::invalid_argument("pfunction_mc_oracle: state has no nonnegative P function");
  if (N < 1 || N > kMaxArms) throw std::invalid_argument("pfunction_mc_oracle: N outside [1,8]");
  if (samples < 2) throw std::invalid_argument("pfunction_mc_oracle: need at least 2 samples");
  if (!arm_weights.empty() && static_cast<int>(arm_weights.size()) != N)
    throw std::invalid_argument("pfunction_mc_oracle: weight count mismatch");

  TableShape shape{N, resp.K};
  const std::size_t entries = shape.entries();
  if (entries > kMcEntriesCap)
    throw NumericError("pfunction_mc_oracle: tuple table too large for the MC path");

  // component picker for mixtures
  std::vector<double> comp_weights;
  for (const auto& [w, c] : state.components) comp_weights.push_back(w);
  const AliasTable comp_pick(comp_weights);

  // decode every tuple once; the sample loop only reads
  std::vector<int> tuples_flat(entries * N);
  {
    std::vector<int> t(N);
    for (std::size_t idx = 0; idx < entries; ++idx) {
      shape.decode(idx, t);
      for (int a = 0; a < N; ++a) tuples_flat[idx * N + a] = t[a];
    }
  }

  const std::size_t n_chunks = chunk_count(samples, entries * 16);
  const std::uint64_t per_chunk = (samples + n_chunks - 1) / n_chunks;

  std::vector<std::vector<double>> sum_slot(n_chunks), sq_slot(n_chunks);

  run_chunks(n_chunks, exec, [&](std::size_t c) {
    const std::uint64_t begin = c * per_chunk;
    const std::uint64_t end = std::min<std::uint64_t>(samples, begin + per_chunk);
    if (begin >= end) return;
    Rng rng(mix_seed(seed, 0x70664d43ULL, c));
    std::vector<double> sum(entries, 0.0), sq(entries, 0.0);
    std::vector<std::vector<double>> arm_p(N);
    std::vector<double> shared_p;

    const bool balanced = arm_weights.empty();
    for (std::uint64_t t = begin; t < end; ++t) {
      const auto& comp = state.components[comp_pick.sample(rng)].second;
      Complex alpha{0.0};
      switch (comp.kind) {
        case StateSpec::Kind::vacuum:
          break;
        case StateSpec::Kind::fock:
          break;  // only m = 0 passes the classicality gate
        case StateSpec::Kind::coherent:
          alpha = state.phase_randomized
                      ? std::polar(std::abs(comp.alpha), 2.0 * std::numbers::pi * rng.uniform())
                      : comp.alpha;
          break;
        case StateSpec::Kind::thermal: {
          const double s = std::sqrt(comp.nbar / 2.0);
          alpha = Complex{s * rng.normal(), s * rng.normal()};
          break;
        }
      }
      const double mu_total = std::norm(fe.t * alpha - fe.r * beta);

      if (balanced) {
        shared_p = resp(mu_total / N);
      } else {
        for (int a = 0; a < N; ++a) arm_p[a] = resp(arm_weights[a] * mu_total);
      }

      // accumulate the product over arms for every tuple
      for (std::size_t idx = 0; idx < entries; ++idx) {
        const int* t = &tuples_flat[idx * N];
        double prod = 1.0;
        for (int a = 0; a < N; ++a) prod *= balanced ? shared_p[t[a]] : arm_p[a][t[a]];
        sum[idx] += prod;
        sq[idx] += prod * prod;
      }
    }
    sum_slot[c] = std::move(sum);
    sq_slot[c] = std::move(sq);
  });

  std::vector<double> sum(entries, 0.0), sq(entries, 0.0);
  for (std::size_t c = 0; c < n_chunks; ++c) {
    if (sum_slot[c].empty()) continue;
    for (std::size_t i = 0; i < entries; ++i) {
      sum[i] += sum_slot[c][i];
      sq[i] += sq_slot[c][i];
    }
  }

  McTable out;
  out.mean = Table(shape);
  out.stderr_of_mean = Table(shape);
  out.samples = samples;
  const double m = static_cast<double>(samples);
  for (std::size_t i = 0; i < entries; ++i) {
    const double mean = sum[i] / m;
    out.mean.v[i] = mean;
    const double var = std::max(0.0, (sq[i] - m * mean * mean) / (m - 1.0));
    out.stderr_of_mean.v[i] = std::sqrt(var / m);
  }
  return out;
}

}  // namespace daps
