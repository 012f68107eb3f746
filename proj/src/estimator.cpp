#include "daps/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

#include "daps/errors.hpp"
#include "daps/parallel.hpp"
#include "daps/rng.hpp"

namespace daps {

namespace {

double combine(double sigma, double eps) { return std::sqrt(sigma * sigma + eps * eps); }

/// Canonical (sorted-tuple) group index for permutation symmetrization.
std::vector<std::size_t> canonical_index(const TableShape& shape) {
  std::vector<std::size_t> canon(shape.entries());
  std::vector<int> tuple(shape.N);
  for (std::size_t idx = 0; idx < canon.size(); ++idx) {
    shape.decode(idx, tuple);
    std::vector<int> sorted(tuple);
    std::sort(sorted.begin(), sorted.end());
    canon[idx] = shape.index(sorted);
  }
  return canon;
}

struct Moments {
  std::vector<double> first;  // avg N_i
  SymMatrix second;           // avg of the factorial cross moments (delta-sum form)
  int N = 0;
};

template <class Weight>
Moments moments_from_cells(const TableShape& shape, const std::vector<Weight>& cells,
                           double total) {
  Moments mom;
  mom.N = shape.N;
  mom.first.assign(shape.K + 1, 0.0);
  mom.second = SymMatrix(shape.K + 1);
  std::vector<int> tuple(shape.N);
  std::vector<int> mult(shape.K + 1);
  for (std::size_t idx = 0; idx < cells.size(); ++idx) {
    const double w = static_cast<double>(cells[idx]) / total;
    if (w == 0.0) continue;
    shape.decode(idx, tuple);
    std::fill(mult.begin(), mult.end(), 0);
    for (int k : tuple) ++mult[k];
    for (int i = 0; i <= shape.K; ++i) {
      if (mult[i] == 0) continue;
      mom.first[i] += mult[i] * w;
      for (int j = 0; j <= shape.K; ++j) {
        if (mult[j] == 0) continue;
        const double fac = static_cast<double>(mult[i]) * mult[j] - (i == j ? mult[i] : 0.0);
        if (fac != 0.0) mom.second.at(i, j) += fac * w;
      }
    }
  }
  return mom;
}

SymMatrix matrix_from_moments(const Moments& mom) {
  const int dim = static_cast<int>(mom.first.size());
  SymMatrix M(dim);
  const double N = mom.N;
  for (int i = 0; i < dim; ++i) {
    for (int j = 0; j < dim; ++j) {
      // group f_i * f_j first so rounding is exchange-symmetric
      const double fij = mom.first[i] * mom.first[j];
      M.at(i, j) = N * mom.second.at(i, j) - (N - 1.0) * fij;
    }
  }
  return M;
}

/// Fixed-eigenvector linearization of mu_min around the measured moments:
/// per-event functional N f_x - 2 (N-1) ybar f_y.
TupleFunctional mu_min_linearization(const std::vector<double>& v, double ybar, int N) {
  return [v, ybar, N](std::span<const int> tuple) {
    double s = 0.0, s2 = 0.0;
    for (int k : tuple) {
      s += v[k];
      s2 += v[k] * v[k];
    }
    const double fx = s * s - s2;
    return N * fx - 2.0 * (N - 1.0) * ybar * s;
  };
}

SymMatrix coincidence_matrix(const Table& sym, double total, int K) {
  SymMatrix C(K + 1);
  std::vector<int> tuple(2);
  for (std::size_t idx = 0; idx < sym.v.size(); ++idx) {
    sym.shape.decode(idx, tuple);
    C.at(tuple[0], tuple[1]) = sym.v[idx] / total;
  }
  return C;
}

}  // namespace

std::pair<Table, Table> symmetrize(const CoincidenceCounts& counts) {
  const auto canon = canonical_index(counts.shape);
  std::map<std::size_t, std::pair<double, std::uint64_t>> groups;  // sum, cell count
  for (std::size_t idx = 0; idx < counts.counts.size(); ++idx) {
    auto& g = groups[canon[idx]];
    g.first += static_cast<double>(counts.counts[idx]);
    g.second += 1;
  }
  Table sym(counts.shape), asym(counts.shape);
  for (std::size_t idx = 0; idx < counts.counts.size(); ++idx) {
    const auto& g = groups[canon[idx]];
    sym.v[idx] = g.first / static_cast<double>(g.second);
    asym.v[idx] = static_cast<double>(counts.counts[idx]) - sym.v[idx];
  }
  return {std::move(sym), std::move(asym)};
}

Table symmetric_part(const Table& table) {
  const auto canon = canonical_index(table.shape);
  std::map<std::size_t, std::pair<double, std::uint64_t>> groups;
  for (std::size_t idx = 0; idx < table.v.size(); ++idx) {
    auto& g = groups[canon[idx]];
    g.first += table.v[idx];
    g.second += 1;
  }
  Table sym(table.shape);
  for (std::size_t idx = 0; idx < table.v.size(); ++idx) {
    const auto& g = groups[canon[idx]];
    sym.v[idx] = g.first / static_cast<double>(g.second);
  }
  return sym;
}

EstimateWithError estimate(const TupleFunctional& f, const CoincidenceCounts& counts) {
  const std::uint64_t E = counts.total;
  if (E < 2) throw std::invalid_argument("estimate: need at least 2 events");

  // accumulate f-weighted counts and divide once: the unit functional then
  // gives exactly E / E = 1
  std::vector<int> tuple(counts.shape.N);
  double mean_num = 0.0, meansq_num = 0.0;
  for (std::size_t idx = 0; idx < counts.counts.size(); ++idx) {
    if (counts.counts[idx] == 0) continue;
    counts.shape.decode(idx, tuple);
    const double fv = f(tuple);
    const double c = static_cast<double>(counts.counts[idx]);
    mean_num += fv * c;
    meansq_num += fv * fv * c;
  }
  const double mean = mean_num / static_cast<double>(E);
  const double meansq = meansq_num / static_cast<double>(E);
  const double var = std::max(0.0, meansq - mean * mean);
  const double sigma = std::sqrt(var / static_cast<double>(E - 1));

  // asym already holds (E - E_sym), i.e. the half-difference for N = 2, so
  // the quadratic systematic error sums (f * asym / E)^2
  const auto [sym, asym] = symmetrize(counts);
  double eps_sq = 0.0;
  for (std::size_t idx = 0; idx < asym.v.size(); ++idx) {
    if (asym.v[idx] == 0.0) continue;
    counts.shape.decode(idx, tuple);
    const double fv = f(tuple);
    const double a = asym.v[idx] / static_cast<double>(E);
    eps_sq += fv * fv * a * a;
  }
  const double eps = std::sqrt(eps_sq);
  return {mean, sigma, eps, combine(sigma, eps), E};
}

double mean_of(const TupleFunctional& f, const Table& probs) {
  std::vector<int> tuple(probs.shape.N);
  double mean = 0.0;
  for (std::size_t idx = 0; idx < probs.v.size(); ++idx) {
    if (probs.v[idx] == 0.0) continue;
    probs.shape.decode(idx, tuple);
    mean += f(tuple) * probs.v[idx];
  }
  return mean;
}

namespace {

TupleFunctional z_product(const ZVector& zvec, int K) {
  if (static_cast<int>(zvec.z.size()) != K + 1)
    throw std::invalid_argument("generating_function: Z length must be K+1");
  return [z = zvec.z](std::span<const int> tuple) {
    double p = 1.0;
    for (int k : tuple) p *= z[k];
    return p;
  };
}

}  // namespace

EstimateWithError generating_function(const CoincidenceCounts& counts, const ZVector& zvec) {
  return estimate(z_product(zvec, counts.shape.K), counts);
}

double generating_function(const Table& probs, const ZVector& zvec) {
  return mean_of(z_product(zvec, probs.shape.K), probs);
}

EstimateWithError daps_gz(const CoincidenceCounts& counts, double z) {
  if (!std::isfinite(z)) throw std::invalid_argument("daps_gz: z must be finite");
  return generating_function(counts, ZVector::powers(z, counts.shape.K));
}

double daps_gz(const Table& probs, double z) {
  if (!std::isfinite(z)) throw std::invalid_argument("daps_gz: z must be finite");
  return generating_function(probs, ZVector::powers(z, probs.shape.K));
}

EstimateWithError daps_gz(const SettingCounts& setting, double z) {
  if (setting.events) return daps_gz(*setting.events, z);
  if (setting.exact) return EstimateWithError::exact(daps_gz(*setting.exact, z));
  throw std::invalid_argument("daps_gz: setting holds no data");
}

SettingEigen eigen_min_setting(const SettingCounts& setting) {
  SettingEigen out;
  out.index = setting.index;
  out.beta2 = setting.beta2;

  if (setting.events) {
    const auto& counts = *setting.events;
    if (counts.shape.N != 2)
      throw std::invalid_argument("eigen_min_setting: quadratic-form reduction needs N = 2");
    if (counts.total < 2) throw std::invalid_argument("eigen_min_setting: need at least 2 events");
    const auto [sym, asym] = symmetrize(counts);
    const auto eig = symmetric_eigen_min(
        coincidence_matrix(sym, static_cast<double>(counts.total), counts.shape.K));
    out.zvec = eig.vector;
    out.est = estimate(
        [&v = out.zvec](std::span<const int> t) { return v[t[0]] * v[t[1]]; }, counts);
    return out;
  }
  if (setting.exact) {
    const auto& probs = *setting.exact;
    if (probs.shape.N != 2)
      throw std::invalid_argument("eigen_min_setting: quadratic-form reduction needs N = 2");
    const auto eig = symmetric_eigen_min(coincidence_matrix(symmetric_part(probs), 1.0, probs.shape.K));
    out.zvec = eig.vector;
    out.est = EstimateWithError::exact(eig.value);
    return out;
  }
  throw std::invalid_argument("eigen_min_setting: setting holds no data");
}

GminScan g_min_scan(std::span<const SettingCounts> scan) {
  if (scan.empty()) throw std::invalid_argument("g_min_scan: empty scan");
  GminScan out;
  out.settings.reserve(scan.size());
  for (const auto& s : scan) out.settings.push_back(eigen_min_setting(s));
  out.argmin = 0;
  for (std::size_t i = 1; i < out.settings.size(); ++i) {
    if (out.settings[i].est.mean < out.settings[out.argmin].est.mean) out.argmin = i;
  }
  return out;
}

MultinomialMatrix multinomial_test(const CoincidenceCounts& counts) {
  if (counts.total < 2) throw std::invalid_argument("multinomial_test: need at least 2 events");
  const auto mom =
      moments_from_cells(counts.shape, counts.counts, static_cast<double>(counts.total));
  MultinomialMatrix out;
  out.M = matrix_from_moments(mom);
  const auto eig = symmetric_eigen_min(out.M);
  out.eigenvector = eig.vector;

  double ybar = 0.0;
  for (std::size_t i = 0; i < mom.first.size(); ++i) ybar += eig.vector[i] * mom.first[i];
  const auto lin = estimate(mu_min_linearization(eig.vector, ybar, counts.shape.N), counts);
  out.mu_min = {eig.value, lin.sigma, lin.eps, combine(lin.sigma, lin.eps), counts.total};
  return out;
}

MultinomialMatrix multinomial_test(const Table& probs) {
  const auto mom = moments_from_cells(probs.shape, probs.v, probs.sum());
  MultinomialMatrix out;
  out.M = matrix_from_moments(mom);
  const auto eig = symmetric_eigen_min(out.M);
  out.eigenvector = eig.vector;
  out.mu_min = EstimateWithError::exact(eig.value);
  return out;
}

MultinomialMatrix multinomial_test(const SettingCounts& setting) {
  if (setting.events) return multinomial_test(*setting.events);
  if (setting.exact) return multinomial_test(*setting.exact);
  throw std::invalid_argument("multinomial_test: setting holds no data");
}

namespace {

double outcome_sum(std::span<const int> tuple) {
  double s = 0.0;
  for (int k : tuple) s += k;
  return s;
}

}  // namespace

double di_amplitude(const CoincidenceCounts& counts) {
  if (counts.total < 1) throw std::invalid_argument("di_amplitude: empty counts");
  std::vector<int> tuple(counts.shape.N);
  double di2 = 0.0;
  for (std::size_t idx = 0; idx < counts.counts.size(); ++idx) {
    if (counts.counts[idx] == 0) continue;
    counts.shape.decode(idx, tuple);
    di2 += outcome_sum(tuple) * static_cast<double>(counts.counts[idx]);
  }
  return std::sqrt(std::max(0.0, di2 / static_cast<double>(counts.total)));
}

double di_amplitude(const Table& probs) {
  return std::sqrt(std::max(0.0, mean_of(outcome_sum, probs)));
}

EstimateWithError di_intensity(const SettingCounts& setting) {
  if (setting.events) return estimate(outcome_sum, *setting.events);
  if (setting.exact) return EstimateWithError::exact(mean_of(outcome_sum, *setting.exact));
  throw std::invalid_argument("di_intensity: setting holds no data");
}

double bootstrap_eigen_sigma(const CoincidenceCounts& counts, EigenStatistic stat, int resamples,
                             std::uint64_t seed) {
  if (resamples < 2) throw std::invalid_argument("bootstrap_eigen_sigma: need >= 2 resamples");
  if (counts.total < 2) throw std::invalid_argument("bootstrap_eigen_sigma: need >= 2 events");

  std::vector<double> weights(counts.counts.size());
  for (std::size_t i = 0; i < weights.size(); ++i)
    weights[i] = static_cast<double>(counts.counts[i]);
  const AliasTable alias(weights);

  std::vector<double> values(resamples, 0.0);
  run_chunks(static_cast<std::size_t>(resamples), Exec::parallel, [&](std::size_t r) {
    Rng rng(mix_seed(seed, 0xb007e7ULL, static_cast<std::uint64_t>(r)));
    CoincidenceCounts re(counts.shape);
    for (std::uint64_t t = 0; t < counts.total; ++t) ++re.counts[alias.sample(rng)];
    re.total = counts.total;
    if (stat == EigenStatistic::lambda_min) {
      const auto sym = symmetrize(re).first;
      values[r] =
          symmetric_eigen_min(coincidence_matrix(sym, static_cast<double>(re.total), re.shape.K))
              .value;
    } else {
      const auto mom = moments_from_cells(re.shape, re.counts, static_cast<double>(re.total));
      values[r] = symmetric_eigen_min(matrix_from_moments(mom)).value;
    }
  });

  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= resamples;
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  return std::sqrt(var / (resamples - 1));
}

}  // namespace daps
