#include <doctest.h>

#include <cmath>

#include "daps/errors.hpp"
#include "daps/estimator.hpp"
#include "daps/simulator.hpp"
#include "oracles.hpp"

using namespace daps;

namespace {

CoincidenceCounts counts2(int K, std::initializer_list<std::pair<std::pair<int, int>, std::uint64_t>> cells) {
  CoincidenceCounts c(TableShape{2, K});
  for (const auto& [tk, v] : cells) {
    c.counts[c.shape.index(std::vector<int>{tk.first, tk.second})] = v;
    c.total += v;
  }
  return c;
}

Table exact_fock1_table(double eta, int K) {
  FockDistribution one;
  one.n_max = K;
  one.probs.assign(K + 1, 0.0);
  one.probs[1] = 1.0;
  const auto det = photoelectric_response(eta, K, K);
  return click_statistics_exact(one, det, 2);
}

MultiplexConfig exact_cfg(double t2, const DetectorSpec& det, int n_max) {
  MultiplexConfig cfg;
  cfg.S = 1;
  cfg.frontend = FrontendConfig::from_t2(t2, n_max);
  cfg.detector = response_matrix_of(det, n_max);
  return cfg;
}

}  // namespace

TEST_CASE("symmetrize: decomposition arithmetic") {
  const auto c = counts2(1, {{{0, 1}, 3}, {{1, 0}, 1}});
  const auto [sym, asym] = symmetrize(c);
  const auto at = [&](const Table& t, int a, int b) {
    return t.v[t.shape.index(std::vector<int>{a, b})];
  };
  CHECK(at(sym, 0, 1) == 2.0);
  CHECK(at(sym, 1, 0) == 2.0);
  CHECK(at(asym, 0, 1) == 1.0);
  CHECK(at(asym, 1, 0) == -1.0);
  // sum reconstructs the input exactly
  for (std::size_t i = 0; i < c.counts.size(); ++i)
    CHECK(sym.v[i] + asym.v[i] == static_cast<double>(c.counts[i]));

  const auto symmetric_input = counts2(1, {{{0, 1}, 5}, {{1, 0}, 5}, {{0, 0}, 2}});
  const auto parts = symmetrize(symmetric_input);
  for (double v : parts.second.v) CHECK(v == 0.0);
}

TEST_CASE("estimate: hand-checked systematic error") {
  const auto c = counts2(1, {{{0, 1}, 3}, {{1, 0}, 1}});
  const auto unit = estimate([](std::span<const int>) { return 1.0; }, c);
  CHECK(unit.mean == 1.0);
  CHECK(unit.sigma == 0.0);
  CHECK(unit.eps == std::sqrt(0.125));
  CHECK(unit.delta == std::sqrt(unit.sigma * unit.sigma + unit.eps * unit.eps));

  const auto sym = counts2(1, {{{0, 1}, 4}, {{1, 0}, 4}});
  CHECK(estimate([](std::span<const int>) { return 1.0; }, sym).eps == 0.0);

  const auto tiny = counts2(1, {{{0, 0}, 1}});
  CHECK_THROWS_AS(estimate([](std::span<const int>) { return 1.0; }, tiny),
                  std::invalid_argument);
}

TEST_CASE("generating function: normalization and dimension checks") {
  const auto c = counts2(2, {{{0, 1}, 10}, {{1, 0}, 12}, {{2, 2}, 5}});
  const auto ones = generating_function(c, ZVector::ones(2));
  CHECK(ones.mean == 1.0);
  CHECK(ones.sigma == 0.0);
  CHECK_THROWS_AS(generating_function(c, ZVector::ones(3)), std::invalid_argument);
}

TEST_CASE("generating function: exact single photon optimum is -1/2") {
  const auto table = exact_fock1_table(1.0, 3);
  const double inv = 1.0 / std::sqrt(2.0);
  ZVector z{{inv, -inv, 0.0, 0.0}};
  CHECK(generating_function(table, z) == doctest::Approx(-0.5).epsilon(1e-14));

  SettingCounts view;
  view.exact = &table;
  const auto eig = eigen_min_setting(view);
  CHECK(eig.est.mean == doctest::Approx(-0.5).epsilon(1e-12));
  CHECK(eig.zvec[0] == doctest::Approx(inv).epsilon(1e-10));
  CHECK(eig.zvec[1] == doctest::Approx(-inv).epsilon(1e-10));
}

TEST_CASE("daps_gz: z = 1 is exactly 1; fock closed form") {
  const auto table = exact_fock1_table(0.8, 6);
  CHECK(daps_gz(table, 1.0) == doctest::Approx(1.0).epsilon(1e-14));

  // exact pipeline for fock(m) through a t2 splitter: (1 - (1-z) eta t2)^m
  const int n_max = 12;
  const double eta = 0.8, t2 = 0.9;
  const auto cfg = exact_cfg(t2, DetectorSpec{"photoelectric", eta, 0.0, n_max}, n_max);
  for (int m : {1, 2, 3}) {
    const auto dist = frontend_distribution(StateSpec::fock(m), cfg.frontend, Complex{0.0});
    const auto table_m = click_statistics_exact(dist, cfg);
    for (double z : {-1.5, -0.3, 0.5}) {
      const double expected = std::pow(1.0 - (1.0 - z) * eta * t2, m);
      CHECK(daps_gz(table_m, z) == doctest::Approx(expected).epsilon(1e-10));
    }
  }
}

TEST_CASE("daps_gz: coherent state reproduces the photocounting form") {
  const int n_max = 40;
  const double eta = 0.85, t2 = 0.9;
  const auto cfg = exact_cfg(t2, DetectorSpec{"photoelectric", eta, 0.0, n_max}, n_max);
  const Complex alpha{0.9, 0.4};
  for (double b2 : {0.0, 1.0, 4.0}) {
    const Complex beta{std::sqrt(b2), 0.0};
    const auto dist = frontend_distribution(StateSpec::coherent(alpha), cfg.frontend, beta);
    const auto table = click_statistics_exact(dist, cfg);
    for (double z : {-1.5, 0.0, 0.5}) {
      const double expected = std::exp(-(1.0 - z) * eta * std::norm(cfg.frontend.t * alpha -
                                                                    cfg.frontend.r * beta));
      CHECK(daps_gz(table, z) == doctest::Approx(expected).epsilon(1e-9));
    }
  }
}

TEST_CASE("g_min_scan: classical states stay nonnegative, single photon does not") {
  const int n_max = 95;  // thermal(2) tails need a deep truncation
  const auto cfg = exact_cfg(0.9, DetectorSpec{"tes", 0.9, 0.01, 4}, n_max);

  std::vector<double> grid{0.0, 1.0, 4.0, 9.0};
  for (const auto& state :
       {StateSpec::coherent(Complex{1.0, 0.0}), StateSpec::thermal(0.5), StateSpec::thermal(2.0),
        StateSpec::coherent(Complex{1.3, 0.0}, true)}) {
    std::vector<Table> tables;
    std::vector<SettingCounts> views;
    for (double b2 : grid) {
      const auto dist = frontend_distribution(state, cfg.frontend, Complex{std::sqrt(b2), 0.0});
      tables.push_back(click_statistics_exact(dist, cfg));
    }
    for (std::size_t i = 0; i < tables.size(); ++i) {
      SettingCounts v;
      v.index = static_cast<int>(i);
      v.beta2 = grid[i];
      v.exact = &tables[i];
      views.push_back(v);
    }
    const auto scan = g_min_scan(views);
    for (const auto& s : scan.settings) CHECK(s.est.mean >= -1e-12);

    const auto mu = multinomial_test(*views[0].exact);
    CHECK(mu.mu_min.mean >= -1e-12);
  }

  // exact single photon: lambda_min = -1/2 at beta = 0 with eta = 1
  const auto table = exact_fock1_table(1.0, 4);
  SettingCounts v;
  v.exact = &table;
  std::vector<SettingCounts> views{v};
  const auto scan = g_min_scan(views);
  CHECK(scan.best().est.mean == doctest::Approx(-0.5).epsilon(1e-12));
  CHECK_THROWS_AS(g_min_scan(std::span<const SettingCounts>{}), std::invalid_argument);
}

TEST_CASE("g_min is invariant under detector relabeling") {
  const auto c = counts2(2, {{{0, 0}, 50}, {{0, 1}, 30}, {{1, 0}, 28}, {{1, 1}, 12}, {{2, 1}, 7}});
  SettingCounts view;
  view.events = &c;
  const auto base = eigen_min_setting(view);

  // swap outcome labels 0 <-> 2
  CoincidenceCounts swapped(c.shape);
  swapped.total = c.total;
  std::vector<int> tuple(2);
  for (std::size_t i = 0; i < c.counts.size(); ++i) {
    c.shape.decode(i, tuple);
    for (auto& k : tuple) k = k == 0 ? 2 : (k == 2 ? 0 : k);
    swapped.counts[c.shape.index(tuple)] = c.counts[i];
  }
  SettingCounts view2;
  view2.events = &swapped;
  const auto relabeled = eigen_min_setting(view2);
  CHECK(base.est.mean == doctest::Approx(relabeled.est.mean).epsilon(1e-12));
  CHECK(base.est.sigma == doctest::Approx(relabeled.est.sigma).epsilon(1e-12));
}

TEST_CASE("multinomial test: coherent factorization, single-photon negativity") {
  const int n_max = 30;
  const auto cfg = exact_cfg(0.9, DetectorSpec{"photoelectric", 0.85, 0.0, n_max}, n_max);
  const auto dist =
      frontend_distribution(StateSpec::coherent(Complex{1.1, 0.0}), cfg.frontend, Complex{0.7, 0.0});
  const auto coh = multinomial_test(click_statistics_exact(dist, cfg));
  for (double m : coh.M.a) CHECK(std::abs(m) < 1e-12);
  CHECK(std::abs(coh.mu_min.mean) < 1e-12);

  const auto fock = multinomial_test(exact_fock1_table(1.0, 4));
  CHECK(fock.mu_min.mean < -1e-6);

  const auto tiny = counts2(1, {{{0, 0}, 1}});
  CHECK_THROWS_AS(multinomial_test(tiny), std::invalid_argument);
}

TEST_CASE("di_amplitude: vacuum LO, photoelectric identity, TES saturation") {
  const int n_max = 60;
  const double eta = 0.9;

  // beta = 0: no light at all
  const auto cfg0 = exact_cfg(0.9, DetectorSpec{"photoelectric", eta, 0.0, n_max}, n_max);
  const auto d0 = frontend_distribution(StateSpec::vacuum(), cfg0.frontend, Complex{0.0});
  CHECK(di_amplitude(click_statistics_exact(d0, cfg0)) == 0.0);

  // photoelectric: |beta_DI| = sqrt(eta) |r| |beta| (needs K >= n_max)
  const auto cfg = exact_cfg(0.9, DetectorSpec{"photoelectric", eta, 0.0, n_max}, n_max);
  for (double b2 : {1.0, 9.0, 25.0}) {
    const auto dist = frontend_distribution(StateSpec::vacuum(), cfg.frontend, Complex{std::sqrt(b2), 0.0});
    const double di = di_amplitude(click_statistics_exact(dist, cfg));
    CHECK(di == doctest::Approx(std::sqrt(eta * 0.1 * b2)).epsilon(1e-10));
  }

  // the finite TES resolution saturates the inferred amplitude below the
  // linear-eta prediction once the per-arm flux approaches K
  const auto tes_cfg = exact_cfg(0.9, DetectorSpec{"tes", eta, 0.01, 4}, n_max);
  const double b2 = 60.0;
  const auto dist =
      frontend_distribution(StateSpec::vacuum(), tes_cfg.frontend, Complex{std::sqrt(b2), 0.0});
  const double di = di_amplitude(click_statistics_exact(dist, tes_cfg));
  CHECK(di < std::sqrt(eta * 0.1 * b2));
}

TEST_CASE("error growth of daps_gz in |z|") {
  const int n_max = 40;
  const auto cfg = exact_cfg(0.9, DetectorSpec{"tes", 0.9, 0.01, 4}, n_max);
  const auto dist = frontend_distribution(StateSpec::thermal(0.8), cfg.frontend, Complex{1.0, 0.0});
  const auto table = click_statistics_exact(dist, cfg);
  const auto counts = sample_events(table, 200000, 5);

  for (double sign : {1.0, -1.0}) {
    double last = -1.0;
    for (double mag = 1.0; mag <= 4.01; mag += 0.5) {
      const auto est = daps_gz(counts, sign * mag);
      CHECK(est.delta >= last - 1e-12);
      last = est.delta;
    }
  }
}

TEST_CASE("eigen minimum matches brute force on sampled counts") {
  const int n_max = 40;
  const auto cfg = exact_cfg(0.9, DetectorSpec{"tes", 0.9, 0.01, 4}, n_max);
  const auto dist = frontend_distribution(StateSpec::thermal(1.1), cfg.frontend, Complex{1.3, 0.0});
  const auto counts = sample_events(click_statistics_exact(dist, cfg), 100000, 9);

  SettingCounts view;
  view.events = &counts;
  const auto eig = eigen_min_setting(view);

  const auto sym = symmetrize(counts).first;
  SymMatrix c(counts.shape.K + 1);
  std::vector<int> tuple(2);
  for (std::size_t i = 0; i < sym.v.size(); ++i) {
    sym.shape.decode(i, tuple);
    c.at(tuple[0], tuple[1]) = sym.v[i] / static_cast<double>(counts.total);
  }
  const double brute = oracles::brute_force_min_quadratic(c, 10000, 123);
  CHECK(eig.est.mean == doctest::Approx(brute).epsilon(1e-6));
}

TEST_CASE("estimator generalizes to N = 4 via permutation symmetrization") {
  // coherent input: arms are independent, so the multinomial matrix vanishes
  // and the total-probability functional is exact for any N
  const int n_max = 24;
  FockDistribution dist;
  dist.n_max = n_max;
  dist.probs.assign(n_max + 1, 0.0);
  double mean = 1.6, term = std::exp(-mean), sum = 0.0;
  for (int n = 0; n <= n_max; ++n) {
    dist.probs[n] = term;
    sum += term;
    term *= mean / (n + 1);
  }
  for (auto& p : dist.probs) p /= sum;

  const auto det = photoelectric_response(0.8, 3, n_max);
  const auto table = click_statistics_exact(dist, det, 4);
  const auto mu_exact = multinomial_test(table);
  CHECK(std::abs(mu_exact.mu_min.mean) < 1e-10);

  const auto counts = sample_events(table, 100000, 3);
  const auto ones = generating_function(counts, ZVector::ones(3));
  CHECK(ones.mean == 1.0);
  CHECK(ones.sigma == 0.0);

  const auto [sym, asym] = symmetrize(counts);
  for (std::size_t i = 0; i < sym.v.size(); ++i)
    CHECK(sym.v[i] + asym.v[i] == static_cast<double>(counts.counts[i]));

  const double di = di_amplitude(counts);
  CHECK(di >= 0.0);
  CHECK(di <= std::sqrt(4.0 * 3.0));

  // the quadratic-form eigen reduction is an N = 2 contract
  SettingCounts view;
  view.events = &counts;
  CHECK_THROWS_AS(eigen_min_setting(view), std::invalid_argument);
}

TEST_CASE("bootstrap sigma is comparable to propagated sigma") {
  const int n_max = 30;
  const auto cfg = exact_cfg(0.9, DetectorSpec{"photoelectric", 0.9, 0.0, 4}, n_max);
  const auto dist =
      frontend_distribution(StateSpec::coherent(Complex{1.0, 0.0}), cfg.frontend, Complex{0.5, 0.0});
  const auto counts = sample_events(click_statistics_exact(dist, cfg), 50000, 21);

  SettingCounts view;
  view.events = &counts;
  const auto eig = eigen_min_setting(view);
  const double boot = bootstrap_eigen_sigma(counts, EigenStatistic::lambda_min, 200, 77);
  CHECK(boot > 0.0);
  CHECK(boot < 10.0 * std::max(eig.est.delta, 1e-12));
  CHECK(boot > 0.1 * eig.est.sigma);
  // counter-based resample seeds: replays are exact
  CHECK(boot == bootstrap_eigen_sigma(counts, EigenStatistic::lambda_min, 200, 77));
}
