#include <doctest.h>

#include <cmath>

#include "daps/analysis.hpp"
#include "daps/errors.hpp"
#include "daps/simulator.hpp"
#include "oracles.hpp"

using namespace daps;

namespace {

MultiplexConfig exact_cfg(double t2, const DetectorSpec& det, int n_max) {
  MultiplexConfig cfg;
  cfg.S = 1;
  cfg.frontend = FrontendConfig::from_t2(t2, n_max);
  cfg.detector = response_matrix_of(det, n_max);
  return cfg;
}

struct ScanViews {
  ScanDataset ds;
  std::vector<SettingCounts> signal;
  std::vector<SettingCounts> vacuum;
};

ScanViews make_scan(const StateSpec& state, const MultiplexConfig& cfg,
                    const std::vector<double>& grid, std::uint64_t trials, std::uint64_t seed) {
  ScanViews out;
  out.ds = scan_experiment(state, cfg, grid, trials, seed);
  out.signal = setting_views(out.ds.signal, true);
  out.vacuum = setting_views(out.ds.vacuum, true);
  return out;
}

std::vector<double> linspace_b2(double hi, int n) {
  std::vector<double> grid;
  for (int i = 0; i < n; ++i) grid.push_back(hi * i / (n - 1));
  return grid;
}

}  // namespace

TEST_CASE("fit_vacuum: exact synthetic Gaussian is recovered") {
  RadialCurve curve;
  curve.var = RadialVariable::di_intensity;
  for (int i = 0; i < 12; ++i) {
    RadialPoint p;
    p.setting = i;
    p.x = 0.4 * i;
    p.y = EstimateWithError::exact(0.7 * std::exp(-0.8 * p.x));
    curve.points.push_back(p);
  }
  const auto model = fit_vacuum(curve);
  CHECK(model.f[0] == doctest::Approx(0.7).epsilon(1e-8));
  CHECK(model.b == doctest::Approx(0.8).epsilon(1e-8));
  CHECK(model.residual < 1e-10);
}

TEST_CASE("fit_vacuum: exact pipeline gives b = 1 - z in the DI variable") {
  const int n_max = 60;
  const double z = -1.5;
  const auto cfg = exact_cfg(0.9, DetectorSpec{"photoelectric", 0.9, 0.0, n_max}, n_max);
  const auto scan = make_scan(StateSpec::vacuum(), cfg, linspace_b2(20.0, 15), 0, 1);
  const auto curve = make_gz_curve(scan.vacuum, scan.vacuum, z, RadialVariable::di_intensity);
  const auto model = fit_vacuum(curve);
  CHECK(model.b == doctest::Approx(1.0 - z).epsilon(1e-6));
  CHECK(model.f[0] == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("fit_vacuum: sampled scan recovers parameters within errors") {
  const int n_max = 60;
  const double z = -1.5;
  const auto cfg = exact_cfg(0.9, DetectorSpec{"photoelectric", 0.9, 0.0, n_max}, n_max);
  const auto scan = make_scan(StateSpec::vacuum(), cfg, linspace_b2(12.0, 13), 100000, 5);
  const auto curve = make_gz_curve(scan.vacuum, scan.vacuum, z, RadialVariable::di_intensity);
  const auto model = fit_vacuum(curve);
  REQUIRE(model.sigma.size() == 2);
  CHECK(std::abs(model.f[0] - 1.0) < 3.0 * model.sigma[0] + 1e-3);
  CHECK(std::abs(model.b - 2.5) < 3.0 * model.sigma[1] + 1e-2);
}

TEST_CASE("fit preconditions") {
  RadialCurve tiny;
  tiny.var = RadialVariable::di_intensity;
  for (int i = 0; i < 2; ++i) {
    RadialPoint p;
    p.x = i;
    p.y = EstimateWithError::exact(1.0);
    tiny.points.push_back(p);
  }
  CHECK_THROWS_AS(fit_vacuum(tiny), std::invalid_argument);

  RadialCurve nonpos;
  nonpos.var = RadialVariable::di_intensity;
  for (int i = 0; i < 5; ++i) {
    RadialPoint p;
    p.x = i;
    p.y = EstimateWithError::exact(-0.1);
    nonpos.points.push_back(p);
  }
  CHECK_THROWS_AS(fit_vacuum(nonpos), std::invalid_argument);
}

TEST_CASE("predict_fock: identity at m = 0 and the m = 1 bracket") {
  GaussPolyModel vac;
  vac.b = 2.5;
  vac.f = {0.9};
  const auto same = predict_fock(0, vac, 9.0, 0.09);
  CHECK(same.b == vac.b);
  CHECK(same.f[0] == doctest::Approx(0.9).epsilon(1e-14));

  const double q = 9.0, s = 0.09;
  const auto one = predict_fock(1, vac, q, s);
  const double a = q * vac.b * s;
  // f0 (1 - A + A b x) e^{-bx}
  CHECK(one.f[0] == doctest::Approx(0.9 * (1.0 - a)).epsilon(1e-12));
  CHECK(one.f[1] == doctest::Approx(0.9 * a * vac.b).epsilon(1e-12));

  GaussPolyModel not_gauss;
  not_gauss.b = 1.0;
  not_gauss.f = {1.0, 0.5};
  CHECK_THROWS_AS(predict_fock(1, not_gauss, q, s), std::invalid_argument);
}

TEST_CASE("predict_fock agrees with the finite-difference Laguerre oracle") {
  // G_m(u) = sum_j C(m,j)/j! q^j d^j d*^j e^{-c u}; the oracle builds the
  // derivatives by central differences
  GaussPolyModel vac;
  vac.f = {1.0};
  for (int rep = 0; rep < 6; ++rep) {
    const double c = 0.4 + 0.4 * rep;   // raw-variable decay
    const double u = 0.15 + 0.35 * rep; // |beta|^2
    vac.b = c;
    for (int m : {1, 2, 3}) {
      double expected = 0.0;
      double cmj = 1.0;
      double q = 7.3;
      double qj = 1.0, jfact = 1.0;
      for (int j = 0; j <= m; ++j) {
        expected += cmj * qj / jfact * oracles::fd_laguerre_derivative(c, u, j);
        cmj = cmj * (m - j) / (j + 1.0);
        qj *= q;
        jfact *= j + 1.0;
      }
      const auto model = predict_fock(m, vac, q, 1.0);
      CHECK(model.value(u) == doctest::Approx(expected).epsilon(1e-6));
    }
  }
}

TEST_CASE("predict_convolution: vacuum identity and thermal against the exact pipeline") {
  const int n_max = 70;
  const double z = -1.5;
  const auto cfg = exact_cfg(0.9, DetectorSpec{"photoelectric", 0.9, 0.0, n_max}, n_max);
  const auto vac_scan = make_scan(StateSpec::vacuum(), cfg, linspace_b2(16.0, 15), 0, 1);
  const auto vac_curve =
      make_gz_curve(vac_scan.vacuum, vac_scan.vacuum, z, RadialVariable::di_intensity);
  const auto vac_model = fit_vacuum(vac_curve);
  const auto cal = di_calibration(vac_scan.vacuum);
  const double q = 9.0;

  std::vector<double> xs;
  for (const auto& p : vac_curve.points) xs.push_back(p.x);

  // vacuum spec: identity map
  const auto ident = predict_convolution(StateSpec::vacuum(), vac_model, q, cal.slope, xs);
  for (std::size_t i = 0; i < xs.size(); ++i)
    CHECK(ident.points[i].y.mean == doctest::Approx(vac_model.value(xs[i])).epsilon(1e-12));

  // thermal state: quadrature against the exact pipeline
  const auto th_scan = make_scan(StateSpec::thermal(0.6), cfg, linspace_b2(16.0, 15), 0, 1);
  const auto th_curve =
      make_gz_curve(th_scan.signal, th_scan.vacuum, z, RadialVariable::di_intensity);
  const auto pred = predict_convolution(StateSpec::thermal(0.6), vac_model, q, cal.slope, xs);
  for (std::size_t i = 0; i < xs.size(); ++i)
    CHECK(pred.points[i].y.mean == doctest::Approx(th_curve.points[i].y.mean).epsilon(1e-6));

  // phase-averaged coherent ring against the exact pipeline
  const auto ring = StateSpec::coherent(Complex{0.9, 0.0}, true);
  const auto ring_scan = make_scan(ring, cfg, linspace_b2(16.0, 15), 0, 1);
  const auto ring_curve =
      make_gz_curve(ring_scan.signal, ring_scan.vacuum, z, RadialVariable::di_intensity);
  const auto ring_pred = predict_convolution(ring, vac_model, q, cal.slope, xs);
  for (std::size_t i = 0; i < xs.size(); ++i)
    CHECK(ring_pred.points[i].y.mean == doctest::Approx(ring_curve.points[i].y.mean).epsilon(1e-6));

  // fixed-phase coherent states are not radial
  CHECK_THROWS_AS(
      predict_convolution(StateSpec::coherent(Complex{0.5, 0.0}), vac_model, q, cal.slope, xs),
      std::invalid_argument);

  // Fock routing reproduces predict_fock
  const auto fock_pred = predict_convolution(StateSpec::fock(2), vac_model, q, cal.slope, xs);
  const auto direct = predict_fock(2, vac_model, q, cal.slope);
  for (std::size_t i = 0; i < xs.size(); ++i)
    CHECK(fock_pred.points[i].y.mean == doctest::Approx(direct.value(xs[i])).epsilon(1e-10));
}

TEST_CASE("fit_heralded: exact fock curves recover the predicted coefficients") {
  const int n_max = 60;
  const double z = -1.5;
  const auto cfg = exact_cfg(0.9, DetectorSpec{"photoelectric", 0.9, 0.0, n_max}, n_max);
  const auto grid = linspace_b2(16.0, 17);

  const auto vac_scan = make_scan(StateSpec::vacuum(), cfg, grid, 0, 1);
  const auto vac_curve =
      make_gz_curve(vac_scan.vacuum, vac_scan.vacuum, z, RadialVariable::di_intensity);
  const auto vac_model = fit_vacuum(vac_curve);
  const auto cal = di_calibration(vac_scan.vacuum);

  const auto f1_scan = make_scan(StateSpec::fock(1), cfg, grid, 0, 1);
  const auto f1_curve =
      make_gz_curve(f1_scan.signal, f1_scan.vacuum, z, RadialVariable::di_intensity);
  const auto fitted = fit_heralded(f1_curve, 1, HeraldedFitOptions{vac_model.b, true});
  const auto predicted = predict_fock(1, vac_model, 9.0, cal.slope);
  CHECK(fitted.f[0] == doctest::Approx(predicted.f[0]).epsilon(1e-6));
  CHECK(fitted.f[1] == doctest::Approx(predicted.f[1]).epsilon(1e-6));

  // k_h = 0 reduces to the vacuum fit
  const auto again = fit_heralded(vac_curve, 0, HeraldedFitOptions{1.0, false});
  CHECK(again.b == doctest::Approx(vac_model.b).epsilon(1e-8));
  CHECK(again.f[0] == doctest::Approx(vac_model.f[0]).epsilon(1e-8));

  // fock(2): peak at the origin plus a sign-changing dip
  const auto f2_scan = make_scan(StateSpec::fock(2), cfg, grid, 0, 1);
  const auto f2_curve =
      make_gz_curve(f2_scan.signal, f2_scan.vacuum, z, RadialVariable::di_intensity);
  const auto f2 = fit_heralded(f2_curve, 2, HeraldedFitOptions{vac_model.b, true});
  CHECK(f2.value(0.0) > 0.0);
  double min_val = 1e9;
  for (const auto& p : f2_curve.points) min_val = std::min(min_val, f2.value(p.x));
  CHECK(min_val < -1e-3);
}

TEST_CASE("optimal_z: classical data raises the nonnegative flag") {
  const int n_max = 40;
  const auto cfg = exact_cfg(0.9, DetectorSpec{"tes", 0.9, 0.01, 4}, n_max);
  const auto scan = make_scan(StateSpec::coherent(Complex{0.8, 0.0}), cfg,
                              std::vector<double>{0.0, 1.0}, 200000, 11);
  const auto best = optimal_z(scan.signal);
  CHECK(!best.negative);
}

TEST_CASE("optimal_z: lossy heralded photon shifts z* down with efficiency") {
  // the interior optimum needs the finite-K detector and an impure state;
  // a pure photon on an ideal counter pushes z* to the grid edge
  const auto herald = tes_response(0.9, 0.01, 4, 40);
  const auto [state, prob] = heralded_pdc_state(0.3, 0.4, herald, 1);
  std::vector<double> zstars;
  for (double eta : {0.9, 0.7, 0.5}) {
    const auto cfg = exact_cfg(0.9, DetectorSpec{"tes", eta, 0.01, 4}, 40);
    const auto scan = make_scan(state, cfg, std::vector<double>{0.0}, 2000000, 123);
    const auto best = optimal_z(scan.signal);
    CHECK(best.negative);
    CHECK(best.significance > 5.0);
    zstars.push_back(best.z);
  }
  CHECK(zstars[0] > zstars[1]);
  CHECK(zstars[1] > zstars[2]);
}

TEST_CASE("discrimination: diagonal depends only on the setting count") {
  RadialCurve a;
  a.var = RadialVariable::di_intensity;
  for (int i = 0; i < 29; ++i) {
    RadialPoint p;
    p.setting = i;
    p.x = i;
    p.y = {0.5 * std::exp(-0.1 * i), 0.01, 0.002, std::sqrt(0.01 * 0.01 + 0.002 * 0.002), 1000};
    a.points.push_back(p);
  }
  const std::vector<RadialCurve> curves{a, a};
  const auto m = discrimination_matrix(curves);
  const double phi3 = normal_cdf(3.0) - normal_cdf(-3.0);
  const double expected = 1.0 - std::pow(phi3, 29);
  CHECK(m.at(0, 0) == doctest::Approx(expected).epsilon(1e-12));
  CHECK(m.at(1, 1) == doctest::Approx(expected).epsilon(1e-12));
  CHECK(std::abs(expected - 0.0754) < 1e-3);

  // far-separated curves discriminate with certainty
  RadialCurve b = a;
  for (auto& p : b.points) p.y.mean += 1.0;
  const std::vector<RadialCurve> apart{a, b};
  const auto m2 = discrimination_matrix(apart);
  CHECK(m2.at(0, 1) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(m2.at(0, 1) == m2.at(1, 0));

  RadialCurve shorter = a;
  shorter.points.pop_back();
  const std::vector<RadialCurve> bad{a, shorter};
  CHECK_THROWS_AS(discrimination_matrix(bad), std::invalid_argument);
}

TEST_CASE("end to end: heralded scan agrees with its vacuum-based prediction") {
  const int n_max = 40;
  const double z = -1.5;
  const auto cfg = exact_cfg(0.9, DetectorSpec{"tes", 0.9, 0.01, 4}, n_max);
  const auto herald = tes_response(0.9, 0.01, 4, 40);
  const auto [state, prob] = heralded_pdc_state(0.3, 0.4, herald, 1);

  // moderate statistics: the Gaussian vacuum fit is only approximate for a
  // nonlinear TES, so very large E would resolve the model error
  const auto grid = linspace_b2(10.0, 21);
  const auto scan = make_scan(state, cfg, grid, 30000, 31);

  const auto vac_curve = make_gz_curve(scan.vacuum, scan.vacuum, z, RadialVariable::di_intensity);
  const auto vac_model = fit_vacuum(vac_curve);
  const auto cal = di_calibration(scan.vacuum);
  const auto direct = make_gz_curve(scan.signal, scan.vacuum, z, RadialVariable::di_intensity);

  std::vector<double> xs;
  for (const auto& p : direct.points) xs.push_back(p.x);
  const auto pred = predict_convolution(state, vac_model, 9.0, cal.slope, xs);

  int within = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double delta = std::sqrt(direct.points[i].y.delta * direct.points[i].y.delta +
                                   pred.points[i].y.delta * pred.points[i].y.delta);
    if (std::abs(pred.points[i].y.mean - direct.points[i].y.mean) <= 3.0 * delta) ++within;
  }
  CHECK(within >= static_cast<int>(std::ceil(0.95 * static_cast<double>(xs.size()))));
}
