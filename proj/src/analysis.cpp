#include "daps/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "daps/errors.hpp"

namespace daps {

namespace {

constexpr double kStepTol = 1e-10;
constexpr int kMaxIter = 100;

struct FitData {
  std::vector<double> x, y, w;
};

FitData weighted_data(const RadialCurve& curve) {
  FitData d;
  double dmax = 0.0, ymax = 0.0;
  for (const auto& p : curve.points) {
    dmax = std::max(dmax, p.y.delta);
    ymax = std::max(ymax, std::abs(p.y.mean));
  }
  // exact curves (all delta = 0) fall back to uniform weights; the tiny
  // floor keeps isolated delta = 0 points from dominating a sampled fit
  const double floor_sq = (1e-9 * (ymax + 1.0)) * (1e-9 * (ymax + 1.0));
  for (const auto& p : curve.points) {
    d.x.push_back(p.x);
    d.y.push_back(p.y.mean);
    d.w.push_back(1.0 / (p.y.delta * p.y.delta + floor_sq));
  }
  return d;
}

double model_value(std::span<const double> f, double b, double x) {
  double poly = 0.0;
  double xp = 1.0;
  for (double fj : f) {
    poly += fj * xp;
    xp *= x;
  }
  return poly * std::exp(-b * x);
}

double weighted_sse(const FitData& d, std::span<const double> f, double b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < d.x.size(); ++i) {
    const double r = d.y[i] - model_value(f, b, d.x[i]);
    acc += d.w[i] * r * r;
  }
  return acc;
}

/// Weighted Gauss-Newton on sum_j f_j x^j exp(-bx); b optionally frozen.
GaussPolyModel gauss_newton_fit(const FitData& d, int degree, double b_init, bool fit_b,
                                bool have_real_errors) {
  const int nf = degree + 1;
  const int np = nf + (fit_b ? 1 : 0);
  const int n = static_cast<int>(d.x.size());
  if (n < np + 1) throw std::invalid_argument("fit: not enough points for the model degree");

  std::vector<double> f(nf, 0.0);
  double b = b_init;

  // given b, the f_j solve a weighted linear system; use that for the start
  auto solve_f_given_b = [&]() {
    std::vector<double> ata(static_cast<std::size_t>(nf) * nf, 0.0), atb(nf, 0.0);
    for (int i = 0; i < n; ++i) {
      const double e = std::exp(-b * d.x[i]);
      double xp = 1.0;
      std::vector<double> row(nf);
      for (int j = 0; j < nf; ++j) {
        row[j] = xp * e;
        xp *= d.x[i];
      }
      for (int j = 0; j < nf; ++j) {
        atb[j] += d.w[i] * row[j] * d.y[i];
        for (int k = 0; k < nf; ++k) ata[static_cast<std::size_t>(j) * nf + k] += d.w[i] * row[j] * row[k];
      }
    }
    f = solve_linear(ata, atb, nf);
  };
  solve_f_given_b();

  bool converged = false;
  for (int it = 0; it < kMaxIter; ++it) {
    std::vector<double> jtj(static_cast<std::size_t>(np) * np, 0.0), jtr(np, 0.0);
    for (int i = 0; i < n; ++i) {
      const double e = std::exp(-b * d.x[i]);
      const double val = model_value(f, b, d.x[i]);
      const double r = d.y[i] - val;
      std::vector<double> row(np);
      double xp = 1.0;
      for (int j = 0; j < nf; ++j) {
        row[j] = xp * e;
        xp *= d.x[i];
      }
      if (fit_b) row[nf] = -d.x[i] * val;
      for (int j = 0; j < np; ++j) {
        jtr[j] += d.w[i] * row[j] * r;
        for (int k = 0; k < np; ++k) jtj[static_cast<std::size_t>(j) * np + k] += d.w[i] * row[j] * row[k];
      }
    }
    std::vector<double> step = solve_linear(jtj, jtr, np);

    double norm = 0.0;
    for (double s : step) norm += s * s;
    norm = std::sqrt(norm);

    // plain GN step with backtracking to keep b positive and SSE nonincreasing
    const double sse0 = weighted_sse(d, f, b);
    double scale = 1.0;
    for (int back = 0; back < 30; ++back) {
      std::vector<double> f_try(f);
      double b_try = b;
      for (int j = 0; j < nf; ++j) f_try[j] += scale * step[j];
      if (fit_b) b_try += scale * step[nf];
      if (b_try > 0.0 && weighted_sse(d, f_try, b_try) <= sse0 * (1.0 + 1e-14) + 1e-300) {
        f = std::move(f_try);
        b = b_try;
        break;
      }
      scale *= 0.5;
      if (back == 29) scale = 0.0;
    }
    if (norm * scale < kStepTol || norm < kStepTol) {
      converged = true;
      break;
    }
  }
  if (!converged) throw NumericError("fit: Gauss-Newton did not converge in 100 iterations");

  GaussPolyModel out;
  out.b = b;
  out.f = f;
  const double sse = weighted_sse(d, f, b);
  double wsum = 0.0;
  for (double wi : d.w) wsum += wi;
  out.residual = std::sqrt(sse / wsum);

  // parameter covariance: (J^T W J)^-1, chi-square scaled when the weights
  // are not real measurement errors
  std::vector<double> jtj(static_cast<std::size_t>(np) * np, 0.0);
  for (int i = 0; i < n; ++i) {
    const double e = std::exp(-b * d.x[i]);
    const double val = model_value(f, b, d.x[i]);
    std::vector<double> row(np);
    double xp = 1.0;
    for (int j = 0; j < nf; ++j) {
      row[j] = xp * e;
      xp *= d.x[i];
    }
    if (fit_b) row[nf] = -d.x[i] * val;
    for (int j = 0; j < np; ++j)
      for (int k = 0; k < np; ++k) jtj[static_cast<std::size_t>(j) * np + k] += d.w[i] * row[j] * row[k];
  }
  const double scale2 = have_real_errors ? 1.0 : (n > np ? sse / (n - np) : 0.0);
  out.sigma.assign(np, 0.0);
  for (int p = 0; p < np; ++p) {
    std::vector<double> rhs(np, 0.0);
    rhs[p] = 1.0;
    const auto col = solve_linear(jtj, rhs, np);
    out.sigma[p] = std::sqrt(std::max(0.0, col[p] * scale2));
  }
  return out;
}

}  // namespace

double GaussPolyModel::value(double x) const { return model_value(f, b, x); }

RadialCurve make_gz_curve(std::span<const SettingCounts> signal,
                          std::span<const SettingCounts> vacuum, double z, RadialVariable var) {
  if (signal.empty()) throw std::invalid_argument("make_gz_curve: empty scan");
  if (var == RadialVariable::di_intensity && vacuum.size() != signal.size())
    throw std::invalid_argument("make_gz_curve: vacuum scan must pair the signal scan");

  RadialCurve curve;
  curve.var = var;
  for (std::size_t i = 0; i < signal.size(); ++i) {
    RadialPoint p;
    p.setting = signal[i].index;
    p.y = daps_gz(signal[i], z);
    p.x = var == RadialVariable::raw_beta2 ? signal[i].beta2 : di_intensity(vacuum[i]).mean;
    curve.points.push_back(p);
  }
  std::sort(curve.points.begin(), curve.points.end(),
            [](const RadialPoint& a, const RadialPoint& b) { return a.x < b.x; });
  for (std::size_t i = 1; i < curve.points.size(); ++i) {
    if (!(curve.points[i].x > curve.points[i - 1].x))
      throw std::invalid_argument("make_gz_curve: abscissa not strictly increasing");
  }
  if (!curve.points.empty() && curve.points.front().x < 0.0)
    throw std::invalid_argument("make_gz_curve: negative abscissa");
  return curve;
}

LinearCalibration di_calibration(std::span<const SettingCounts> vacuum) {
  if (vacuum.size() < 2) throw std::invalid_argument("di_calibration: need >= 2 settings");
  double su = 0.0, sx = 0.0, suu = 0.0, sux = 0.0;
  const double n = static_cast<double>(vacuum.size());
  for (const auto& s : vacuum) {
    const double u = s.beta2;
    const double x = di_intensity(s).mean;
    su += u;
    sx += x;
    suu += u * u;
    sux += u * x;
  }
  LinearCalibration cal;
  const double det = n * suu - su * su;
  if (det == 0.0) throw NumericError("di_calibration: degenerate LO grid");
  cal.slope = (n * sux - su * sx) / det;
  cal.intercept = (sx * suu - su * sux) / det;
  for (const auto& s : vacuum) {
    const double r = di_intensity(s).mean - (cal.intercept + cal.slope * s.beta2);
    cal.max_residual = std::max(cal.max_residual, std::abs(r));
  }
  return cal;
}

GaussPolyModel fit_vacuum(const RadialCurve& curve) {
  if (curve.points.size() < 3) throw std::invalid_argument("fit_vacuum: need >= 3 points");
  if (!(curve.points.front().y.mean > 0.0))
    throw std::invalid_argument("fit_vacuum: y at the smallest abscissa must be positive");

  const FitData d = weighted_data(curve);

  // log-linear start on the positive points
  double sw = 0.0, sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  int pos = 0;
  for (std::size_t i = 0; i < d.x.size(); ++i) {
    if (d.y[i] <= 0.0) continue;
    ++pos;
    const double ly = std::log(d.y[i]);
    sw += 1.0;
    sx += d.x[i];
    sy += ly;
    sxx += d.x[i] * d.x[i];
    sxy += d.x[i] * ly;
  }
  if (pos < 2) throw std::invalid_argument("fit_vacuum: not enough positive points");
  const double det = sw * sxx - sx * sx;
  double b0 = det != 0.0 ? -(sw * sxy - sx * sy) / det : 1.0;
  if (!(b0 > 0.0)) b0 = 1.0;

  bool have_real_errors = false;
  for (const auto& p : curve.points) have_real_errors = have_real_errors || p.y.delta > 0.0;
  return gauss_newton_fit(d, 0, b0, true, have_real_errors);
}

GaussPolyModel fit_heralded(const RadialCurve& curve, int k_h, const HeraldedFitOptions& opts) {
  if (k_h < 0) throw std::invalid_argument("fit_heralded: k_h must be >= 0");
  if (static_cast<int>(curve.points.size()) < k_h + 3)
    throw std::invalid_argument("fit_heralded: need >= k_h + 3 points");
  if (!(opts.b_init > 0.0)) throw std::invalid_argument("fit_heralded: b_init must be positive");

  const FitData d = weighted_data(curve);
  bool have_real_errors = false;
  for (const auto& p : curve.points) have_real_errors = have_real_errors || p.y.delta > 0.0;
  return gauss_newton_fit(d, k_h, opts.b_init, !opts.fix_b, have_real_errors);
}

GaussPolyModel predict_fock(int m, const GaussPolyModel& vacuum_model, double tr_ratio,
                            double x_per_beta2) {
  if (m < 0) throw std::invalid_argument("predict_fock: m must be >= 0");
  if (vacuum_model.degree() != 0)
    throw std::invalid_argument("predict_fock: vacuum model must be Gaussian (degree 0)");
  if (!(vacuum_model.b > 0.0)) throw std::invalid_argument("predict_fock: vacuum decay must be positive");
  if (!(tr_ratio > 0.0) || !(x_per_beta2 > 0.0))
    throw std::invalid_argument("predict_fock: ratios must be positive");

  const double b = vacuum_model.b;
  const double f0 = vacuum_model.f[0];
  // d^j d*^j exp(-c u) = j! (-c)^j L_j(c u) exp(-c u) with c = b * x_per_beta2;
  // the polynomial collects in the model abscissa x = x_per_beta2 * u.
  const double big_a = tr_ratio * b * x_per_beta2;

  GaussPolyModel out;
  out.b = b;
  out.f.assign(m + 1, 0.0);
  std::vector<double> binom_m(m + 1);  // C(m, j) (-A)^j
  {
    double c = 1.0, ap = 1.0;
    for (int j = 0; j <= m; ++j) {
      binom_m[j] = c * ap;
      c = c * (m - j) / (j + 1.0);
      ap *= -big_a;
    }
  }
  for (int i = 0; i <= m; ++i) {
    double acc = 0.0;
    // C(j, i) over j = i..m
    double cji = 1.0;
    for (int j = i; j <= m; ++j) {
      acc += binom_m[j] * cji;
      cji = cji * (j + 1.0) / (j + 1.0 - i);
    }
    double negb_i = 1.0;
    for (int t = 0; t < i; ++t) negb_i *= -b;
    double ifact = 1.0;
    for (int t = 2; t <= i; ++t) ifact *= t;
    out.f[i] = f0 * negb_i / ifact * acc;
  }
  return out;
}

RadialCurve evaluate_model(const GaussPolyModel& model, RadialVariable var,
                           std::span<const double> xs) {
  RadialCurve curve;
  curve.var = var;
  int idx = 0;
  for (double x : xs) {
    RadialPoint p;
    p.setting = idx++;
    p.x = x;
    p.y = EstimateWithError::exact(model.value(x));
    if (!model.sigma.empty()) {
      const int nf = model.degree() + 1;
      double var_acc = 0.0;
      double xp = 1.0;
      const double e = std::exp(-model.b * x);
      for (int j = 0; j < nf; ++j) {
        var_acc += (xp * e * model.sigma[j]) * (xp * e * model.sigma[j]);
        xp *= x;
      }
      if (static_cast<int>(model.sigma.size()) == nf + 1) {
        const double db = -x * model.value(x) * model.sigma[nf];
        var_acc += db * db;
      }
      p.y.sigma = std::sqrt(var_acc);
      p.y.delta = p.y.sigma;
    }
    curve.points.push_back(p);
  }
  return curve;
}

RadialCurve predict_fock_curve(int m, const GaussPolyModel& vacuum_model, double tr_ratio,
                               double x_per_beta2, std::span<const double> xs) {
  const auto base = predict_fock(m, vacuum_model, tr_ratio, x_per_beta2);
  RadialCurve curve = evaluate_model(base, RadialVariable::di_intensity, xs);
  for (auto& p : curve.points) p.y = EstimateWithError::exact(p.y.mean);

  // propagate vacuum (f0, b) uncertainties through the prediction
  if (vacuum_model.sigma.size() == 2) {
    const double sf0 = vacuum_model.sigma[0];
    const double sb = vacuum_model.sigma[1];
    GaussPolyModel vb = vacuum_model;
    const double hb = std::max(std::abs(vb.b) * 1e-6, 1e-12);
    vb.b += hb;
    const auto shifted = predict_fock(m, vb, tr_ratio, x_per_beta2);
    for (std::size_t i = 0; i < curve.points.size(); ++i) {
      const double x = curve.points[i].x;
      const double val = curve.points[i].y.mean;
      const double d_f0 = vacuum_model.f[0] != 0.0 ? val / vacuum_model.f[0] : 0.0;
      const double d_b = (shifted.value(x) - val) / hb;
      const double sig = std::sqrt(d_f0 * d_f0 * sf0 * sf0 + d_b * d_b * sb * sb);
      curve.points[i].y.sigma = sig;
      curve.points[i].y.delta = sig;
    }
  }
  return curve;
}

namespace {

/// Angular average of the vacuum model shifted by a P-function ring of
/// radius alpha_abs (raw-beta^2 argument u, model abscissa x = s u).
double ring_convolution(const GaussPolyModel& vac, double tr_ratio, double x_per_beta2, double x,
                        double alpha2, std::span<const double> nodes,
                        std::span<const double> weights) {
  const double u = x / x_per_beta2;
  const double shift = tr_ratio * alpha2;
  const double cross = 2.0 * std::sqrt(tr_ratio * u * alpha2);
  double acc = 0.0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const double phi = std::numbers::pi * (nodes[i] + 1.0);  // [0, 2pi]
    const double u_eff = u + shift - cross * std::cos(phi);
    acc += weights[i] * vac.value(x_per_beta2 * u_eff);
  }
  return acc * 0.5;  // GL weights integrate to 2 over [-1,1]
}

RadialCurve convolve_at_orders(const StateSpec& state, const GaussPolyModel& vac, double tr_ratio,
                               double x_per_beta2, std::span<const double> xs, int radial_order,
                               int angular_order) {
  const auto [anodes, aweights] = gauss_legendre(angular_order);
  const auto [rnodes, rweights] = gauss_legendre(radial_order);

  RadialCurve out;
  out.var = RadialVariable::di_intensity;
  std::vector<double> acc(xs.size(), 0.0);

  for (const auto& [w, c] : state.components) {
    if (w == 0.0) continue;
    switch (c.kind) {
      case StateSpec::Kind::vacuum:
        for (std::size_t i = 0; i < xs.size(); ++i) acc[i] += w * vac.value(xs[i]);
        break;
      case StateSpec::Kind::fock: {
        const auto pred = predict_fock(c.m, vac, tr_ratio, x_per_beta2);
        for (std::size_t i = 0; i < xs.size(); ++i) acc[i] += w * pred.value(xs[i]);
        break;
      }
      case StateSpec::Kind::coherent: {
        const double a2 = std::norm(c.alpha);
        for (std::size_t i = 0; i < xs.size(); ++i)
          acc[i] += w * ring_convolution(vac, tr_ratio, x_per_beta2, xs[i], a2, anodes, aweights);
        break;
      }
      case StateSpec::Kind::thermal: {
        if (c.nbar == 0.0) {
          for (std::size_t i = 0; i < xs.size(); ++i) acc[i] += w * vac.value(xs[i]);
          break;
        }
        // P(alpha) d^2alpha = exp(-v/nbar)/nbar dv dphi/(2 pi), v = |alpha|^2
        const double vmax = c.nbar * 37.0;  // exp(-37) ~ 1e-16 tail
        for (std::size_t i = 0; i < xs.size(); ++i) {
          double integral = 0.0;
          for (int rq = 0; rq < radial_order; ++rq) {
            const double v = 0.5 * vmax * (rnodes[rq] + 1.0);
            const double dens = std::exp(-v / c.nbar) / c.nbar;
            integral += rweights[rq] * 0.5 * vmax * dens *
                        ring_convolution(vac, tr_ratio, x_per_beta2, xs[i], v, anodes, aweights);
          }
          acc[i] += w * integral;
        }
        break;
      }
    }
  }

  int idx = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    RadialPoint p;
    p.setting = idx++;
    p.x = xs[i];
    p.y = EstimateWithError::exact(acc[i]);
    out.points.push_back(p);
  }
  return out;
}

}  // namespace

RadialCurve predict_convolution(const StateSpec& state, const GaussPolyModel& vacuum_model,
                                double tr_ratio, double x_per_beta2, std::span<const double> xs,
                                const QuadratureOptions& quad) {
  state.validate();
  for (const auto& [w, c] : state.components) {
    if (w > 0.0 && c.kind == StateSpec::Kind::coherent && std::abs(c.alpha) > 0.0 &&
        !state.phase_randomized) {
      throw std::invalid_argument(
          "predict_convolution: coherent components must be phase-randomized (radial pipeline)");
    }
  }
  auto base = convolve_at_orders(state, vacuum_model, tr_ratio, x_per_beta2, xs,
                                 quad.radial_order, quad.angular_order);
  auto refined = convolve_at_orders(state, vacuum_model, tr_ratio, x_per_beta2, xs,
                                    2 * quad.radial_order, 2 * quad.angular_order);
  double scale = 0.0, diff = 0.0;
  for (std::size_t i = 0; i < base.points.size(); ++i) {
    scale = std::max(scale, std::abs(refined.points[i].y.mean));
    diff = std::max(diff, std::abs(refined.points[i].y.mean - base.points[i].y.mean));
  }
  if (diff > quad.check_tolerance * std::max(scale, 1e-30)) {
    throw NumericError("predict_convolution: quadrature not converged (Richardson check)");
  }

  // propagate the vacuum-fit (f0, b) uncertainties through the prediction;
  // every component value is linear in f0, the b derivative comes from a
  // finite difference at base quadrature orders
  if (vacuum_model.sigma.size() == 2) {
    GaussPolyModel vb = vacuum_model;
    const double hb = std::max(std::abs(vb.b) * 1e-6, 1e-12);
    vb.b += hb;
    const auto shifted = convolve_at_orders(state, vb, tr_ratio, x_per_beta2, xs,
                                            quad.radial_order, quad.angular_order);
    const double f0 = vacuum_model.f[0];
    for (std::size_t i = 0; i < refined.points.size(); ++i) {
      const double val = refined.points[i].y.mean;
      const double d_f0 = f0 != 0.0 ? val / f0 : 0.0;
      const double d_b = (shifted.points[i].y.mean - base.points[i].y.mean) / hb;
      const double sig = std::sqrt(d_f0 * d_f0 * vacuum_model.sigma[0] * vacuum_model.sigma[0] +
                                   d_b * d_b * vacuum_model.sigma[1] * vacuum_model.sigma[1]);
      refined.points[i].y.sigma = sig;
      refined.points[i].y.delta = sig;
    }
  }
  return refined;
}

OptimalZ optimal_z(std::span<const SettingCounts> scan, const ZGrid& grid) {
  if (scan.empty()) throw std::invalid_argument("optimal_z: empty scan");
  const SettingCounts* origin = nullptr;
  for (const auto& s : scan) {
    if (s.beta2 <= 1e-12 && (origin == nullptr || s.beta2 < origin->beta2)) origin = &s;
  }
  if (origin == nullptr) throw std::invalid_argument("optimal_z: scan includes no beta = 0 setting");
  if (!(grid.step > 0.0) || grid.hi < grid.lo)
    throw std::invalid_argument("optimal_z: malformed z grid");

  OptimalZ best;
  bool first = true;
  const int steps = static_cast<int>(std::floor((grid.hi - grid.lo) / grid.step + 1e-9));
  for (int i = 0; i <= steps; ++i) {
    const double z = grid.lo + i * grid.step;
    const auto est = daps_gz(*origin, z);
    const double sig = -est.mean / std::max(est.delta, 1e-300);
    if (first || sig > best.significance) {
      best.z = z;
      best.g0 = est;
      best.significance = sig;
      first = false;
    }
  }
  // "negative" means statistically significant negativity, not a noise dip
  best.negative = best.g0.mean < 0.0 && best.significance >= 3.0;
  return best;
}

SymMatrix discrimination_matrix(std::span<const RadialCurve> curves) {
  if (curves.empty()) throw std::invalid_argument("discrimination_matrix: no curves");
  const std::size_t n_set = curves.front().points.size();
  for (const auto& c : curves) {
    if (c.points.size() != n_set)
      throw std::invalid_argument("discrimination_matrix: grid mismatch");
    if (c.var != curves.front().var)
      throw std::invalid_argument("discrimination_matrix: mixed abscissa variables");
    // curves must come from the same LO setting grid; x values may differ
    // within measurement noise, settings may not
    for (std::size_t i = 0; i < n_set; ++i) {
      if (c.points[i].setting != curves.front().points[i].setting)
        throw std::invalid_argument("discrimination_matrix: grid mismatch");
    }
  }

  const int m = static_cast<int>(curves.size());
  SymMatrix out(m);
  for (int a = 0; a < m; ++a) {
    for (int bidx = a; bidx < m; ++bidx) {
      double same = 1.0;
      for (std::size_t i = 0; i < n_set; ++i) {
        const auto& pa = curves[a].points[i].y;
        const auto& pb = curves[bidx].points[i].y;
        const double delta = std::sqrt(pa.delta * pa.delta + pb.delta * pb.delta);
        double d;
        const double gap = std::abs(pa.mean - pb.mean);
        if (delta > 0.0) {
          d = gap / delta;
        } else {
          d = gap > 0.0 ? 1e12 : 0.0;
        }
        same *= normal_cdf(d + 3.0) - normal_cdf(d - 3.0);
      }
      out.at(a, bidx) = 1.0 - same;
      out.at(bidx, a) = 1.0 - same;
    }
  }
  return out;
}

}  // namespace daps
