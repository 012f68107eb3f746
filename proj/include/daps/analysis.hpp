#pragma once

#include <optional>
#include <span>
#include <vector>

#include "daps/counts.hpp"
#include "daps/estimator.hpp"
#include "daps/fock.hpp"

namespace daps {

/// Abscissa convention of a radial curve. Curves carry the tag so raw-beta
/// and detector-independent data are never mixed in a fit.
enum class RadialVariable { raw_beta2, di_intensity };

struct RadialPoint {
  int setting = 0;
  double x = 0.0;
  EstimateWithError y;
};

struct RadialCurve {
  RadialVariable var = RadialVariable::di_intensity;
  std::vector<RadialPoint> points;
};

/// Gaussian times polynomial model y(x) = sum_j f_j x^j exp(-b x).
struct GaussPolyModel {
  double b = 1.0;
  std::vector<double> f;       // f_0..f_m
  double residual = 0.0;       // weighted rms residual of the fit (0 when derived)
  std::vector<double> sigma;   // 1-sigma parameter errors (f_0..f_m, b); empty when derived

  double value(double x) const;
  int degree() const { return static_cast<int>(f.size()) - 1; }
};

/// G_z curve of a scan. The x axis comes from the paired vacuum settings
/// (di_intensity) or from the LO grid itself (raw_beta2).
RadialCurve make_gz_curve(std::span<const SettingCounts> signal,
                          std::span<const SettingCounts> vacuum, double z, RadialVariable var);

/// Slope of |beta^DI|^2 versus |beta|^2 from a vacuum scan (least squares
/// through the origin offset): returns {slope, intercept, max |residual|}.
struct LinearCalibration {
  double slope = 0.0;
  double intercept = 0.0;
  double max_residual = 0.0;
};
LinearCalibration di_calibration(std::span<const SettingCounts> vacuum);

/// Weighted Gauss-Newton fit of f_0 exp(-b x); weights 1/Delta^2 with
/// Delta-free (exact) curves falling back to uniform weights.
GaussPolyModel fit_vacuum(const RadialCurve& curve);

/// Fit options for heralded curves: b free (initialized from the vacuum
/// fit) or pinned to it.
struct HeraldedFitOptions {
  double b_init = 1.0;
  bool fix_b = true;
};
GaussPolyModel fit_heralded(const RadialCurve& curve, int k_h, const HeraldedFitOptions& opts);

/// m-photon prediction from a Gaussian vacuum model via the Laguerre
/// derivative identity. tr_ratio = |t|^2/|r|^2; x_per_beta2 maps the model
/// abscissa to raw |beta|^2 (1 for raw-variable models, the measured
/// calibration slope for DI-variable models).
GaussPolyModel predict_fock(int m, const GaussPolyModel& vacuum_model, double tr_ratio,
                            double x_per_beta2);

/// Curve evaluation of a model on explicit abscissas, with 1-sigma model
/// error from the fitted parameter covariance when available.
RadialCurve evaluate_model(const GaussPolyModel& model, RadialVariable var,
                           std::span<const double> xs);

/// Predicted m-photon curve; 1-sigma errors propagate the vacuum-fit
/// parameter uncertainties through the prediction.
RadialCurve predict_fock_curve(int m, const GaussPolyModel& vacuum_model, double tr_ratio,
                               double x_per_beta2, std::span<const double> xs);

struct QuadratureOptions {
  int radial_order = 64;
  int angular_order = 64;
  double check_tolerance = 1e-6;  // Richardson check against doubled orders
};

/// Prediction for a rotationally symmetric classical state (or Fock mixture,
/// routed through predict_fock) by convolving its P function with the
/// vacuum model.
RadialCurve predict_convolution(const StateSpec& state, const GaussPolyModel& vacuum_model,
                                double tr_ratio, double x_per_beta2, std::span<const double> xs,
                                const QuadratureOptions& quad = {});

/// Grid search for the z maximizing the significance -G_z(0)/Delta G_z(0).
struct OptimalZ {
  double z = 0.0;
  EstimateWithError g0;
  double significance = 0.0;
  bool negative = false;  // false flags "no significant negativity on the grid"
};
struct ZGrid {
  double lo = -10.0;
  double hi = 0.0;
  double step = 0.05;
};
OptimalZ optimal_z(std::span<const SettingCounts> scan, const ZGrid& grid = {});

/// Pairwise state-discrimination probabilities from reconstructed curves
/// sharing one setting grid; delta = 3 combined standard deviations.
SymMatrix discrimination_matrix(std::span<const RadialCurve> curves);

}  // namespace daps
