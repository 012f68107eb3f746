#pragma once

#include <optional>
#include <string>
#include <vector>

#include "daps/analysis.hpp"
#include "daps/detectors.hpp"
#include "daps/fock.hpp"
#include "daps/simulator.hpp"

namespace daps {

constexpr int kSchemaVersion = 1;

/// Per-arm deviations, expressed in config space: splitting weights plus a
/// per-arm efficiency scale applied to the detector model.
struct ImbalanceConfig {
  std::vector<double> weights;
  std::vector<double> eta_scale;
};

struct HeraldingConfig {
  double lambda = 0.3;
  double transmittance = 0.4;
  std::vector<int> khs;
  DetectorSpec detector;
};

/// Everything one simulation run needs; mirrors the JSON config schema.
struct ExperimentConfig {
  std::uint64_t seed = 1;
  std::uint64_t trials = 0;  // 0 = exact tables only
  int n_max = 0;             // 0 = choose automatically from the truncation rule
  StateSpec state = StateSpec::vacuum();
  Complex t{1.0}, r{0.0};
  int S = 1;
  DetectorSpec detector;
  std::optional<ImbalanceConfig> imbalance;
  std::vector<double> beta2_grid;
  std::optional<HeraldingConfig> heralding;
};

ExperimentConfig load_config(const std::string& path);
ExperimentConfig config_from_json_text(const std::string& text);
std::string config_to_json_text(const ExperimentConfig& cfg);

/// On-disk dataset: config echo, heralding provenance, scan data.
struct DatasetFile {
  ExperimentConfig config;
  std::optional<int> k_h;
  double herald_probability = 0.0;
  std::optional<StateSpec> signal_state;  // realized heralded state
  ScanDataset data;
};

void write_dataset(const std::string& path, const DatasetFile& ds);
DatasetFile read_dataset(const std::string& path);

/// Curve CSV, columns: setting,x,mean,sigma,eps,delta.
void write_curve_csv(const std::string& path, const RadialCurve& curve);
RadialCurve read_curve_csv(const std::string& path);

void write_matrix_csv(const std::string& path, const std::vector<std::string>& labels,
                      const SymMatrix& m);

void write_model_json(const std::string& path, const GaussPolyModel& model, RadialVariable var);
GaussPolyModel read_model_json(const std::string& path, RadialVariable* var_out = nullptr);

/// Atomic text write (temp file + rename).
void write_text_atomic(const std::string& path, const std::string& content);
std::string read_text(const std::string& path);

}  // namespace daps
