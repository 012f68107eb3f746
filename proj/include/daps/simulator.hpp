#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "daps/counts.hpp"
#include "daps/detectors.hpp"
#include "daps/fock.hpp"
#include "daps/parallel.hpp"

namespace daps {

/// Deviations from the ideal multiplexer: per-arm splitting weights (sum 1)
/// and, optionally, per-arm detector responses. Exists to exercise the
/// systematic-error machinery; default off.
struct Imbalance {
  std::vector<double> weights;
  std::vector<ResponseMatrix> per_arm;  // empty -> shared detector
};

/// Multiplexed measurement: N = 2^S arms behind the front-end splitter,
/// each arm watched by the same detector model.
struct MultiplexConfig {
  int S = 1;
  FrontendConfig frontend;
  ResponseMatrix detector;
  std::optional<Imbalance> imbalance;

  int N() const { return 1 << S; }
  void validate() const;
};

/// Exact joint outcome probabilities Pr(k_1,...,k_N) for a photon-number
/// distribution entering a balanced N-way split. Histogram form via
/// histogram_view().
Table click_statistics_exact(const FockDistribution& dist, const ResponseMatrix& det, int N);

/// Same, honoring cfg.imbalance when present.
Table click_statistics_exact(const FockDistribution& dist, const MultiplexConfig& cfg);

/// Multinomial draw of `trials` events from a tuple probability table.
/// Deterministic for fixed (seed, trials) under either execution policy.
CoincidenceCounts sample_events(const Table& probs, std::uint64_t trials, std::uint64_t seed,
                                Exec exec = Exec::parallel);

/// Signal state heralded from a two-mode squeezed source: idler passes a
/// herald_tau loss to a herald detector post-selected on outcome k_h.
/// Returns the Fock-diagonal signal mixture and the heralding probability.
std::pair<StateSpec, double> heralded_pdc_state(double lambda, double herald_tau,
                                                const ResponseMatrix& herald, int k_h);

struct ScanSetting {
  int index = 0;
  double beta2 = 0.0;
  std::optional<Table> exact;
  std::optional<CoincidenceCounts> events;
};

/// LO scan of the signal plus the paired signal-blocked (vacuum) scan taken
/// at the identical settings.
struct ScanDataset {
  TableShape shape;
  std::vector<ScanSetting> signal;
  std::vector<ScanSetting> vacuum;
  std::uint64_t seed = 0;
  std::uint64_t trials = 0;
};

/// Estimator-facing views. prefer_events selects sampled counts when both
/// representations are stored.
std::vector<SettingCounts> setting_views(const std::vector<ScanSetting>& scan, bool prefer_events);

/// Run the full protocol over an LO amplitude grid (|beta|^2 values, phase
/// fixed at 0). trials = 0 keeps only the exact tables.
ScanDataset scan_experiment(const StateSpec& state, const MultiplexConfig& cfg,
                            std::span<const double> beta2_grid, std::uint64_t trials,
                            std::uint64_t seed, Exec exec = Exec::parallel);

/// Monte Carlo table with per-entry standard errors.
struct McTable {
  Table mean;
  Table stderr_of_mean;
  std::uint64_t samples = 0;
};

/// Independent oracle: samples the Glauber-Sudarshan function of a classical
/// state and averages the per-arm coherent responses. Rejects nonclassical
/// states.
McTable pfunction_mc_oracle(const StateSpec& state, const FrontendConfig& fe,
                            const CoherentResponse& resp, int N, Complex beta,
                            std::uint64_t samples, std::uint64_t seed,
                            Exec exec = Exec::parallel,
                            std::span<const double> arm_weights = {});

}  // namespace daps
