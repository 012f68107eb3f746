// Timing comparison of the OpenMP kernels against their serial reference
// paths. Both paths are bit-identical by the chunked-seeding contract; this
// binary verifies that too and reports the speedups.

#include <chrono>
#include <cstdio>
#include <vector>

#include "daps/estimator.hpp"
#include "daps/simulator.hpp"

using namespace daps;

namespace {

double ms_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

MultiplexConfig bench_config(int n_max) {
  MultiplexConfig cfg;
  cfg.S = 1;
  cfg.frontend = FrontendConfig::from_t2(0.9, n_max);
  cfg.detector = response_matrix_of(DetectorSpec{"tes", 0.9, 0.01, 4}, n_max);
  return cfg;
}

struct Row {
  const char* name;
  double serial_ms;
  double parallel_ms;
  bool identical;
};

void print(const Row& r) {
  std::printf("%-28s %10.1f ms %10.1f ms   x%.2f   %s\n", r.name, r.serial_ms, r.parallel_ms,
              r.serial_ms / r.parallel_ms, r.identical ? "bit-identical" : "MISMATCH");
}

}  // namespace

int main() {
  const int n_max = 45;
  const auto cfg = bench_config(n_max);

  std::printf("%-28s %13s %13s\n", "kernel", "serial", "openmp");

  {
    const auto dist =
        frontend_distribution(StateSpec::thermal(0.8), cfg.frontend, Complex{1.4, 0.0});
    const auto table = click_statistics_exact(dist, cfg);
    const std::uint64_t trials = 1 << 23;
    auto t0 = std::chrono::steady_clock::now();
    const auto ser = sample_events(table, trials, 7, Exec::serial);
    const double ts = ms_since(t0);
    t0 = std::chrono::steady_clock::now();
    const auto par = sample_events(table, trials, 7, Exec::parallel);
    const double tp = ms_since(t0);
    print({"sample_events (8M trials)", ts, tp, ser.counts == par.counts});
  }

  {
    const auto resp = coherent_response_of(DetectorSpec{"tes", 0.9, 0.01, 4});
    const std::uint64_t samples = 2000000;
    auto t0 = std::chrono::steady_clock::now();
    const auto ser = pfunction_mc_oracle(StateSpec::thermal(1.0), cfg.frontend, resp, 2,
                                         Complex{1.2, 0.0}, samples, 3, Exec::serial);
    const double ts = ms_since(t0);
    t0 = std::chrono::steady_clock::now();
    const auto par = pfunction_mc_oracle(StateSpec::thermal(1.0), cfg.frontend, resp, 2,
                                         Complex{1.2, 0.0}, samples, 3, Exec::parallel);
    const double tp = ms_since(t0);
    print({"pfunction_mc (2M samples)", ts, tp, ser.mean.v == par.mean.v});
  }

  {
    std::vector<double> grid;
    for (int i = 0; i < 29; ++i) grid.push_back(static_cast<double>(i));
    auto t0 = std::chrono::steady_clock::now();
    const auto ser =
        scan_experiment(StateSpec::thermal(0.5), cfg, grid, 100000, 11, Exec::serial);
    const double ts = ms_since(t0);
    t0 = std::chrono::steady_clock::now();
    const auto par =
        scan_experiment(StateSpec::thermal(0.5), cfg, grid, 100000, 11, Exec::parallel);
    const double tp = ms_since(t0);
    bool same = true;
    for (std::size_t i = 0; i < ser.signal.size(); ++i) {
      same = same && ser.signal[i].exact->v == par.signal[i].exact->v &&
             ser.signal[i].events->counts == par.signal[i].events->counts;
    }
    print({"scan_experiment (29 x 1e5)", ts, tp, same});
  }

  {
    const auto dist =
        frontend_distribution(StateSpec::thermal(0.8), cfg.frontend, Complex{1.0, 0.0});
    const auto counts = sample_events(click_statistics_exact(dist, cfg), 500000, 13);
    auto t0 = std::chrono::steady_clock::now();
    const double sigma = bootstrap_eigen_sigma(counts, EigenStatistic::lambda_min, 200, 5);
    const double tb = ms_since(t0);
    std::printf("%-28s %10.1f ms (parallel only, sigma=%.2e)\n", "bootstrap (200 resamples)", tb,
                sigma);
  }

  return 0;
}
