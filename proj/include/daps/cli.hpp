#pragma once

#include <optional>
#include <string>
#include <vector>

#include "daps/analysis.hpp"
#include "daps/io.hpp"

namespace daps::cli {

// Exit codes: 0 ok, 2 configuration/schema, 3 numeric failure, 4 I/O.
constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;
constexpr int kExitIo = 4;

struct SimulateArgs {
  std::string config_path;
  std::string output_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::vector<double>> grid;
  std::optional<std::vector<int>> khs;
  bool serial = false;
};

struct EstimateArgs {
  std::string dataset_path;
  std::string output_path;
  std::vector<double> z_values = {-1.5};
  std::vector<std::vector<double>> z_vectors;
  int bootstrap = 0;  // resamples; 0 disables the cross-check
};

struct AnalyzeArgs {
  std::vector<std::string> dataset_paths;
  std::string mode;  // fit | predict | discriminate | optimal-z
  std::string output_stem;
  double z = -1.5;
  std::optional<int> fock_m;
  std::optional<std::string> state_config_path;
  std::optional<int> k_h;
  bool free_b = false;
  std::optional<ZGrid> z_grid;
};

struct ReportArgs {
  std::string dataset_path;
  std::string output_path;
  double z = -1.5;
};

void run_simulate(const SimulateArgs& args);
void run_estimate(const EstimateArgs& args);
void run_analyze(const AnalyzeArgs& args);
void run_report(const ReportArgs& args);

/// Paths of the per-k_h dataset files a heralded simulate run writes.
std::string heralded_output_path(const std::string& base, int k_h);

/// Map an in-flight exception to the process exit code.
int exit_code_for_current_exception();

}  // namespace daps::cli
