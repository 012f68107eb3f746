#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "daps/cli.hpp"
#include "daps/errors.hpp"

namespace {

std::vector<double> parse_double_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    out.push_back(std::stod(item));
  }
  if (out.empty()) throw daps::ConfigError("empty numeric list: '" + text + "'");
  return out;
}

std::vector<int> parse_int_list(const std::string& text) {
  std::vector<int> out;
  for (double v : parse_double_list(text)) out.push_back(static_cast<int>(v));
  return out;
}

/// "start:step:count" arithmetic grid or a plain comma list.
std::vector<double> parse_grid(const std::string& text) {
  if (text.find(':') == std::string::npos) return parse_double_list(text);
  std::stringstream ss(text);
  std::string a, b, c;
  if (!std::getline(ss, a, ':') || !std::getline(ss, b, ':') || !std::getline(ss, c))
    throw daps::ConfigError("grid must be start:step:count or a comma list");
  const double start = std::stod(a), step = std::stod(b);
  const int count = std::stoi(c);
  if (count < 1) throw daps::ConfigError("grid count must be >= 1");
  std::vector<double> out;
  for (int i = 0; i < count; ++i) out.push_back(start + step * i);
  return out;
}

daps::ZGrid parse_zgrid(const std::string& text) {
  std::stringstream ss(text);
  std::string a, b, c;
  if (!std::getline(ss, a, ':') || !std::getline(ss, b, ':') || !std::getline(ss, c))
    throw daps::ConfigError("z grid must be lo:hi:step");
  return daps::ZGrid{std::stod(a), std::stod(b), std::stod(c)};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"daps: simulate, estimate, and analyze multiplexed click statistics"};
  app.require_subcommand(1);

  // simulate
  auto* sim = app.add_subcommand("simulate", "generate a scan dataset from a config");
  std::string sim_config, sim_output, sim_grid, sim_khs;
  std::uint64_t sim_seed = 0;
  bool sim_seed_set = false, sim_serial = false;
  sim->add_option("--config", sim_config, "experiment config JSON")->required();
  sim->add_option("--output", sim_output, "output dataset path")->required();
  auto* seed_opt = sim->add_option("--seed", sim_seed, "override the config seed");
  sim->add_option("--grid", sim_grid, "LO grid override: start:step:count or comma list");
  sim->add_option("--khs", sim_khs, "heralding bins override (comma list)");
  sim->add_flag("--serial", sim_serial, "run the kernels on the serial reference path");

  // estimate
  auto* est = app.add_subcommand("estimate", "per-setting DAPS estimates with error budgets");
  std::string est_dataset, est_output, est_z = "-1.5";
  std::vector<std::string> est_zvecs;
  int est_bootstrap = 0;
  est->add_option("dataset", est_dataset, "input dataset")->required();
  est->add_option("--output", est_output, "output report JSON")->required();
  est->add_option("--z", est_z, "comma list of z values");
  est->add_option("--Z", est_zvecs, "custom Z vector, comma list of length K+1 (repeatable)");
  est->add_option("--bootstrap", est_bootstrap, "bootstrap resamples (0 = off)");

  // analyze
  auto* ana = app.add_subcommand("analyze", "fit / predict / discriminate / optimal-z");
  std::vector<std::string> ana_datasets;
  std::string ana_mode, ana_output, ana_grid, ana_state_config;
  double ana_z = -1.5;
  int ana_fock = -1, ana_kh = -1;
  bool ana_free_b = false;
  ana->add_option("datasets", ana_datasets, "input dataset(s)")->required();
  ana->add_option("--mode", ana_mode, "fit | predict | discriminate | optimal-z")->required();
  ana->add_option("--output", ana_output, "output path stem")->required();
  ana->add_option("--z", ana_z, "z value of the analyzed G_z curve");
  ana->add_option("--fock", ana_fock, "predict: photon number m");
  ana->add_option("--config", ana_state_config, "predict: config whose state is convolved");
  ana->add_option("--kh", ana_kh, "fit: polynomial degree (default: dataset heralding bin)");
  ana->add_flag("--free-b", ana_free_b, "fit: let the decay rate float instead of pinning it");
  ana->add_option("--grid", ana_grid, "optimal-z: z grid lo:hi:step");

  // report
  auto* rep = app.add_subcommand("report", "human-readable scan summary");
  std::string rep_dataset, rep_output;
  double rep_z = -1.5;
  rep->add_option("dataset", rep_dataset, "input dataset")->required();
  rep->add_option("--output", rep_output, "output markdown path")->required();
  rep->add_option("--z", rep_z, "z value shown in the table");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : daps::cli::kExitConfig;
  }

  sim_seed_set = seed_opt->count() > 0;

  try {
    if (sim->parsed()) {
      daps::cli::SimulateArgs args;
      args.config_path = sim_config;
      args.output_path = sim_output;
      if (sim_seed_set) args.seed = sim_seed;
      if (!sim_grid.empty()) args.grid = parse_grid(sim_grid);
      if (!sim_khs.empty()) args.khs = parse_int_list(sim_khs);
      args.serial = sim_serial;
      daps::cli::run_simulate(args);
    } else if (est->parsed()) {
      daps::cli::EstimateArgs args;
      args.dataset_path = est_dataset;
      args.output_path = est_output;
      args.z_values = parse_double_list(est_z);
      for (const auto& zv : est_zvecs) args.z_vectors.push_back(parse_double_list(zv));
      args.bootstrap = est_bootstrap;
      daps::cli::run_estimate(args);
    } else if (ana->parsed()) {
      daps::cli::AnalyzeArgs args;
      args.dataset_paths = ana_datasets;
      args.mode = ana_mode;
      args.output_stem = ana_output;
      args.z = ana_z;
      if (ana_fock >= 0) args.fock_m = ana_fock;
      if (!ana_state_config.empty()) args.state_config_path = ana_state_config;
      if (ana_kh >= 0) args.k_h = ana_kh;
      args.free_b = ana_free_b;
      if (!ana_grid.empty()) args.z_grid = parse_zgrid(ana_grid);
      daps::cli::run_analyze(args);
    } else if (rep->parsed()) {
      daps::cli::ReportArgs args;
      args.dataset_path = rep_dataset;
      args.output_path = rep_output;
      args.z = rep_z;
      daps::cli::run_report(args);
    }
  } catch (...) {
    return daps::cli::exit_code_for_current_exception();
  }
  return daps::cli::kExitOk;
}
