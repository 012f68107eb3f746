#include "daps/cli.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <sstream>

#include <json.hpp>

#include "daps/errors.hpp"
#include "daps/rng.hpp"

namespace daps::cli {

using njson = nlohmann::ordered_json;

namespace {

struct BuiltExperiment {
  MultiplexConfig mux;
  int n_max = 0;
};

DetectorSpec scaled_detector(DetectorSpec spec, double eta_scale) {
  spec.eta *= eta_scale;
  if (spec.eta > 1.0) throw ConfigError("imbalance eta_scale pushes efficiency above 1");
  return spec;
}

BuiltExperiment build_experiment(const ExperimentConfig& cfg, const StateSpec& signal) {
  BuiltExperiment built;
  double beta_max = 0.0;
  for (double b2 : cfg.beta2_grid) {
    if (b2 < 0.0) throw ConfigError("lo_grid: negative |beta|^2");
    beta_max = std::max(beta_max, std::sqrt(b2));
  }
  built.n_max = cfg.n_max > 0 ? cfg.n_max : suggest_n_max(signal, cfg.t, cfg.r, beta_max);

  built.mux.S = cfg.S;
  built.mux.frontend = FrontendConfig(cfg.t, cfg.r, built.n_max);
  built.mux.detector = response_matrix_of(cfg.detector, built.n_max);
  if (cfg.imbalance) {
    Imbalance imb;
    imb.weights = cfg.imbalance->weights;
    if (!cfg.imbalance->eta_scale.empty()) {
      if (cfg.imbalance->eta_scale.size() != imb.weights.size())
        throw ConfigError("imbalance: eta_scale size must match weights");
      for (double s : cfg.imbalance->eta_scale)
        imb.per_arm.push_back(response_matrix_of(scaled_detector(cfg.detector, s), built.n_max));
    }
    built.mux.imbalance = std::move(imb);
  }
  built.mux.validate();
  return built;
}

/// Herald detector sized for the squeezing strength.
ResponseMatrix build_herald(const HeraldingConfig& h) {
  const double lam2 = h.lambda * h.lambda;
  int support = 8;
  if (lam2 > 0.0)
    support = std::max(support, static_cast<int>(std::ceil(std::log(1e-18) / std::log(lam2))) + 8);
  return response_matrix_of(h.detector, support);
}

njson est_to_json(const EstimateWithError& e) {
  return njson{{"mean", e.mean},
               {"sigma", e.sigma},
               {"eps", e.eps},
               {"delta", e.delta},
               {"events", e.events}};
}

std::vector<double> default_xs(std::span<const SettingCounts> vacuum) {
  std::vector<double> xs;
  for (const auto& v : vacuum) xs.push_back(di_intensity(v).mean);
  std::sort(xs.begin(), xs.end());
  return xs;
}

std::string stem_path(const std::string& stem, const std::string& suffix) {
  return stem + suffix;
}

}  // namespace

std::string heralded_output_path(const std::string& base, int k_h) {
  const std::filesystem::path p(base);
  std::filesystem::path out = p.parent_path();
  out /= p.stem().string() + "_kh" + std::to_string(k_h) + p.extension().string();
  return out.string();
}

void run_simulate(const SimulateArgs& args) {
  ExperimentConfig cfg = load_config(args.config_path);
  if (args.seed) cfg.seed = *args.seed;
  if (args.grid) cfg.beta2_grid = *args.grid;
  if (args.khs && cfg.heralding) cfg.heralding->khs = *args.khs;
  const Exec exec = args.serial ? Exec::serial : Exec::parallel;

  if (!cfg.heralding) {
    const auto built = build_experiment(cfg, cfg.state);
    DatasetFile out;
    out.config = cfg;
    out.data = scan_experiment(cfg.state, built.mux, cfg.beta2_grid, cfg.trials, cfg.seed, exec);
    write_dataset(args.output_path, out);
    std::cout << "wrote " << args.output_path << "\n";
    return;
  }

  const auto herald = build_herald(*cfg.heralding);
  for (int k_h : cfg.heralding->khs) {
    const auto [signal, prob] =
        heralded_pdc_state(cfg.heralding->lambda, cfg.heralding->transmittance, herald, k_h);
    const auto built = build_experiment(cfg, signal);
    DatasetFile out;
    out.config = cfg;
    out.k_h = k_h;
    out.herald_probability = prob;
    out.signal_state = signal;
    const std::uint64_t run_seed = mix_seed(cfg.seed, 0x6b68ULL, static_cast<std::uint64_t>(k_h));
    out.data = scan_experiment(signal, built.mux, cfg.beta2_grid, cfg.trials, run_seed, exec);
    const std::string path = heralded_output_path(args.output_path, k_h);
    write_dataset(path, out);
    std::cout << "wrote " << path << " (herald probability " << prob << ")\n";
  }
}

void run_estimate(const EstimateArgs& args) {
  const DatasetFile ds = read_dataset(args.dataset_path);
  if (ds.data.vacuum.empty())
    throw ConfigError("estimate: dataset is missing the vacuum scan needed for |beta_DI|");
  const auto signal = setting_views(ds.data.signal, true);
  const auto vacuum = setting_views(ds.data.vacuum, true);
  const bool eigen_ok = ds.data.shape.N == 2;

  njson report;
  report["schema_version"] = kSchemaVersion;
  report["kind"] = "daps_estimate_report";
  report["dataset"] = args.dataset_path;
  report["z_values"] = args.z_values;
  report["error_method"] = "fixed-eigenvector propagation";

  njson settings = njson::array();
  GminScan gscan;
  if (eigen_ok) gscan = g_min_scan(signal);

  for (std::size_t i = 0; i < signal.size(); ++i) {
    njson row;
    row["setting"] = signal[i].index;
    row["beta2"] = signal[i].beta2;
    const auto di = di_intensity(vacuum[i]);
    row["di_intensity"] = est_to_json(di);
    row["di_amplitude"] = std::sqrt(std::max(0.0, di.mean));
    njson gzs = njson::array();
    for (double z : args.z_values) {
      auto e = daps_gz(signal[i], z);
      njson g = est_to_json(e);
      g["z"] = z;
      gzs.push_back(std::move(g));
    }
    row["gz"] = std::move(gzs);
    if (eigen_ok) {
      const auto& eig = gscan.settings[i];
      row["lambda_min"] = est_to_json(eig.est);
      row["Z"] = eig.zvec;
      row["mu_min"] = est_to_json(multinomial_test(signal[i]).mu_min);
    }
    if (!args.z_vectors.empty()) {
      njson customs = njson::array();
      for (const auto& zv : args.z_vectors) {
        const ZVector zvec{zv};
        njson c;
        c["Z"] = zv;
        if (signal[i].events) {
          c["estimate"] = est_to_json(generating_function(*signal[i].events, zvec));
        } else if (signal[i].exact) {
          c["estimate"] =
              est_to_json(EstimateWithError::exact(generating_function(*signal[i].exact, zvec)));
        }
        customs.push_back(std::move(c));
      }
      row["custom_Z"] = std::move(customs);
    }
    settings.push_back(std::move(row));
  }
  report["settings"] = std::move(settings);

  njson summary;
  const auto cal = di_calibration(vacuum);
  summary["calibration"] =
      njson{{"slope", cal.slope}, {"intercept", cal.intercept}, {"max_residual", cal.max_residual}};
  if (eigen_ok) {
    const auto& best = gscan.best();
    summary["g_min"] = est_to_json(best.est);
    summary["g_min_setting"] = best.index;
    summary["g_min_beta2"] = best.beta2;
    summary["g_min_Z"] = best.zvec;
    summary["g_min_negative"] = best.est.mean < 0.0;

    // sub-multinomial test at the smallest LO amplitude
    std::size_t origin = 0;
    for (std::size_t i = 1; i < signal.size(); ++i)
      if (signal[i].beta2 < signal[origin].beta2) origin = i;
    const auto mu = multinomial_test(signal[origin]);
    summary["mu_min"] = est_to_json(mu.mu_min);
    summary["mu_min_setting"] = signal[origin].index;
    summary["mu_min_negative"] = mu.mu_min.mean < 0.0;

    if (args.bootstrap > 0) {
      njson boot;
      boot["resamples"] = args.bootstrap;
      boot["method"] = "tuple resampling";
      const auto& at = signal[gscan.argmin];
      if (at.events) {
        boot["g_min_sigma"] = bootstrap_eigen_sigma(*at.events, EigenStatistic::lambda_min,
                                                    args.bootstrap, ds.data.seed);
      }
      if (signal[origin].events) {
        boot["mu_min_sigma"] = bootstrap_eigen_sigma(*signal[origin].events,
                                                     EigenStatistic::mu_min, args.bootstrap,
                                                     ds.data.seed + 1);
      }
      summary["bootstrap"] = std::move(boot);
    }
  }
  report["summary"] = std::move(summary);

  write_text_atomic(args.output_path, report.dump(2) + "\n");
  std::cout << "wrote " << args.output_path << "\n";
}

namespace {

void analyze_fit(const AnalyzeArgs& args, const DatasetFile& ds) {
  const auto signal = setting_views(ds.data.signal, true);
  const auto vacuum = setting_views(ds.data.vacuum, true);
  const auto curve = make_gz_curve(signal, vacuum, args.z, RadialVariable::di_intensity);
  const auto vac_curve = make_gz_curve(vacuum, vacuum, args.z, RadialVariable::di_intensity);
  const auto vac_model = fit_vacuum(vac_curve);

  const int degree = args.k_h ? *args.k_h : ds.k_h.value_or(0);
  GaussPolyModel model;
  if (degree == 0 && !ds.k_h && !args.k_h) {
    model = fit_vacuum(curve);
  } else {
    model = fit_heralded(curve, degree, HeraldedFitOptions{vac_model.b, !args.free_b});
  }

  write_curve_csv(stem_path(args.output_stem, "_curve.csv"), curve);
  write_model_json(stem_path(args.output_stem, "_model.json"), model,
                   RadialVariable::di_intensity);
  write_model_json(stem_path(args.output_stem, "_vacuum_model.json"), vac_model,
                   RadialVariable::di_intensity);
  std::vector<double> xs;
  for (const auto& p : curve.points) xs.push_back(p.x);
  write_curve_csv(stem_path(args.output_stem, "_fit.csv"),
                  evaluate_model(model, RadialVariable::di_intensity, xs));
  std::cout << "fit: b=" << model.b << " residual=" << model.residual << "\n";
}

void analyze_predict(const AnalyzeArgs& args, const DatasetFile& ds) {
  const auto signal = setting_views(ds.data.signal, true);
  const auto vacuum = setting_views(ds.data.vacuum, true);
  const auto vac_curve = make_gz_curve(vacuum, vacuum, args.z, RadialVariable::di_intensity);
  const auto vac_model = fit_vacuum(vac_curve);
  const auto cal = di_calibration(vacuum);
  const double tr_ratio = std::norm(ds.config.t) / std::norm(ds.config.r);
  const auto xs = default_xs(vacuum);

  RadialCurve predicted;
  if (args.fock_m) {
    predicted = predict_fock_curve(*args.fock_m, vac_model, tr_ratio, cal.slope, xs);
    write_model_json(stem_path(args.output_stem, "_pred_model.json"),
                     predict_fock(*args.fock_m, vac_model, tr_ratio, cal.slope),
                     RadialVariable::di_intensity);
  } else {
    StateSpec state = StateSpec::vacuum();
    if (args.state_config_path) {
      state = load_config(*args.state_config_path).state;
    } else if (ds.signal_state) {
      state = *ds.signal_state;
    } else {
      state = ds.config.state;
    }
    predicted = predict_convolution(state, vac_model, tr_ratio, cal.slope, xs);
  }
  write_curve_csv(stem_path(args.output_stem, "_pred_curve.csv"), predicted);

  // agreement against the direct estimate on the same settings
  const auto direct = make_gz_curve(signal, vacuum, args.z, RadialVariable::di_intensity);
  write_curve_csv(stem_path(args.output_stem, "_direct_curve.csv"), direct);
  njson agreement;
  agreement["kind"] = "daps_agreement_report";
  agreement["z"] = args.z;
  njson rows = njson::array();
  int within = 0;
  for (std::size_t i = 0; i < direct.points.size(); ++i) {
    const auto& d = direct.points[i];
    const auto& p = predicted.points[i];
    const double delta = std::sqrt(d.y.delta * d.y.delta + p.y.delta * p.y.delta);
    const double zscore = delta > 0.0 ? (p.y.mean - d.y.mean) / delta : 0.0;
    // absolute floor so exact pipelines (delta ~ 0) compare sanely
    const double tol = 3.0 * delta + 1e-9 * std::max(1.0, std::abs(d.y.mean));
    if (std::abs(p.y.mean - d.y.mean) <= tol) ++within;
    rows.push_back(njson{{"setting", d.setting},
                         {"x", d.x},
                         {"direct", d.y.mean},
                         {"predicted", p.y.mean},
                         {"delta", delta},
                         {"zscore", zscore}});
  }
  agreement["settings"] = std::move(rows);
  agreement["within_3delta"] = within;
  agreement["total"] = direct.points.size();
  write_text_atomic(stem_path(args.output_stem, "_agreement.json"), agreement.dump(2) + "\n");
  std::cout << "predict: " << within << "/" << direct.points.size() << " settings within 3 delta\n";
}

void analyze_discriminate(const AnalyzeArgs& args, const std::vector<DatasetFile>& dss) {
  std::vector<RadialCurve> curves;
  std::vector<std::string> labels;
  for (std::size_t i = 0; i < dss.size(); ++i) {
    const auto signal = setting_views(dss[i].data.signal, true);
    const auto vacuum = setting_views(dss[i].data.vacuum, true);
    curves.push_back(make_gz_curve(signal, vacuum, args.z, RadialVariable::di_intensity));
    labels.push_back(dss[i].k_h ? "kh" + std::to_string(*dss[i].k_h)
                                : std::filesystem::path(args.dataset_paths[i]).stem().string());
  }
  const auto matrix = discrimination_matrix(curves);
  write_matrix_csv(stem_path(args.output_stem, "_discrimination.csv"), labels, matrix);
  std::cout << "wrote discrimination matrix (" << labels.size() << " states)\n";
}

void analyze_optimal_z(const AnalyzeArgs& args, const DatasetFile& ds) {
  const auto signal = setting_views(ds.data.signal, true);
  const auto result = optimal_z(signal, args.z_grid.value_or(ZGrid{}));
  njson j;
  j["kind"] = "daps_optimal_z";
  j["z"] = result.z;
  j["g0"] = est_to_json(result.g0);
  j["significance"] = result.significance;
  j["negative"] = result.negative;
  if (!result.negative) j["note"] = "no significant negativity on the grid";
  write_text_atomic(stem_path(args.output_stem, "_optimal_z.json"), j.dump(2) + "\n");
  std::cout << "optimal z = " << result.z << " (significance " << result.significance << ")\n";
}

}  // namespace

void run_analyze(const AnalyzeArgs& args) {
  if (args.dataset_paths.empty()) throw ConfigError("analyze: no dataset given");
  std::vector<DatasetFile> dss;
  for (const auto& p : args.dataset_paths) dss.push_back(read_dataset(p));

  if (args.mode == "fit") {
    analyze_fit(args, dss.front());
  } else if (args.mode == "predict") {
    analyze_predict(args, dss.front());
  } else if (args.mode == "discriminate") {
    analyze_discriminate(args, dss);
  } else if (args.mode == "optimal-z") {
    analyze_optimal_z(args, dss.front());
  } else {
    throw ConfigError("analyze: unknown mode '" + args.mode + "'");
  }
}

void run_report(const ReportArgs& args) {
  const DatasetFile ds = read_dataset(args.dataset_path);
  const auto signal = setting_views(ds.data.signal, true);
  const auto vacuum = setting_views(ds.data.vacuum, true);

  std::ostringstream out;
  out << "# Scan report\n\n";
  out << "dataset: " << args.dataset_path << "\n";
  out << "settings: " << signal.size() << ", trials/setting: " << ds.data.trials << "\n";
  if (ds.k_h) out << "heralding bin: " << *ds.k_h << " (p_herald=" << ds.herald_probability << ")\n";
  const auto cal = di_calibration(vacuum);
  out << "LO calibration: |beta_DI|^2 = " << cal.intercept << " + " << cal.slope
      << " * |beta|^2 (max residual " << cal.max_residual << ")\n\n";

  out << "| setting | |beta|^2 | |beta_DI|^2 | G_z (z=" << args.z << ") | delta |\n";
  out << "|---|---|---|---|---|\n";
  for (std::size_t i = 0; i < signal.size(); ++i) {
    const auto gz = daps_gz(signal[i], args.z);
    out << "| " << signal[i].index << " | " << signal[i].beta2 << " | "
        << di_intensity(vacuum[i]).mean << " | " << gz.mean << " | " << gz.delta << " |\n";
  }

  if (ds.data.shape.N == 2) {
    const auto gscan = g_min_scan(signal);
    const auto& best = gscan.best();
    out << "\ng_min = " << best.est.mean << " +- " << best.est.delta << " at setting "
        << best.index << "\n";
    std::size_t origin = 0;
    for (std::size_t i = 1; i < signal.size(); ++i)
      if (signal[i].beta2 < signal[origin].beta2) origin = i;
    const auto mu = multinomial_test(signal[origin]);
    out << "mu_min = " << mu.mu_min.mean << " +- " << mu.mu_min.delta << " at setting "
        << signal[origin].index << "\n";
  }
  write_text_atomic(args.output_path, out.str());
  std::cout << "wrote " << args.output_path << "\n";
}

int exit_code_for_current_exception() {
  try {
    throw;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const NumericError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumeric;
  }
}

}  // namespace daps::cli
