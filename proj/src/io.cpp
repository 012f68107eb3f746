#include "daps/io.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "daps/errors.hpp"

namespace daps {

using njson = nlohmann::ordered_json;

namespace {

const njson& require(const njson& j, const char* field, const char* where) {
  const auto it = j.find(field);
  if (it == j.end())
    throw ConfigError(std::string(where) + ": missing field '" + field + "'");
  return *it;
}

njson complex_to_json(Complex c) { return njson{{"re", c.real()}, {"im", c.imag()}}; }

Complex complex_from_json(const njson& j, const char* where) {
  if (!j.is_object()) throw ConfigError(std::string(where) + ": complex value must be {re, im}");
  return Complex{require(j, "re", where).get<double>(), require(j, "im", where).get<double>()};
}

njson state_to_json(const StateSpec& s) {
  njson j;
  if (s.components.size() == 1 && s.components[0].first == 1.0) {
    const auto& c = s.components[0].second;
    switch (c.kind) {
      case StateSpec::Kind::vacuum: j["kind"] = "vacuum"; break;
      case StateSpec::Kind::fock:
        j["kind"] = "fock";
        j["m"] = c.m;
        break;
      case StateSpec::Kind::coherent:
        j["kind"] = "coherent";
        j["alpha"] = complex_to_json(c.alpha);
        break;
      case StateSpec::Kind::thermal:
        j["kind"] = "thermal";
        j["nbar"] = c.nbar;
        break;
    }
  } else {
    j["kind"] = "mixture";
    njson comps = njson::array();
    for (const auto& [w, c] : s.components) {
      StateSpec single;
      single.components.push_back({1.0, c});
      comps.push_back(njson{{"weight", w}, {"state", state_to_json(single)}});
    }
    j["components"] = std::move(comps);
  }
  if (s.phase_randomized) j["phase_randomized"] = true;
  return j;
}

StateSpec state_from_json(const njson& j, const char* where) {
  if (!j.is_object()) throw ConfigError(std::string(where) + ": state must be an object");
  const std::string kind = require(j, "kind", where).get<std::string>();
  StateSpec s;
  if (kind == "vacuum") {
    s = StateSpec::vacuum();
  } else if (kind == "fock") {
    s = StateSpec::fock(require(j, "m", where).get<int>());
  } else if (kind == "coherent") {
    s = StateSpec::coherent(complex_from_json(require(j, "alpha", where), where));
  } else if (kind == "thermal") {
    s = StateSpec::thermal(require(j, "nbar", where).get<double>());
  } else if (kind == "mixture") {
    std::vector<std::pair<double, StateSpec>> parts;
    for (const auto& comp : require(j, "components", where)) {
      parts.push_back({require(comp, "weight", where).get<double>(),
                       state_from_json(require(comp, "state", where), where)});
    }
    s = StateSpec::mixture(std::move(parts));
  } else {
    throw ConfigError(std::string(where) + ": unknown state kind '" + kind + "'");
  }
  if (j.contains("phase_randomized")) s.phase_randomized = j["phase_randomized"].get<bool>();
  return s;
}

njson detector_to_json(const DetectorSpec& d) {
  return njson{{"model", d.model}, {"eta", d.eta}, {"eta2", d.eta2}, {"K", d.K}};
}

DetectorSpec detector_from_json(const njson& j, const char* where) {
  DetectorSpec d;
  d.model = require(j, "model", where).get<std::string>();
  d.eta = require(j, "eta", where).get<double>();
  d.eta2 = j.value("eta2", 0.0);
  d.K = j.value("K", d.model == "onoff" ? 1 : 4);
  return d;
}

njson config_to_json(const ExperimentConfig& cfg) {
  njson j;
  j["schema_version"] = kSchemaVersion;
  j["seed"] = cfg.seed;
  j["trials"] = cfg.trials;
  j["n_max"] = cfg.n_max;
  j["state"] = state_to_json(cfg.state);
  j["frontend"] = njson{{"t", complex_to_json(cfg.t)}, {"r", complex_to_json(cfg.r)}};
  njson mux{{"S", cfg.S}};
  if (cfg.imbalance) {
    njson imb;
    imb["weights"] = cfg.imbalance->weights;
    if (!cfg.imbalance->eta_scale.empty()) imb["eta_scale"] = cfg.imbalance->eta_scale;
    mux["imbalance"] = std::move(imb);
  }
  j["multiplex"] = std::move(mux);
  j["detector"] = detector_to_json(cfg.detector);
  j["lo_grid"] = njson{{"beta2", cfg.beta2_grid}};
  if (cfg.heralding) {
    j["heralding"] = njson{{"lambda", cfg.heralding->lambda},
                           {"transmittance", cfg.heralding->transmittance},
                           {"khs", cfg.heralding->khs},
                           {"detector", detector_to_json(cfg.heralding->detector)}};
  }
  return j;
}

ExperimentConfig config_from_json(const njson& j) {
  const char* where = "config";
  const int version = require(j, "schema_version", where).get<int>();
  if (version != kSchemaVersion)
    throw ConfigError("config: unsupported schema_version " + std::to_string(version));

  ExperimentConfig cfg;
  cfg.seed = require(j, "seed", where).get<std::uint64_t>();
  cfg.trials = j.value("trials", std::uint64_t{0});
  cfg.n_max = j.value("n_max", 0);
  cfg.state = state_from_json(require(j, "state", where), "config.state");

  const auto& fe = require(j, "frontend", where);
  if (fe.contains("t2")) {
    const double t2 = fe["t2"].get<double>();
    if (t2 < 0.0 || t2 > 1.0) throw ConfigError("config.frontend: t2 outside [0,1]");
    cfg.t = std::sqrt(t2);
    cfg.r = std::sqrt(1.0 - t2);
  } else {
    cfg.t = complex_from_json(require(fe, "t", "config.frontend"), "config.frontend.t");
    cfg.r = complex_from_json(require(fe, "r", "config.frontend"), "config.frontend.r");
  }

  const auto& mux = require(j, "multiplex", where);
  cfg.S = require(mux, "S", "config.multiplex").get<int>();
  if (mux.contains("imbalance")) {
    ImbalanceConfig imb;
    imb.weights = require(mux["imbalance"], "weights", "config.multiplex.imbalance")
                      .get<std::vector<double>>();
    if (mux["imbalance"].contains("eta_scale"))
      imb.eta_scale = mux["imbalance"]["eta_scale"].get<std::vector<double>>();
    cfg.imbalance = std::move(imb);
  }

  cfg.detector = detector_from_json(require(j, "detector", where), "config.detector");

  const auto& grid = require(j, "lo_grid", where);
  if (grid.contains("beta2")) {
    cfg.beta2_grid = grid["beta2"].get<std::vector<double>>();
  } else {
    const double start = grid.value("beta2_start", 0.0);
    const double step = require(grid, "beta2_step", "config.lo_grid").get<double>();
    const int settings = require(grid, "settings", "config.lo_grid").get<int>();
    if (settings < 1) throw ConfigError("config.lo_grid: settings must be >= 1");
    for (int i = 0; i < settings; ++i) cfg.beta2_grid.push_back(start + step * i);
  }
  if (cfg.beta2_grid.empty()) throw ConfigError("config.lo_grid: empty grid");

  if (j.contains("heralding")) {
    HeraldingConfig h;
    const auto& hj = j["heralding"];
    h.lambda = require(hj, "lambda", "config.heralding").get<double>();
    h.transmittance = require(hj, "transmittance", "config.heralding").get<double>();
    h.khs = require(hj, "khs", "config.heralding").get<std::vector<int>>();
    h.detector = hj.contains("detector")
                     ? detector_from_json(hj["detector"], "config.heralding.detector")
                     : cfg.detector;
    if (h.khs.empty()) throw ConfigError("config.heralding: khs must be nonempty");
    cfg.heralding = std::move(h);
  }
  return cfg;
}

njson table_to_json(const Table& t) {
  njson entries = njson::array();
  std::vector<int> tuple(t.shape.N);
  for (std::size_t idx = 0; idx < t.v.size(); ++idx) {
    if (t.v[idx] == 0.0) continue;
    t.shape.decode(idx, tuple);
    entries.push_back(njson::array({njson(tuple), njson(t.v[idx])}));
  }
  return entries;
}

Table table_from_json(const njson& j, TableShape shape, const char* where) {
  Table t(shape);
  for (const auto& e : j) {
    if (!e.is_array() || e.size() != 2)
      throw ConfigError(std::string(where) + ": malformed table entry");
    const auto tuple = e[0].get<std::vector<int>>();
    if (static_cast<int>(tuple.size()) != shape.N)
      throw ConfigError(std::string(where) + ": tuple length mismatch");
    for (int k : tuple)
      if (k < 0 || k > shape.K) throw ConfigError(std::string(where) + ": outcome out of range");
    t.v[shape.index(tuple)] = e[1].get<double>();
  }
  return t;
}

njson counts_to_json(const CoincidenceCounts& c) {
  njson entries = njson::array();
  std::vector<int> tuple(c.shape.N);
  for (std::size_t idx = 0; idx < c.counts.size(); ++idx) {
    if (c.counts[idx] == 0) continue;
    c.shape.decode(idx, tuple);
    entries.push_back(njson::array({njson(tuple), njson(c.counts[idx])}));
  }
  return njson{{"total", c.total}, {"entries", std::move(entries)}};
}

CoincidenceCounts counts_from_json(const njson& j, TableShape shape, const char* where) {
  CoincidenceCounts c(shape);
  c.total = require(j, "total", where).get<std::uint64_t>();
  std::uint64_t sum = 0;
  for (const auto& e : require(j, "entries", where)) {
    const auto tuple = e[0].get<std::vector<int>>();
    if (static_cast<int>(tuple.size()) != shape.N)
      throw ConfigError(std::string(where) + ": tuple length mismatch");
    const std::uint64_t n = e[1].get<std::uint64_t>();
    c.counts[shape.index(tuple)] = n;
    sum += n;
  }
  if (sum != c.total) throw ConfigError(std::string(where) + ": counts do not sum to total");
  return c;
}

njson setting_to_json(const ScanSetting& s) {
  njson j{{"setting", s.index}, {"beta2", s.beta2}};
  if (s.exact) j["exact"] = table_to_json(*s.exact);
  if (s.events) j["events"] = counts_to_json(*s.events);
  return j;
}

ScanSetting setting_from_json(const njson& j, TableShape shape, const char* where) {
  ScanSetting s;
  s.index = require(j, "setting", where).get<int>();
  s.beta2 = require(j, "beta2", where).get<double>();
  if (j.contains("exact")) s.exact = table_from_json(j["exact"], shape, where);
  if (j.contains("events")) s.events = counts_from_json(j["events"], shape, where);
  return s;
}

njson parse_file(const std::string& path, const char* what) {
  std::ifstream in(path);
  if (!in) throw IoError(std::string(what) + ": cannot open " + path);
  try {
    njson j;
    in >> j;
    return j;
  } catch (const std::exception& e) {
    throw ConfigError(std::string(what) + ": JSON parse failure in " + path + ": " + e.what());
  }
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

ExperimentConfig load_config(const std::string& path) {
  return config_from_json(parse_file(path, "config"));
}

ExperimentConfig config_from_json_text(const std::string& text) {
  try {
    return config_from_json(njson::parse(text));
  } catch (const njson::exception& e) {
    throw ConfigError(std::string("config: JSON parse failure: ") + e.what());
  }
}

std::string config_to_json_text(const ExperimentConfig& cfg) { return config_to_json(cfg).dump(2); }

void write_dataset(const std::string& path, const DatasetFile& ds) {
  njson j;
  j["schema_version"] = kSchemaVersion;
  j["kind"] = "daps_scan_dataset";
  njson meta;
  meta["seed"] = ds.data.seed;
  meta["trials"] = ds.data.trials;
  meta["N"] = ds.data.shape.N;
  meta["K"] = ds.data.shape.K;
  meta["config"] = config_to_json(ds.config);
  if (ds.k_h) {
    meta["k_h"] = *ds.k_h;
    meta["herald_probability"] = ds.herald_probability;
  }
  if (ds.signal_state) meta["signal_state"] = state_to_json(*ds.signal_state);
  j["meta"] = std::move(meta);

  njson signal = njson::array(), vacuum = njson::array();
  for (const auto& s : ds.data.signal) signal.push_back(setting_to_json(s));
  for (const auto& s : ds.data.vacuum) vacuum.push_back(setting_to_json(s));
  j["signal"] = std::move(signal);
  j["vacuum"] = std::move(vacuum);

  write_text_atomic(path, j.dump(2) + "\n");
}

DatasetFile read_dataset(const std::string& path) {
  const njson j = parse_file(path, "dataset");
  const char* where = "dataset";
  if (require(j, "kind", where).get<std::string>() != "daps_scan_dataset")
    throw ConfigError("dataset: wrong file kind");
  if (require(j, "schema_version", where).get<int>() != kSchemaVersion)
    throw ConfigError("dataset: unsupported schema version");

  DatasetFile ds;
  const auto& meta = require(j, "meta", where);
  ds.config = config_from_json(require(meta, "config", "dataset.meta"));
  ds.data.seed = require(meta, "seed", "dataset.meta").get<std::uint64_t>();
  ds.data.trials = require(meta, "trials", "dataset.meta").get<std::uint64_t>();
  ds.data.shape.N = require(meta, "N", "dataset.meta").get<int>();
  ds.data.shape.K = require(meta, "K", "dataset.meta").get<int>();
  if (meta.contains("k_h")) {
    ds.k_h = meta["k_h"].get<int>();
    ds.herald_probability = meta.value("herald_probability", 0.0);
  }
  if (meta.contains("signal_state"))
    ds.signal_state = state_from_json(meta["signal_state"], "dataset.meta.signal_state");

  for (const auto& s : require(j, "signal", where))
    ds.data.signal.push_back(setting_from_json(s, ds.data.shape, "dataset.signal"));
  for (const auto& s : require(j, "vacuum", where))
    ds.data.vacuum.push_back(setting_from_json(s, ds.data.shape, "dataset.vacuum"));
  return ds;
}

void write_curve_csv(const std::string& path, const RadialCurve& curve) {
  std::ostringstream out;
  out << "setting,x,mean,sigma,eps,delta\n";
  for (const auto& p : curve.points) {
    out << p.setting << ',' << format_double(p.x) << ',' << format_double(p.y.mean) << ','
        << format_double(p.y.sigma) << ',' << format_double(p.y.eps) << ','
        << format_double(p.y.delta) << '\n';
  }
  write_text_atomic(path, out.str());
}

RadialCurve read_curve_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("curve: cannot open " + path);
  RadialCurve curve;
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("curve: empty file " + path);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    RadialPoint p;
    char comma;
    std::istringstream row(line);
    row >> p.setting >> comma >> p.x >> comma >> p.y.mean >> comma >> p.y.sigma >> comma >>
        p.y.eps >> comma >> p.y.delta;
    if (row.fail()) throw ConfigError("curve: malformed row in " + path);
    curve.points.push_back(p);
  }
  return curve;
}

void write_matrix_csv(const std::string& path, const std::vector<std::string>& labels,
                      const SymMatrix& m) {
  if (static_cast<int>(labels.size()) != m.dim)
    throw std::invalid_argument("write_matrix_csv: label count mismatch");
  std::ostringstream out;
  out << "label";
  for (const auto& l : labels) out << ',' << l;
  out << '\n';
  for (int i = 0; i < m.dim; ++i) {
    out << labels[i];
    for (int j = 0; j < m.dim; ++j) out << ',' << format_double(m.at(i, j));
    out << '\n';
  }
  write_text_atomic(path, out.str());
}

void write_model_json(const std::string& path, const GaussPolyModel& model, RadialVariable var) {
  njson j;
  j["schema_version"] = kSchemaVersion;
  j["kind"] = "daps_gausspoly_model";
  j["variable"] = var == RadialVariable::di_intensity ? "di_intensity" : "raw_beta2";
  j["b"] = model.b;
  j["f"] = model.f;
  j["residual"] = model.residual;
  if (!model.sigma.empty()) j["sigma"] = model.sigma;
  write_text_atomic(path, j.dump(2) + "\n");
}

GaussPolyModel read_model_json(const std::string& path, RadialVariable* var_out) {
  const njson j = parse_file(path, "model");
  if (require(j, "kind", "model").get<std::string>() != "daps_gausspoly_model")
    throw ConfigError("model: wrong file kind");
  GaussPolyModel m;
  m.b = require(j, "b", "model").get<double>();
  m.f = require(j, "f", "model").get<std::vector<double>>();
  m.residual = j.value("residual", 0.0);
  if (j.contains("sigma")) m.sigma = j["sigma"].get<std::vector<double>>();
  if (var_out) {
    *var_out = require(j, "variable", "model").get<std::string>() == "raw_beta2"
                   ? RadialVariable::raw_beta2
                   : RadialVariable::di_intensity;
  }
  return m;
}

void write_text_atomic(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp + " for writing");
    out << content;
    if (!out) throw IoError("write failure on " + tmp);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename " + tmp + " -> " + path + ": " + ec.message());
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace daps
