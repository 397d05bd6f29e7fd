#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "deepstop/errors.hpp"
#include "deepstop/model.hpp"
#include "deepstop/payoff.hpp"
#include "deepstop/time_grid.hpp"

namespace deepstop {

struct TrainPlanConfig {
  int batch = 8192;
  int steps_per_epoch = 300;
  int epochs = 1;              // interior steps; the terminal step trains 2x epochs
  double lr_base = 0.01;       // interior schedule base (decays over 500 steps)
  double lr_base_last = 0.01;  // terminal schedule base (decays over 1000 steps)
};

struct ExperimentConfig {
  std::string preset;  // source preset name, empty for ad-hoc configs
  ModelSpec model;
  PayoffSpec payoff;
  TimeGrid grid{1.0, 1, 1};
  std::vector<int> hidden = {32, 32};
  TrainPlanConfig train;
  std::size_t lower_samples = 1u << 21;
  std::size_t upper_samples = 1u << 15;
  std::uint64_t seed = 1;
  int threads = 1;
  std::string out_dir = "out";
};

// ---------------------------------------------------------------------------
// Presets
// ---------------------------------------------------------------------------

namespace detail {

inline Matrix strangle_vol_matrix() {
  Matrix m(5, 5);
  const double rows[5][5] = {{0.3024, 0.1354, 0.0722, 0.1367, 0.1641},
                             {0.1354, 0.2270, 0.0613, 0.1264, 0.1610},
                             {0.0722, 0.0613, 0.0717, 0.0884, 0.0699},
                             {0.1367, 0.1264, 0.0884, 0.2937, 0.1394},
                             {0.1641, 0.1610, 0.0699, 0.1394, 0.2535}};
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 5; ++j) m(i, j) = rows[i][j];
  return m;
}

inline ExperimentConfig geobask_preset(int d, std::vector<int> hidden, int batch, int steps, int epochs) {
  ExperimentConfig c;
  c.model = ModelSpec::black_scholes(d, 0.0, 0.02, 0.25, 0.75, 100.0);
  c.payoff = PayoffSpec(PayoffKind::GeometricBasketCall, 100.0, 0.0);
  c.grid = TimeGrid(2.0, 50, 32);
  c.hidden = std::move(hidden);
  c.train.batch = batch;
  c.train.steps_per_epoch = steps;
  c.train.epochs = epochs;
  return c;
}

inline ExperimentConfig maxcall_preset(int d, double spot) {
  ExperimentConfig c;
  c.model = ModelSpec::black_scholes(d, 0.05, 0.1, 0.2, 0.0, spot);
  c.payoff = PayoffSpec(PayoffKind::MaxCall, 100.0, 0.05);
  c.grid = TimeGrid(3.0, 100, 32);
  c.hidden = {64, 64};
  c.train.batch = 8192;
  c.train.steps_per_epoch = 400;
  c.train.epochs = 1;
  if (d == 10) c.train.lr_base_last = 0.1;
  return c;
}

inline ExperimentConfig heston_preset(double s0) {
  ExperimentConfig c;
  c.model = ModelSpec::heston(0.1, 5.0, 0.16, 0.9, 0.1, 0.0625);
  c.payoff = PayoffSpec(PayoffKind::HestonPut, 10.0, 0.1, s0);
  c.grid = TimeGrid(0.25, 50, 32);
  c.hidden = {64, 64};
  c.train.batch = 8192;
  c.train.steps_per_epoch = 200;
  c.train.epochs = 1;
  c.lower_samples = 1u << 22;
  return c;
}

inline void apply_reduced_scale(ExperimentConfig& c, int batch, int steps) {
  c.train.batch = batch;
  c.train.steps_per_epoch = steps;
  c.lower_samples = 1u << 17;
  c.upper_samples = 1u << 13;
  c.grid.substeps = 8;
}

}  // namespace detail

inline std::vector<std::string> preset_names() {
  return {"geobask-d3",        "geobask-d20",        "geobask-d100",  "geobask-d200",
          "strangle-d5",       "heston-s9",          "heston-s10",    "heston-s11",
          "maxcall-d2",        "maxcall-d2-90",      "maxcall-d2-110", "maxcall-d5",
          "maxcall-d5-90",     "maxcall-d5-110",     "maxcall-d10",   "maxcall-d10-90",
          "maxcall-d10-110",   "geobask-d3-reduced", "strangle-d5-reduced",
          "heston-s10-reduced", "maxcall-d2-reduced", "put-1d"};
}

inline ExperimentConfig make_preset(const std::string& name) {
  using namespace detail;
  ExperimentConfig c;
  if (name == "geobask-d3") {
    c = geobask_preset(3, {32, 32}, 8192, 300, 1);
  } else if (name == "geobask-d20") {
    c = geobask_preset(20, {64, 64}, 8192, 300, 1);
  } else if (name == "geobask-d100") {
    c = geobask_preset(100, {128, 128}, 8192, 100, 3);
  } else if (name == "geobask-d200") {
    c = geobask_preset(200, {128, 128}, 4096, 100, 4);
  } else if (name == "strangle-d5") {
    c.model = ModelSpec::black_scholes_matrix(5, 0.05, 0.0, strangle_vol_matrix(),
                                              std::vector<double>(5, 100.0));
    c.payoff = PayoffSpec(PayoffKind::StrangleSpread, 100.0, 0.05);
    c.grid = TimeGrid(1.0, 48, 32);
    c.hidden = {64, 64};
    c.train.batch = 8192;
    c.train.steps_per_epoch = 400;
    c.train.epochs = 1;
  } else if (name == "heston-s9") {
    c = heston_preset(9.0);
  } else if (name == "heston-s10") {
    c = heston_preset(10.0);
  } else if (name == "heston-s11") {
    c = heston_preset(11.0);
  } else if (name == "maxcall-d2" || name == "maxcall-d2-100") {
    c = maxcall_preset(2, 100.0);
  } else if (name == "maxcall-d2-90") {
    c = maxcall_preset(2, 90.0);
  } else if (name == "maxcall-d2-110") {
    c = maxcall_preset(2, 110.0);
  } else if (name == "maxcall-d5" || name == "maxcall-d5-100") {
    c = maxcall_preset(5, 100.0);
  } else if (name == "maxcall-d5-90") {
    c = maxcall_preset(5, 90.0);
  } else if (name == "maxcall-d5-110") {
    c = maxcall_preset(5, 110.0);
  } else if (name == "maxcall-d10" || name == "maxcall-d10-100") {
    c = maxcall_preset(10, 100.0);
  } else if (name == "maxcall-d10-90") {
    c = maxcall_preset(10, 90.0);
  } else if (name == "maxcall-d10-110") {
    c = maxcall_preset(10, 110.0);
  } else if (name == "geobask-d3-reduced") {
    c = geobask_preset(3, {32, 32}, 8192, 300, 2);
    apply_reduced_scale(c, 4096, 150);
  } else if (name == "strangle-d5-reduced") {
    c = make_preset("strangle-d5");
    apply_reduced_scale(c, 4096, 200);
  } else if (name == "heston-s10-reduced") {
    c = heston_preset(10.0);
    apply_reduced_scale(c, 4096, 100);
  } else if (name == "maxcall-d2-reduced") {
    c = maxcall_preset(2, 100.0);
    apply_reduced_scale(c, 4096, 150);
  } else if (name == "put-1d") {
    // Lab instance used by the bias and gradient-variance studies.
    c.model = ModelSpec::black_scholes(1, 0.05, 0.0, 0.25, 0.0, 100.0);
    c.payoff = PayoffSpec(PayoffKind::Put, 100.0, 0.05);
    c.grid = TimeGrid(0.5, 25, 8);
    c.hidden = {32, 32};
    c.train.batch = 2048;
    c.train.steps_per_epoch = 100;
    c.train.epochs = 1;
    c.lower_samples = 1u << 17;
    c.upper_samples = 1u << 13;
  } else {
    throw Error(ErrorCode::UnknownPreset, "unknown preset '" + name + "'");
  }
  c.preset = name;
  return c;
}

// ---------------------------------------------------------------------------
// Flat key=value config text
// ---------------------------------------------------------------------------

namespace detail {

inline std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::string fmt_vector(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ' ';
    s += fmt_double(v[i]);
  }
  return s;
}

inline std::string fmt_matrix(const Matrix& m) {
  std::string s;
  for (std::size_t i = 0; i < m.rows; ++i) {
    if (i) s += "; ";
    for (std::size_t j = 0; j < m.cols; ++j) {
      if (j) s += ' ';
      s += fmt_double(m(i, j));
    }
  }
  return s;
}

inline std::vector<double> parse_vector(const std::string& text, int line) {
  std::istringstream in(text);
  std::vector<double> v;
  double x;
  while (in >> x) v.push_back(x);
  if (v.empty()) throw Error(ErrorCode::ParseError, "line " + std::to_string(line) + ": expected numbers");
  return v;
}

inline Matrix parse_matrix(const std::string& text, int line) {
  std::vector<std::vector<double>> rows;
  std::string part;
  std::istringstream in(text);
  while (std::getline(in, part, ';')) rows.push_back(parse_vector(part, line));
  const std::size_t n = rows.size();
  Matrix m(n, rows.front().size());
  for (std::size_t i = 0; i < n; ++i) {
    if (rows[i].size() != m.cols)
      throw Error(ErrorCode::ParseError, "line " + std::to_string(line) + ": ragged matrix");
    for (std::size_t j = 0; j < m.cols; ++j) m(i, j) = rows[i][j];
  }
  return m;
}

}  // namespace detail

/// Canonical flat serialization; parse(serialize(c)) rebuilds an equivalent
/// config. Lines are sorted by key.
inline std::string serialize_config(const ExperimentConfig& c) {
  using detail::fmt_double;
  std::map<std::string, std::string> kv;
  if (!c.preset.empty()) kv["preset"] = c.preset;
  kv["model.kind"] = c.model.kind == ModelKind::BlackScholes ? "black-scholes" : "heston";
  kv["model.dim"] = std::to_string(c.model.dim);
  kv["model.rate"] = fmt_double(c.model.rate);
  kv["model.dividend"] = fmt_double(c.model.dividend);
  kv["model.x0"] = detail::fmt_vector(c.model.x0);
  if (c.model.kind == ModelKind::BlackScholes) {
    kv["model.vol_matrix"] = detail::fmt_matrix(c.model.vol);
    kv["model.corr_matrix"] = detail::fmt_matrix(c.model.correlation);
  } else {
    kv["model.kappa"] = fmt_double(c.model.kappa);
    kv["model.theta"] = fmt_double(c.model.theta_mean);
    kv["model.vol_of_vol"] = fmt_double(c.model.vol_of_vol);
    kv["model.rho"] = fmt_double(c.model.rho);
    kv["model.v0"] = fmt_double(c.model.x0[1]);
  }
  kv["payoff.kind"] = to_string(c.payoff.kind);
  kv["payoff.strike"] = fmt_double(c.payoff.strike);
  kv["payoff.rate"] = fmt_double(c.payoff.rate);
  kv["payoff.spot_scale"] = fmt_double(c.payoff.spot_scale);
  kv["grid.horizon"] = fmt_double(c.grid.horizon);
  kv["grid.steps"] = std::to_string(c.grid.steps);
  kv["grid.substeps"] = std::to_string(c.grid.substeps);
  {
    std::string h;
    for (std::size_t i = 0; i < c.hidden.size(); ++i) {
      if (i) h += ' ';
      h += std::to_string(c.hidden[i]);
    }
    kv["net.hidden"] = h;
  }
  kv["train.batch"] = std::to_string(c.train.batch);
  kv["train.steps_per_epoch"] = std::to_string(c.train.steps_per_epoch);
  kv["train.epochs"] = std::to_string(c.train.epochs);
  kv["train.lr_base"] = fmt_double(c.train.lr_base);
  kv["train.lr_base_last"] = fmt_double(c.train.lr_base_last);
  kv["bounds.lower_samples"] = std::to_string(c.lower_samples);
  kv["bounds.upper_samples"] = std::to_string(c.upper_samples);
  kv["seed"] = std::to_string(c.seed);
  kv["threads"] = std::to_string(c.threads);
  kv["out"] = c.out_dir;
  std::string text;
  for (const auto& [k, v] : kv) text += k + " = " + v + "\n";
  return text;
}

/// Hash of the numerical experiment identity: canonical serialization minus
/// seed, threads and output location.
inline std::uint64_t config_hash(const ExperimentConfig& c) {
  std::istringstream in(serialize_config(c));
  std::uint64_t h = 0xcbf29ce484222325ULL;
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind("seed", 0) == 0 || line.rfind("threads", 0) == 0 || line.rfind("out", 0) == 0)
      continue;
    for (char ch : line) {
      h ^= static_cast<unsigned char>(ch);
      h *= 0x100000001b3ULL;
    }
    h ^= '\n';
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline void validate_config(const ExperimentConfig& c) {
  std::vector<std::string> bad;
  if (c.model.dim < 1) bad.push_back("model.dim must be >= 1");
  if (c.grid.steps < 1) bad.push_back("grid.steps must be >= 1");
  if (c.grid.substeps < 1) bad.push_back("grid.substeps must be >= 1");
  if (c.grid.horizon <= 0) bad.push_back("grid.horizon must be positive");
  if (c.train.batch < 2) bad.push_back("train.batch must be >= 2");
  if (c.train.steps_per_epoch < 1) bad.push_back("train.steps_per_epoch must be >= 1");
  if (c.train.epochs < 1) bad.push_back("train.epochs must be >= 1");
  if (c.hidden.empty()) bad.push_back("net.hidden must name at least one layer");
  for (int h : c.hidden)
    if (h < 1) bad.push_back("hidden widths must be positive");
  if (c.lower_samples < 2) bad.push_back("bounds.lower_samples must be >= 2");
  if (c.upper_samples < 2) bad.push_back("bounds.upper_samples must be >= 2");
  if (c.payoff.strike <= 0) bad.push_back("payoff.strike must be positive");
  if (c.payoff.kind == PayoffKind::HestonPut && c.model.kind != ModelKind::Heston)
    bad.push_back("heston-put payoff requires the heston model");
  if (c.payoff.kind != PayoffKind::HestonPut && c.model.kind == ModelKind::Heston)
    bad.push_back("the heston model prices the heston-put payoff");
  if (c.payoff.kind == PayoffKind::Put && c.model.dim != 1)
    bad.push_back("vanilla put needs a one-dimensional model");
  if (!c.preset.empty()) {
    // Envelope of the published hyperparameter table.
    if (c.train.batch > 16384) bad.push_back("train.batch outside preset range (<= 16384)");
    if (c.train.epochs > 8) bad.push_back("train.epochs outside preset range (<= 8)");
    for (int h : c.hidden)
      if (h > 256) bad.push_back("hidden width outside preset range (<= 256)");
  }
  if (!bad.empty()) {
    std::string msg = "invalid config:";
    for (const auto& b : bad) msg += "\n  - " + b;
    throw Error(ErrorCode::ValidationError, msg);
  }
}

/// Parses flat key=value text. `base` supplies defaults (preset inheritance);
/// a `preset = name` line inside the text also works and is applied first.
inline ExperimentConfig parse_config_text(const std::string& text, const ExperimentConfig* base = nullptr) {
  struct Entry {
    std::string value;
    int line;
  };
  std::map<std::string, Entry> kv;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash_pos = line.find('#');
    if (hash_pos != std::string::npos) line.erase(hash_pos);
    auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw Error(ErrorCode::ParseError,
                  "line " + std::to_string(lineno) + ", col " + std::to_string(line.size()) +
                      ": expected 'key = value'");
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty())
      throw Error(ErrorCode::ParseError, "line " + std::to_string(lineno) + ", col 1: empty key");
    kv[key] = {value, lineno};
  }

  ExperimentConfig c;
  if (auto it = kv.find("preset"); it != kv.end()) {
    c = make_preset(it->second.value);
    kv.erase(it);
  } else if (base) {
    c = *base;
  }

  // Raw model fields that need assembling before finalize().
  std::string kind = c.model.kind == ModelKind::Heston ? "heston" : "black-scholes";
  int dim = c.model.dim;
  double rate = c.model.rate, dividend = c.model.dividend;
  double sigma = -1.0, pair_rho = c.model.kind == ModelKind::Heston ? c.model.rho : 0.0;
  Matrix vol = c.model.vol, corr = c.model.correlation;
  bool vol_set = false, corr_set = false, sigma_set = false, rho_set = false;
  std::vector<double> x0 = c.model.x0;

  // A dimension override keeps an inherited scalar vol / uniform correlation.
  auto uniform_diag = [](const Matrix& m) -> double {
    if (m.rows == 0) return -1.0;
    const double d0 = m(0, 0);
    for (std::size_t i = 0; i < m.rows; ++i)
      for (std::size_t j = 0; j < m.cols; ++j)
        if (m(i, j) != (i == j ? d0 : 0.0)) return -1.0;
    return d0;
  };
  auto uniform_offdiag = [](const Matrix& m) -> double {
    if (m.rows == 0) return -2.0;
    const double r0 = m.rows > 1 ? m(0, 1) : 0.0;
    for (std::size_t i = 0; i < m.rows; ++i)
      for (std::size_t j = 0; j < m.cols; ++j)
        if (m(i, j) != (i == j ? 1.0 : r0)) return -2.0;
    return r0;
  };
  const double base_sigma = uniform_diag(vol);
  const double base_rho = uniform_offdiag(corr);
  double kappa = c.model.kappa, theta = c.model.theta_mean, vov = c.model.vol_of_vol;
  double v0 = c.model.kind == ModelKind::Heston && x0.size() > 1 ? x0[1] : 0.0;

  auto to_int = [](const Entry& e) {
    try {
      return std::stoi(e.value);
    } catch (...) {
      throw Error(ErrorCode::ParseError, "line " + std::to_string(e.line) + ": expected integer");
    }
  };
  auto to_u64 = [](const Entry& e) {
    try {
      return static_cast<std::uint64_t>(std::stoull(e.value));
    } catch (...) {
      throw Error(ErrorCode::ParseError, "line " + std::to_string(e.line) + ": expected integer");
    }
  };
  auto to_double = [](const Entry& e) {
    try {
      return std::stod(e.value);
    } catch (...) {
      throw Error(ErrorCode::ParseError, "line " + std::to_string(e.line) + ": expected number");
    }
  };

  for (const auto& [key, entry] : kv) {
    const std::string& v = entry.value;
    if (key == "model.kind") {
      if (v != "black-scholes" && v != "heston")
        throw Error(ErrorCode::ParseError, "line " + std::to_string(entry.line) + ": unknown model kind '" + v + "'");
      kind = v;
    } else if (key == "model.dim") {
      dim = to_int(entry);
    } else if (key == "model.rate") {
      rate = to_double(entry);
    } else if (key == "model.dividend") {
      dividend = to_double(entry);
    } else if (key == "model.sigma") {
      sigma = to_double(entry);
      sigma_set = true;
    } else if (key == "model.rho") {
      pair_rho = to_double(entry);
      rho_set = true;
    } else if (key == "model.vol_matrix") {
      vol = detail::parse_matrix(v, entry.line);
      vol_set = true;
    } else if (key == "model.corr_matrix") {
      corr = detail::parse_matrix(v, entry.line);
      corr_set = true;
    } else if (key == "model.x0") {
      x0 = detail::parse_vector(v, entry.line);
    } else if (key == "model.kappa") {
      kappa = to_double(entry);
    } else if (key == "model.theta") {
      theta = to_double(entry);
    } else if (key == "model.vol_of_vol") {
      vov = to_double(entry);
    } else if (key == "model.v0") {
      v0 = to_double(entry);
    } else if (key == "payoff.kind") {
      if (v == "geometric-basket-call") c.payoff.kind = PayoffKind::GeometricBasketCall;
      else if (v == "strangle-spread") c.payoff.kind = PayoffKind::StrangleSpread;
      else if (v == "heston-put") c.payoff.kind = PayoffKind::HestonPut;
      else if (v == "max-call") c.payoff.kind = PayoffKind::MaxCall;
      else if (v == "put") c.payoff.kind = PayoffKind::Put;
      else
        throw Error(ErrorCode::ParseError, "line " + std::to_string(entry.line) + ": unknown payoff kind '" + v + "'");
    } else if (key == "payoff.strike") {
      c.payoff.strike = to_double(entry);
    } else if (key == "payoff.rate") {
      c.payoff.rate = to_double(entry);
    } else if (key == "payoff.spot_scale") {
      c.payoff.spot_scale = to_double(entry);
    } else if (key == "grid.horizon") {
      c.grid.horizon = to_double(entry);
    } else if (key == "grid.steps") {
      c.grid.steps = to_int(entry);
    } else if (key == "grid.substeps") {
      c.grid.substeps = to_int(entry);
    } else if (key == "net.width") {
      const int w = to_int(entry);
      c.hidden = {w, w};
    } else if (key == "net.hidden") {
      const auto ws = detail::parse_vector(v, entry.line);
      c.hidden.clear();
      for (double w : ws) c.hidden.push_back(static_cast<int>(w));
    } else if (key == "train.batch") {
      c.train.batch = to_int(entry);
    } else if (key == "train.steps_per_epoch") {
      c.train.steps_per_epoch = to_int(entry);
    } else if (key == "train.epochs") {
      c.train.epochs = to_int(entry);
    } else if (key == "train.lr_base") {
      c.train.lr_base = to_double(entry);
    } else if (key == "train.lr_base_last") {
      c.train.lr_base_last = to_double(entry);
    } else if (key == "bounds.lower_samples") {
      c.lower_samples = to_u64(entry);
    } else if (key == "bounds.upper_samples") {
      c.upper_samples = to_u64(entry);
    } else if (key == "seed") {
      c.seed = to_u64(entry);
    } else if (key == "threads") {
      c.threads = to_int(entry);
    } else if (key == "out") {
      c.out_dir = v;
    } else {
      throw Error(ErrorCode::ParseError, "line " + std::to_string(entry.line) + ": unknown key '" + key + "'");
    }
  }

  // Assemble the model.
  ModelSpec m;
  if (kind == "heston") {
    m = ModelSpec::heston(rate, kappa, theta, vov, pair_rho, v0);
  } else {
    m.kind = ModelKind::BlackScholes;
    m.dim = dim;
    m.rate = rate;
    m.dividend = dividend;
    if (sigma_set) {
      m.vol = Matrix::identity(dim);
      for (int i = 0; i < dim; ++i) m.vol(i, i) = sigma;
    } else if (vol_set || static_cast<int>(vol.rows) == dim) {
      m.vol = vol;
    } else if (base_sigma > 0.0) {
      m.vol = Matrix::identity(dim);
      for (int i = 0; i < dim; ++i) m.vol(i, i) = base_sigma;
    } else {
      throw Error(ErrorCode::ValidationError, "black-scholes model needs model.sigma or model.vol_matrix");
    }
    if (rho_set) {
      m.correlation = Matrix::constant_correlation(dim, pair_rho);
    } else if (corr_set || static_cast<int>(corr.rows) == dim) {
      m.correlation = corr;
    } else if (base_rho > -1.5) {
      m.correlation = Matrix::constant_correlation(dim, base_rho);
    } else {
      m.correlation = Matrix::identity(dim);
    }
    if (static_cast<int>(x0.size()) != dim && !x0.empty()) {
      bool uniform = true;
      for (double v : x0)
        if (v != x0[0]) uniform = false;
      if (uniform) x0.assign(dim, x0[0]);
    }
    m.x0 = x0;
    m.finalize();
  }
  c.model = m;
  validate_config(c);
  return c;
}

/// Loads a preset by name or a config file by path.
inline ExperimentConfig load_config(const std::string& name_or_path) {
  // Bare preset name first, file path second.
  try {
    return make_preset(name_or_path);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::UnknownPreset) throw;
  }
  std::ifstream f(name_or_path);
  if (!f)
    throw Error(ErrorCode::UnknownPreset,
                "'" + name_or_path + "' is neither a preset nor a readable config file");
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config_text(ss.str());
}

}  // namespace deepstop
