// Copyright 2026 The dickedft Authors
// SPDX-License-Identifier: Apache-2.0

/**
 * @file config.hpp
 * @brief JSON run configuration for the dickedft driver.
 *
 * Every section is optional except where a command needs it. Unknown keys are
 * rejected at every level. to_json() emits the normalized configuration with
 * all defaults filled in, and parse_config(to_json(c)) reproduces c.
 */

#pragma once

#include <cstdint>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "dickedft/error.hpp"
#include "dickedft/model.hpp"
#include "json.hpp"

namespace dickedft::cli {

using nlohmann::json;

struct TruncationConfig {
  std::optional<int> fock_cutoff;  ///< fixed K; otherwise grow until energy_tol
  double energy_tol = 1e-11;
  int initial_cutoff = 8;
};

struct OutputConfig {
  std::optional<std::string> dir;
  std::optional<std::vector<std::string>> formats;
};

struct SpectrumConfig {
  int eigenpairs = 1;
  std::optional<Vector> v;
  std::optional<Vector> j;
};

struct CurveConfig {
  std::vector<double> lambdas{0.0, 0.5, 1.0, 2.0};
  double sigma_min = -0.99;
  double sigma_max = 0.99;
  int points = 41;
  std::optional<Vector> xi;
  std::optional<Vector> direction;  ///< σ = s·direction for N > 1
  std::string method = "lieb";  ///< lieb | search
  double tol = 1e-10;
  double boundary_eps = 1e-6;
};

struct FunctionalConfig {
  Vector sigma;
  Vector xi;
  std::string method = "both";  ///< lieb | search | both
  double tol = 1e-10;
  int restarts = 5;
};

struct AdiabaticConfig {
  Vector sigma;
  double quad_tol = 1e-6;
  double tol = 1e-10;
  bool chained = true;
  int max_panels = 64;
};

struct RegularSetConfig {
  int n_spins = 2;
  std::size_t samples = 200000;
  std::vector<Vector> points;
};

struct DiagnoseConfig {
  std::string battery = "default";  ///< default | model
};

struct HkScanConfig {
  std::vector<double> v_values{-1.0, -0.5, 0.0, 0.5, 1.0};
  std::vector<double> j_values{-1.0, -0.5, 0.0, 0.5, 1.0};
  double tol = 1e-7;
};

struct RunConfig {
  std::optional<ModelParams> model;
  TruncationConfig truncation;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  OutputConfig output;
  std::optional<SpectrumConfig> spectrum;
  std::optional<CurveConfig> curve;
  std::optional<FunctionalConfig> functional;
  std::optional<AdiabaticConfig> adiabatic;
  std::optional<RegularSetConfig> regular_set;
  std::optional<DiagnoseConfig> diagnose;
  std::optional<HkScanConfig> hk_scan;

  const ModelParams& require_model() const {
    if (!model) throw ConfigError("config has no \"model\" section");
    return *model;
  }
};

inline const std::set<std::string>& known_formats() {
  static const std::set<std::string> f{"csv", "json", "svg"};
  return f;
}

namespace detail {

inline void check_keys(const json& j, const std::set<std::string>& allowed,
                       const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& item : j.items()) {
    if (!allowed.count(item.key())) {
      throw ConfigError("unknown key \"" + item.key() + "\" in " + where);
    }
  }
}

template <class T>
T get(const json& j, const std::string& key, const std::string& where) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("bad or missing \"" + key + "\" in " + where);
  }
}

template <class T>
void get_to(const json& j, const std::string& key, const std::string& where, T& out) {
  if (j.contains(key)) out = get<T>(j, key, where);
}

inline Vector vector_from(const json& j, const std::string& what) {
  if (!j.is_array()) throw ConfigError(what + " must be an array of numbers");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw ConfigError(what + " must be an array of numbers");
    v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  }
  return v;
}

inline json vector_json(const Vector& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

inline void check_size(const Vector& v, Eigen::Index n, const std::string& what) {
  if (v.size() != n) {
    throw ConfigError(what + " must have " + std::to_string(n) + " entries");
  }
}

inline ModelParams parse_model(const json& j) {
  check_keys(j, {"n_spins", "n_modes", "coupling", "tunneling"}, "model");
  ModelParams p;
  p.n_spins = get<int>(j, "n_spins", "model");
  p.n_modes = get<int>(j, "n_modes", "model");
  if (p.n_spins < 1 || p.n_modes < 1) throw ConfigError("n_spins and n_modes must be positive");
  const json& c = j.at("coupling");
  if (!c.is_array() || c.size() != static_cast<std::size_t>(p.n_modes)) {
    throw ConfigError("model.coupling must be n_modes rows of n_spins numbers");
  }
  p.coupling.resize(p.n_modes, p.n_spins);
  for (int m = 0; m < p.n_modes; ++m) {
    const Vector row = vector_from(c[static_cast<std::size_t>(m)], "model.coupling row");
    check_size(row, p.n_spins, "model.coupling row");
    p.coupling.row(m) = row.transpose();
  }
  if (!j.contains("tunneling")) throw ConfigError("missing \"tunneling\" in model");
  p.tunneling = vector_from(j.at("tunneling"), "model.tunneling");
  p.validate();
  return p;
}

inline json model_json(const ModelParams& p) {
  json rows = json::array();
  for (int m = 0; m < p.n_modes; ++m) rows.push_back(vector_json(p.coupling.row(m).transpose()));
  return {{"n_spins", p.n_spins},
          {"n_modes", p.n_modes},
          {"coupling", rows},
          {"tunneling", vector_json(p.tunneling)}};
}

inline void check_method(const std::string& m, const std::set<std::string>& allowed,
                         const std::string& where) {
  if (!allowed.count(m)) throw ConfigError("unknown method \"" + m + "\" in " + where);
}

}  // namespace detail

inline RunConfig parse_config(const json& j) {
  using namespace detail;
  check_keys(j,
             {"model", "truncation", "seed", "threads", "output", "spectrum", "curve",
              "functional", "adiabatic", "regular_set", "diagnose", "hk_scan"},
             "config");
  RunConfig c;
  if (j.contains("model")) c.model = parse_model(j.at("model"));

  if (j.contains("truncation")) {
    const json& t = j.at("truncation");
    check_keys(t, {"fock_cutoff", "energy_tol", "initial_cutoff"}, "truncation");
    if (t.contains("fock_cutoff") && !t.at("fock_cutoff").is_null()) {
      c.truncation.fock_cutoff = get<int>(t, "fock_cutoff", "truncation");
      if (*c.truncation.fock_cutoff < 2) throw ConfigError("fock_cutoff must be at least 2");
    }
    get_to(t, "energy_tol", "truncation", c.truncation.energy_tol);
    get_to(t, "initial_cutoff", "truncation", c.truncation.initial_cutoff);
    if (!(c.truncation.energy_tol > 0.0)) throw ConfigError("energy_tol must be positive");
    if (c.truncation.initial_cutoff < 2) throw ConfigError("initial_cutoff must be at least 2");
  }
  if (j.contains("seed")) {
    if (!j.at("seed").is_number_unsigned()) throw ConfigError("seed must be a non-negative integer");
    c.seed = j.at("seed").get<std::uint64_t>();
  }
  if (j.contains("threads")) {
    c.threads = get<int>(j, "threads", "config");
    if (*c.threads < 1) throw ConfigError("threads must be positive");
  }
  if (j.contains("output")) {
    const json& o = j.at("output");
    check_keys(o, {"dir", "formats"}, "output");
    if (o.contains("dir")) c.output.dir = get<std::string>(o, "dir", "output");
    if (o.contains("formats")) {
      c.output.formats = get<std::vector<std::string>>(o, "formats", "output");
      for (const auto& f : *c.output.formats) {
        if (!known_formats().count(f)) throw ConfigError("unknown output format \"" + f + "\"");
      }
    }
  }

  const int N = c.model ? c.model->n_spins : 0;
  const int M = c.model ? c.model->n_modes : 0;
  auto sized = [&](const json& s, const char* key, int n, const std::string& where) {
    Vector v = vector_from(s.at(key), where + "." + key);
    if (c.model) check_size(v, n, where + "." + key);
    return v;
  };

  if (j.contains("spectrum")) {
    const json& s = j.at("spectrum");
    check_keys(s, {"eigenpairs", "v", "j"}, "spectrum");
    SpectrumConfig sc;
    get_to(s, "eigenpairs", "spectrum", sc.eigenpairs);
    if (sc.eigenpairs < 1) throw ConfigError("spectrum.eigenpairs must be positive");
    if (s.contains("v")) sc.v = sized(s, "v", N, "spectrum");
    if (s.contains("j")) sc.j = sized(s, "j", M, "spectrum");
    c.spectrum = sc;
  }
  if (j.contains("curve")) {
    const json& s = j.at("curve");
    check_keys(s,
               {"lambdas", "sigma_min", "sigma_max", "points", "xi", "direction", "method",
                "tol", "boundary_eps"},
               "curve");
    CurveConfig cc;
    get_to(s, "lambdas", "curve", cc.lambdas);
    get_to(s, "sigma_min", "curve", cc.sigma_min);
    get_to(s, "sigma_max", "curve", cc.sigma_max);
    get_to(s, "points", "curve", cc.points);
    get_to(s, "method", "curve", cc.method);
    get_to(s, "tol", "curve", cc.tol);
    get_to(s, "boundary_eps", "curve", cc.boundary_eps);
    if (s.contains("xi")) cc.xi = sized(s, "xi", M, "curve");
    if (s.contains("direction")) cc.direction = sized(s, "direction", N, "curve");
    check_method(cc.method, {"lieb", "search"}, "curve");
    if (cc.points < 2) throw ConfigError("curve.points must be at least 2");
    if (!(cc.sigma_min < cc.sigma_max)) throw ConfigError("curve needs sigma_min < sigma_max");
    if (cc.lambdas.empty()) throw ConfigError("curve.lambdas must be non-empty");
    if (!(cc.tol > 0.0) || !(cc.boundary_eps > 0.0)) {
      throw ConfigError("curve tolerances must be positive");
    }
    c.curve = cc;
  }
  if (j.contains("functional")) {
    const json& s = j.at("functional");
    check_keys(s, {"sigma", "xi", "method", "tol", "restarts"}, "functional");
    FunctionalConfig fc;
    if (!s.contains("sigma") || !s.contains("xi")) {
      throw ConfigError("functional needs \"sigma\" and \"xi\"");
    }
    fc.sigma = sized(s, "sigma", N, "functional");
    fc.xi = sized(s, "xi", M, "functional");
    get_to(s, "method", "functional", fc.method);
    get_to(s, "tol", "functional", fc.tol);
    get_to(s, "restarts", "functional", fc.restarts);
    check_method(fc.method, {"lieb", "search", "both"}, "functional");
    if (!(fc.tol > 0.0)) throw ConfigError("functional.tol must be positive");
    if (fc.restarts < 0) throw ConfigError("functional.restarts must be non-negative");
    c.functional = fc;
  }
  if (j.contains("adiabatic")) {
    const json& s = j.at("adiabatic");
    check_keys(s, {"sigma", "quad_tol", "tol", "chained", "max_panels"}, "adiabatic");
    AdiabaticConfig ac;
    if (!s.contains("sigma")) throw ConfigError("adiabatic needs \"sigma\"");
    ac.sigma = sized(s, "sigma", N, "adiabatic");
    get_to(s, "quad_tol", "adiabatic", ac.quad_tol);
    get_to(s, "tol", "adiabatic", ac.tol);
    get_to(s, "chained", "adiabatic", ac.chained);
    get_to(s, "max_panels", "adiabatic", ac.max_panels);
    if (!(ac.quad_tol > 0.0) || !(ac.tol > 0.0)) {
      throw ConfigError("adiabatic tolerances must be positive");
    }
    if (ac.max_panels < 2) throw ConfigError("adiabatic.max_panels must be at least 2");
    c.adiabatic = ac;
  }
  if (j.contains("regular_set")) {
    const json& s = j.at("regular_set");
    check_keys(s, {"n_spins", "samples", "points"}, "regular_set");
    RegularSetConfig rc;
    if (c.model) rc.n_spins = c.model->n_spins;
    get_to(s, "n_spins", "regular_set", rc.n_spins);
    get_to(s, "samples", "regular_set", rc.samples);
    if (s.contains("points")) {
      if (!s.at("points").is_array()) throw ConfigError("regular_set.points must be an array");
      for (const auto& p : s.at("points")) {
        Vector v = vector_from(p, "regular_set.points entry");
        check_size(v, rc.n_spins, "regular_set.points entry");
        rc.points.push_back(std::move(v));
      }
    }
    if (rc.n_spins < 1) throw ConfigError("regular_set.n_spins must be positive");
    if (rc.samples == 0) throw ConfigError("regular_set.samples must be positive");
    c.regular_set = rc;
  }
  if (j.contains("diagnose")) {
    const json& s = j.at("diagnose");
    check_keys(s, {"battery"}, "diagnose");
    DiagnoseConfig dc;
    get_to(s, "battery", "diagnose", dc.battery);
    check_method(dc.battery, {"default", "model"}, "diagnose");
    c.diagnose = dc;
  }
  if (j.contains("hk_scan")) {
    const json& s = j.at("hk_scan");
    check_keys(s, {"v_values", "j_values", "tol"}, "hk_scan");
    HkScanConfig hc;
    get_to(s, "v_values", "hk_scan", hc.v_values);
    get_to(s, "j_values", "hk_scan", hc.j_values);
    get_to(s, "tol", "hk_scan", hc.tol);
    if (hc.v_values.empty() || hc.j_values.empty()) {
      throw ConfigError("hk_scan grids must be non-empty");
    }
    if (!(hc.tol > 0.0)) throw ConfigError("hk_scan.tol must be positive");
    c.hk_scan = hc;
  }
  return c;
}

inline RunConfig parse_config_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }
  return parse_config(j);
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

/// Normalized echo of the configuration, defaults included.
inline json to_json(const RunConfig& c) {
  using detail::vector_json;
  json j = json::object();
  if (c.model) j["model"] = detail::model_json(*c.model);
  j["truncation"] = {{"fock_cutoff", c.truncation.fock_cutoff ? json(*c.truncation.fock_cutoff)
                                                               : json(nullptr)},
                     {"energy_tol", c.truncation.energy_tol},
                     {"initial_cutoff", c.truncation.initial_cutoff}};
  if (c.seed) j["seed"] = *c.seed;
  if (c.threads) j["threads"] = *c.threads;
  json out = json::object();
  if (c.output.dir) out["dir"] = *c.output.dir;
  if (c.output.formats) out["formats"] = *c.output.formats;
  j["output"] = out;
  if (c.spectrum) {
    json s = {{"eigenpairs", c.spectrum->eigenpairs}};
    if (c.spectrum->v) s["v"] = vector_json(*c.spectrum->v);
    if (c.spectrum->j) s["j"] = vector_json(*c.spectrum->j);
    j["spectrum"] = s;
  }
  if (c.curve) {
    const CurveConfig& cc = *c.curve;
    json s = {{"lambdas", cc.lambdas},     {"sigma_min", cc.sigma_min},
              {"sigma_max", cc.sigma_max}, {"points", cc.points},
              {"method", cc.method},       {"tol", cc.tol},
              {"boundary_eps", cc.boundary_eps}};
    if (cc.xi) s["xi"] = vector_json(*cc.xi);
    if (cc.direction) s["direction"] = vector_json(*cc.direction);
    j["curve"] = s;
  }
  if (c.functional) {
    const FunctionalConfig& f = *c.functional;
    j["functional"] = {{"sigma", vector_json(f.sigma)},
                       {"xi", vector_json(f.xi)},
                       {"method", f.method},
                       {"tol", f.tol},
                       {"restarts", f.restarts}};
  }
  if (c.adiabatic) {
    const AdiabaticConfig& a = *c.adiabatic;
    j["adiabatic"] = {{"sigma", vector_json(a.sigma)},
                      {"quad_tol", a.quad_tol},
                      {"tol", a.tol},
                      {"chained", a.chained},
                      {"max_panels", a.max_panels}};
  }
  if (c.regular_set) {
    json pts = json::array();
    for (const auto& p : c.regular_set->points) pts.push_back(vector_json(p));
    j["regular_set"] = {{"n_spins", c.regular_set->n_spins},
                        {"samples", c.regular_set->samples},
                        {"points", pts}};
  }
  if (c.diagnose) j["diagnose"] = {{"battery", c.diagnose->battery}};
  if (c.hk_scan) {
    j["hk_scan"] = {{"v_values", c.hk_scan->v_values},
                    {"j_values", c.hk_scan->j_values},
                    {"tol", c.hk_scan->tol}};
  }
  return j;
}

}  // namespace dickedft::cli
