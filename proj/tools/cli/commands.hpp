// Copyright 2026 The dickedft Authors
// SPDX-License-Identifier: Apache-2.0

/**
 * @file commands.hpp
 * @brief Subcommands of the dickedft driver.
 *
 * Each cmd_* computes all of its outputs in memory and returns them; nothing
 * touches the filesystem until write_outputs(), so a failing run leaves no
 * partial files behind.
 */

#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "cli/config.hpp"
#include "dickedft/dickedft.hpp"

namespace dickedft::cli {

struct OutputFile {
  std::string name;
  std::string format;  ///< csv | json | svg
  std::string content;
};

struct CommandOutput {
  std::vector<OutputFile> files;
  std::vector<std::string> warnings;
  ExitCode exit_code = ExitCode::kOk;
};

/// 17 significant digits in the C locale.
inline std::string fmt(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  if (x == 0.0) x = 0.0;  // no "-0"
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

class Csv {
 public:
  explicit Csv(std::vector<std::string> header) : width_(header.size()) { add(header); }

  void row(const std::vector<std::string>& cells) {
    if (cells.size() != width_) throw Error("csv row width mismatch");
    add(cells);
  }

  const std::string& str() const { return text_; }

 private:
  void add(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) text_ += ',';
      text_ += cells[i];
    }
    text_ += '\n';
  }

  std::size_t width_;
  std::string text_;
};

inline std::string dump(const json& j) { return j.dump(2) + "\n"; }

/// JSON has no NaN; non-finite numbers become null.
inline json num(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

inline json vec(const Vector& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(num(v(i)));
  return a;
}

inline std::vector<std::string> indexed(const std::string& stem, int n) {
  std::vector<std::string> out;
  if (n == 1) {
    out.push_back(stem);
    return out;
  }
  for (int i = 1; i <= n; ++i) out.push_back(stem + "_" + std::to_string(i));
  return out;
}

inline void append(std::vector<std::string>& cells, const Vector& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) cells.push_back(fmt(v(i)));
}

inline void append(std::vector<std::string>& cells, const std::vector<std::string>& more) {
  cells.insert(cells.end(), more.begin(), more.end());
}

inline FunctionalOptions functional_options(const RunConfig& c) {
  FunctionalOptions o;
  o.initial_cutoff = c.truncation.fock_cutoff.value_or(c.truncation.initial_cutoff);
  o.cutoff_tol = c.truncation.energy_tol;
  return o;
}

inline CutoffOptions cutoff_options(const RunConfig& c) {
  CutoffOptions o;
  o.initial_cutoff = c.truncation.fock_cutoff.value_or(c.truncation.initial_cutoff);
  return o;
}

inline std::uint64_t seed_of(const RunConfig& c) { return c.seed.value_or(0); }

inline int threads_of(const RunConfig& c) { return resolve_threads(c.threads); }

// ---------------------------------------------------------------------------
// spectrum

inline CommandOutput cmd_spectrum(const RunConfig& c) {
  const ModelParams& p = c.require_model();
  const SpectrumConfig sc = c.spectrum.value_or(SpectrumConfig{});
  Potentials pots = Potentials::zero(p);
  if (sc.v) pots.v = *sc.v;
  if (sc.j) pots.j = *sc.j;
  pots.validate(p);

  SpectralResult r;
  if (c.truncation.fock_cutoff) {
    const TruncatedBasis basis = build_basis(p, {*c.truncation.fock_cutoff});
    if (static_cast<std::size_t>(sc.eigenpairs) > basis.dimension()) {
      throw ConfigError("more eigenpairs requested than the basis dimension");
    }
    r = eigensolve(build_h(p, pots, basis), basis, sc.eigenpairs);
  } else {
    r = converge_cutoff(p, pots, c.truncation.energy_tol, sc.eigenpairs, cutoff_options(c));
  }

  Csv csv({"index", "energy", "excitation", "cutoff"});
  json levels = json::array();
  for (int i = 0; i < r.count(); ++i) {
    const double e = r.eigenvalues(i);
    csv.row({std::to_string(i), fmt(e), fmt(e - r.eigenvalues(0)), std::to_string(r.cutoff_used)});
    levels.push_back(e);
  }
  const DensityPair d = density_pair(r.ground());
  json meta = {{"eigenvalues", levels},
               {"gap", num(r.gap)},
               {"degenerate", r.degenerate},
               {"cutoff", r.cutoff_used},
               {"residual", r.residual},
               {"potentials", {{"v", vec(pots.v)}, {"j", vec(pots.j)}}},
               {"ground_density", {{"sigma", vec(d.sigma)}, {"xi", vec(d.xi)}}}};
  CommandOutput out;
  out.files.push_back({"spectrum.csv", "csv", csv.str()});
  out.files.push_back({"spectrum.json", "json", dump(meta)});
  return out;
}

// ---------------------------------------------------------------------------
// curve

struct CurvePoint {
  double lambda = 0.0;
  double s = 0.0;
  double F = std::numeric_limits<double>::quiet_NaN();
  Vector v;
  Vector j;
  double gap = std::numeric_limits<double>::quiet_NaN();
  int cutoff = 0;
  std::string note;
};

/// Grid s_k = a + k(b − a)/(n − 1), symmetric about 0 when a = −b.
inline std::vector<double> curve_grid(const CurveConfig& cc) {
  std::vector<double> s(static_cast<std::size_t>(cc.points));
  const double h = (cc.sigma_max - cc.sigma_min) / (cc.points - 1);
  for (int k = 0; k < cc.points; ++k) {
    s[static_cast<std::size_t>(k)] = cc.sigma_min + k * h;
  }
  if (std::abs(cc.sigma_min + cc.sigma_max) < 1e-15) {
    // Mirror exactly so evenness is not blurred by rounding of the grid.
    for (int k = 0; k < cc.points / 2; ++k) {
      s[static_cast<std::size_t>(cc.points - 1 - k)] = -s[static_cast<std::size_t>(k)];
    }
    if (cc.points % 2) s[static_cast<std::size_t>(cc.points / 2)] = 0.0;
  }
  return s;
}

inline CurvePoint curve_point(const RunConfig& c, const CurveConfig& cc, double lambda,
                              double s) {
  const ModelParams& base = c.require_model();
  const ModelParams p = base.with_coupling_scale(lambda);
  const Vector dir = cc.direction.value_or(Vector::Ones(p.n_spins));
  const Vector xi = cc.xi.value_or(Vector::Zero(p.n_modes));
  CurvePoint pt;
  pt.lambda = lambda;
  pt.s = s;
  const double reach = dir.cwiseAbs().maxCoeff();
  if (std::abs(s) * reach > 1.0 - cc.boundary_eps) {
    pt.s = std::copysign((1.0 - cc.boundary_eps) / reach, s);
    pt.note = "clamped";
  }
  const DensityPair target{pt.s * dir, xi};
  FunctionalOptions fo = functional_options(c);
  fo.boundary_eps = 0.5 * cc.boundary_eps;
  try {
    FunctionalResult r;
    if (cc.method == "lieb") {
      r = lieb_functional(p, target, cc.tol, fo);
    } else {
      SearchOptions so;
      so.functional = fo;
      r = fll_constrained_search(p, target, cc.tol, seed_of(c), so);
    }
    pt.F = r.value;
    pt.cutoff = r.cutoff_used;
    if (r.multipliers) {
      pt.v = r.multipliers->v;
      pt.j = r.multipliers->j;
      if (pt.v.allFinite() && pt.j.allFinite()) {
        const TruncatedBasis basis = build_basis(p, {r.cutoff_used});
        const SpectralResult sp =
            eigensolve(build_h(p, r.multipliers->potentials(), basis), basis, 2);
        pt.gap = sp.gap;
      }
    }
    if (!r.converged) pt.note = pt.note.empty() ? "unconverged" : pt.note + ";unconverged";
  } catch (const Error& e) {
    pt.note = pt.note.empty() ? "failed" : pt.note + ";failed";
  }
  if (pt.v.size() != p.n_spins) pt.v = Vector::Constant(p.n_spins, std::nan(""));
  if (pt.j.size() != p.n_modes) pt.j = Vector::Constant(p.n_modes, std::nan(""));
  return pt;
}

struct CurveSummary {
  double lambda = 0.0;
  double F_at_zero = std::numeric_limits<double>::quiet_NaN();
  double max_asymmetry = 0.0;
  double min_second_difference = std::numeric_limits<double>::infinity();
  double zero_coupling_error = std::numeric_limits<double>::quiet_NaN();
  int failures = 0;
};

inline CurveSummary summarize_curve(const ModelParams& base, const CurveConfig& cc,
                                    const std::vector<CurvePoint>& pts) {
  CurveSummary s;
  s.lambda = pts.front().lambda;
  const std::size_t n = pts.size();
  for (std::size_t k = 0; k < n; ++k) {
    if (!std::isfinite(pts[k].F)) ++s.failures;
    if (std::abs(pts[k].s) < 1e-15) s.F_at_zero = pts[k].F;
    if (std::abs(pts[k].s + pts[n - 1 - k].s) < 1e-15) {
      s.max_asymmetry = std::max(s.max_asymmetry, std::abs(pts[k].F - pts[n - 1 - k].F));
    }
  }
  // Second differences on a possibly non-uniform grid, scaled to h².
  for (std::size_t k = 1; k + 1 < n; ++k) {
    const double h1 = pts[k].s - pts[k - 1].s, h2 = pts[k + 1].s - pts[k].s;
    const double d2 = 2.0 * ((pts[k + 1].F - pts[k].F) / h2 - (pts[k].F - pts[k - 1].F) / h1) /
                      (h1 + h2) * h1 * h2;
    s.min_second_difference = std::min(s.min_second_difference, d2);
  }
  const ModelParams p = base.with_coupling_scale(s.lambda);
  if (p.decoupled()) {
    const Vector dir = cc.direction.value_or(Vector::Ones(p.n_spins));
    const Vector xi = cc.xi.value_or(Vector::Zero(p.n_modes));
    s.zero_coupling_error = 0.0;
    for (const auto& pt : pts) {
      const double exact = zero_coupling_fll(p, {pt.s * dir, xi});
      s.zero_coupling_error = std::max(s.zero_coupling_error, std::abs(pt.F - exact));
    }
  }
  return s;
}

inline std::string svg_num(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", x);
  return buf;
}

inline std::string svg_label(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", x);
  return buf;
}

/// F against σ, one polyline per λ.
inline std::string curve_svg(const std::vector<std::vector<CurvePoint>>& curves) {
  const double W = 640, H = 440, L = 70, R = 130, T = 30, B = 50;
  double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
  double ymin = xmin, ymax = -xmin;
  for (const auto& cv : curves) {
    for (const auto& p : cv) {
      if (!std::isfinite(p.F)) continue;
      xmin = std::min(xmin, p.s);
      xmax = std::max(xmax, p.s);
      ymin = std::min(ymin, p.F);
      ymax = std::max(ymax, p.F);
    }
  }
  if (!std::isfinite(xmin)) xmin = -1, xmax = 1, ymin = 0, ymax = 1;
  if (ymax - ymin < 1e-12) ymax = ymin + 1.0;
  if (xmax - xmin < 1e-12) xmax = xmin + 1.0;
  const double pad = 0.05 * (ymax - ymin);
  ymin -= pad;
  ymax += pad;
  auto X = [&](double x) { return L + (x - xmin) / (xmax - xmin) * (W - L - R); };
  auto Y = [&](double y) { return H - B - (y - ymin) / (ymax - ymin) * (H - T - B); };
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                 "#9467bd", "#8c564b", "#e377c2", "#17becf"};

  std::string s;
  s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + svg_num(W) + "\" height=\"" +
       svg_num(H) + "\" viewBox=\"0 0 " + svg_num(W) + " " + svg_num(H) + "\">\n";
  s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s += "<g stroke=\"black\" stroke-width=\"1\">\n";
  s += "<line x1=\"" + svg_num(L) + "\" y1=\"" + svg_num(H - B) + "\" x2=\"" + svg_num(W - R) +
       "\" y2=\"" + svg_num(H - B) + "\"/>\n";
  s += "<line x1=\"" + svg_num(L) + "\" y1=\"" + svg_num(T) + "\" x2=\"" + svg_num(L) +
       "\" y2=\"" + svg_num(H - B) + "\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double xv = xmin + k * (xmax - xmin) / 4, yv = ymin + k * (ymax - ymin) / 4;
    s += "<line x1=\"" + svg_num(X(xv)) + "\" y1=\"" + svg_num(H - B) + "\" x2=\"" +
         svg_num(X(xv)) + "\" y2=\"" + svg_num(H - B + 5) + "\"/>\n";
    s += "<line x1=\"" + svg_num(L - 5) + "\" y1=\"" + svg_num(Y(yv)) + "\" x2=\"" + svg_num(L) +
         "\" y2=\"" + svg_num(Y(yv)) + "\"/>\n";
  }
  s += "</g>\n<g font-family=\"sans-serif\" font-size=\"12\">\n";
  for (int k = 0; k <= 4; ++k) {
    const double xv = xmin + k * (xmax - xmin) / 4, yv = ymin + k * (ymax - ymin) / 4;
    s += "<text x=\"" + svg_num(X(xv)) + "\" y=\"" + svg_num(H - B + 20) +
         "\" text-anchor=\"middle\">" + svg_label(xv) + "</text>\n";
    s += "<text x=\"" + svg_num(L - 8) + "\" y=\"" + svg_num(Y(yv) + 4) +
         "\" text-anchor=\"end\">" + svg_label(yv) + "</text>\n";
  }
  s += "<text x=\"" + svg_num(0.5 * (L + W - R)) + "\" y=\"" + svg_num(H - 10) +
       "\" text-anchor=\"middle\">sigma</text>\n";
  s += "<text x=\"18\" y=\"" + svg_num(0.5 * (T + H - B)) + "\" text-anchor=\"middle\" "
       "transform=\"rotate(-90 18 " + svg_num(0.5 * (T + H - B)) + ")\">F(sigma, xi)</text>\n";
  s += "</g>\n";
  for (std::size_t c = 0; c < curves.size(); ++c) {
    const char* col = colors[c % 8];
    std::string pts;
    for (const auto& p : curves[c]) {
      if (!std::isfinite(p.F)) continue;
      if (!pts.empty()) pts += ' ';
      pts += svg_num(X(p.s)) + "," + svg_num(Y(p.F));
    }
    s += "<polyline fill=\"none\" stroke=\"" + std::string(col) +
         "\" stroke-width=\"1.5\" points=\"" + pts + "\"/>\n";
    const double ly = T + 10 + 18.0 * static_cast<double>(c);
    s += "<line x1=\"" + svg_num(W - R + 15) + "\" y1=\"" + svg_num(ly) + "\" x2=\"" +
         svg_num(W - R + 40) + "\" y2=\"" + svg_num(ly) + "\" stroke=\"" + col +
         "\" stroke-width=\"1.5\"/>\n";
    s += "<text x=\"" + svg_num(W - R + 46) + "\" y=\"" + svg_num(ly + 4) +
         "\" font-family=\"sans-serif\" font-size=\"12\">lambda = " +
         svg_label(curves[c].front().lambda) + "</text>\n";
  }
  s += "</svg>\n";
  return s;
}

inline CommandOutput cmd_curve(const RunConfig& c) {
  const ModelParams& base = c.require_model();
  const CurveConfig cc = c.curve.value_or(CurveConfig{});
  if (cc.xi) detail::check_size(*cc.xi, base.n_modes, "curve.xi");
  if (cc.direction) detail::check_size(*cc.direction, base.n_spins, "curve.direction");
  const std::vector<double> grid = curve_grid(cc);
  const std::size_t per = grid.size();
  const std::size_t total = per * cc.lambdas.size();
  const std::vector<CurvePoint> flat = parallel_map(total, threads_of(c), [&](std::size_t i) {
    return curve_point(c, cc, cc.lambdas[i / per], grid[i % per]);
  });

  std::vector<std::string> header{"lambda", "sigma", "F"};
  append(header, indexed("v", base.n_spins));
  append(header, indexed("j", base.n_modes));
  append(header, std::vector<std::string>{"gap", "cutoff", "note"});
  Csv csv(header);
  std::vector<std::vector<CurvePoint>> curves;
  CommandOutput out;
  for (std::size_t l = 0; l < cc.lambdas.size(); ++l) {
    curves.emplace_back(flat.begin() + static_cast<std::ptrdiff_t>(l * per),
                        flat.begin() + static_cast<std::ptrdiff_t>((l + 1) * per));
  }
  json summaries = json::array();
  for (const auto& cv : curves) {
    for (const auto& p : cv) {
      std::vector<std::string> row{fmt(p.lambda), fmt(p.s), fmt(p.F)};
      append(row, p.v);
      append(row, p.j);
      append(row, std::vector<std::string>{fmt(p.gap), std::to_string(p.cutoff), p.note});
      csv.row(row);
      if (!p.note.empty()) {
        out.warnings.push_back("lambda=" + fmt(p.lambda) + " sigma=" + fmt(p.s) + ": " + p.note);
      }
    }
    const CurveSummary s = summarize_curve(base, cc, cv);
    if (s.failures) out.exit_code = ExitCode::kNumerical;
    summaries.push_back({{"lambda", s.lambda},
                         {"F_at_sigma_zero", num(s.F_at_zero)},
                         {"max_asymmetry", num(s.max_asymmetry)},
                         {"min_second_difference", num(s.min_second_difference)},
                         {"zero_coupling_max_error", num(s.zero_coupling_error)},
                         {"failures", s.failures}});
  }
  // F(0) ordering in λ is recorded only.
  bool ordered = true;
  for (std::size_t l = 1; l < summaries.size(); ++l) {
    const json& a = summaries[l - 1]["F_at_sigma_zero"];
    const json& b = summaries[l]["F_at_sigma_zero"];
    if (a.is_null() || b.is_null()) continue;
    if (cc.lambdas[l] >= cc.lambdas[l - 1] && b.get<double>() > a.get<double>() + 1e-12) {
      ordered = false;
    }
  }
  json meta = {{"method", cc.method},
               {"points_per_curve", per},
               {"curves", summaries},
               {"F_at_zero_nonincreasing_in_lambda", ordered}};
  out.files.push_back({"curve.csv", "csv", csv.str()});
  out.files.push_back({"curve.json", "json", dump(meta)});
  out.files.push_back({"curve.svg", "svg", curve_svg(curves)});
  return out;
}

// ---------------------------------------------------------------------------
// functional

inline json functional_json(const FunctionalResult& r) {
  json res = json::object();
  for (const auto& [k, v] : r.residuals) res[k] = num(v);
  json j = {{"value", num(r.value)},
            {"converged", r.converged},
            {"representable", r.representable},
            {"cutoff", r.cutoff_used},
            {"residuals", res}};
  if (r.multipliers) {
    j["multipliers"] = {{"energy", num(r.multipliers->energy)},
                        {"v", vec(r.multipliers->v)},
                        {"j", vec(r.multipliers->j)}};
  }
  if (std::holds_alternative<Ensemble>(r.optimizer)) {
    j["optimizer"] = "ensemble";
    j["weights"] = std::get<Ensemble>(r.optimizer).weights;
  } else if (std::holds_alternative<WaveFunction>(r.optimizer)) {
    j["optimizer"] = "pure";
  } else {
    j["optimizer"] = "none";
  }
  return j;
}

inline CommandOutput cmd_functional(const RunConfig& c) {
  const ModelParams& p = c.require_model();
  if (!c.functional) throw ConfigError("config has no \"functional\" section");
  const FunctionalConfig& fc = *c.functional;
  const DensityPair target{fc.sigma, fc.xi};
  target.validate(p);
  const FunctionalOptions fo = functional_options(c);

  std::vector<std::pair<std::string, FunctionalResult>> results;
  if (fc.method != "search") results.emplace_back("lieb", lieb_functional(p, target, fc.tol, fo));
  if (fc.method != "lieb") {
    SearchOptions so;
    so.functional = fo;
    so.restarts = fc.restarts;
    results.emplace_back("search", fll_constrained_search(p, target, fc.tol, seed_of(c), so));
  }

  std::vector<std::string> header{"method", "F"};
  append(header, indexed("v", p.n_spins));
  append(header, indexed("j", p.n_modes));
  append(header, std::vector<std::string>{"converged", "cutoff"});
  Csv csv(header);
  json meta = {{"target", {{"sigma", vec(target.sigma)}, {"xi", vec(target.xi)}}},
               {"regular", p.n_spins <= kMaxGeometrySpins && is_regular(target.sigma)}};
  CommandOutput out;
  for (const auto& [name, r] : results) {
    std::vector<std::string> row{name, fmt(r.value)};
    const Vector nanv = Vector::Constant(p.n_spins, std::nan(""));
    const Vector nanj = Vector::Constant(p.n_modes, std::nan(""));
    append(row, r.multipliers ? r.multipliers->v : nanv);
    append(row, r.multipliers ? r.multipliers->j : nanj);
    append(row, std::vector<std::string>{r.converged ? "true" : "false",
                                         std::to_string(r.cutoff_used)});
    csv.row(row);
    meta[name] = functional_json(r);
    if (!r.converged) {
      out.warnings.push_back(name + " did not converge");
      out.exit_code = ExitCode::kNumerical;
    }
  }
  if (results.size() == 2) meta["fll_minus_fl"] = num(results[1].second.value - results[0].second.value);
  out.files.push_back({"functional.csv", "csv", csv.str()});
  out.files.push_back({"functional.json", "json", dump(meta)});
  return out;
}

// ---------------------------------------------------------------------------
// adiabatic

inline CommandOutput cmd_adiabatic(const RunConfig& c) {
  const ModelParams& p = c.require_model();
  if (!c.adiabatic) throw ConfigError("config has no \"adiabatic\" section");
  const AdiabaticConfig& ac = *c.adiabatic;
  AdiabaticOptions opts;
  opts.quad_tol = ac.quad_tol;
  opts.tol = ac.tol;
  opts.chained = ac.chained;
  opts.max_panels = ac.max_panels;
  opts.seed = seed_of(c);
  opts.functional = functional_options(c);
  const AdiabaticTrace t = g_lambda(p, ac.sigma, opts);

  Csv csv({"s", "weight", "a", "b", "virial_residual"});
  for (std::size_t k = 0; k < t.s_nodes.size(); ++k) {
    csv.row({fmt(t.s_nodes[k]), fmt(t.weights[k]), fmt(t.integrand_values[k]),
             fmt(t.g_integrand_values[k]), fmt(t.virial_residuals[k])});
  }
  json meta = {{"sigma", vec(t.sigma)},
               {"integral_a", t.integral_a},
               {"G", t.G_value},
               {"F_zero", t.F_zero},
               {"F_reconstructed", t.F_reconstructed},
               {"consistency", ac_consistency(t)},
               {"panels", t.panels},
               {"converged", t.converged},
               {"monotone", t.monotone},
               {"kink", t.kink_flag},
               {"refinement_changes", t.refinement_changes}};
  CommandOutput out;
  if (t.kink_flag) out.warnings.push_back("integrand shows a kink");
  out.files.push_back({"adiabatic.csv", "csv", csv.str()});
  out.files.push_back({"adiabatic.json", "json", dump(meta)});
  return out;
}

// ---------------------------------------------------------------------------
// regular-set

/// "sigma1 - sigma2 = 0" with the smallest nonzero coefficient scaled to 1.
inline std::string plane_equation(const Hyperplane& h) {
  double unit = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < h.normal.size(); ++i) {
    if (h.normal(i) != 0.0) unit = std::min(unit, std::abs(h.normal(i)));
  }
  std::string s;
  for (Eigen::Index i = 0; i < h.normal.size(); ++i) {
    const double a = h.normal(i) / unit;
    if (a == 0.0) continue;
    const bool neg = a < 0;
    if (s.empty()) {
      if (neg) s += "-";
    } else {
      s += neg ? " - " : " + ";
    }
    if (std::abs(std::abs(a) - 1.0) > 1e-9) s += svg_label(std::abs(a)) + "*";
    s += "sigma" + std::to_string(i + 1);
  }
  double rhs = h.offset / unit;
  if (std::abs(rhs) < 1e-12) rhs = 0.0;
  return s + " = " + svg_label(rhs);
}

inline CommandOutput cmd_regular_set(const RunConfig& c) {
  RegularSetConfig rc = c.regular_set.value_or(RegularSetConfig{});
  if (!c.regular_set && c.model) rc.n_spins = c.model->n_spins;
  const int N = rc.n_spins;
  const auto planes = irregular_hyperplanes(N);

  std::vector<std::string> header{"index"};
  append(header, indexed("normal", N));
  append(header, std::vector<std::string>{"offset", "equation"});
  Csv csv(header);
  for (std::size_t k = 0; k < planes.size(); ++k) {
    std::vector<std::string> row{std::to_string(k)};
    append(row, planes[k].normal);
    append(row, std::vector<std::string>{fmt(planes[k].offset), plane_equation(planes[k])});
    csv.row(row);
  }
  const int comps = count_components(N, rc.samples, seed_of(c));
  json pts = json::array();
  for (const auto& p : rc.points) {
    pts.push_back({{"sigma", vec(p)}, {"regular", is_regular(p)}, {"signs", sign_vector(p)}});
  }
  json meta = {{"n_spins", N},
               {"hyperplanes", planes.size()},
               {"components", comps},
               {"samples", rc.samples},
               {"points", pts}};
  CommandOutput out;
  out.files.push_back({"hyperplanes.csv", "csv", csv.str()});
  out.files.push_back({"regular_set.json", "json", dump(meta)});
  return out;
}

// ---------------------------------------------------------------------------
// diagnose

/// Checks at the zero-potential ground state of the configured model.
inline std::vector<ResidualReport> model_battery(const RunConfig& c) {
  const ModelParams& p = c.require_model();
  const Potentials pots = Potentials::zero(p);
  const EnergyResult e = energy(p, pots, c.truncation.energy_tol, cutoff_options(c));
  std::vector<ResidualReport> out;
  const WaveFunction& psi = e.spectrum.ground();
  if (e.spectrum.degenerate) {
    ResidualReport r = ResidualReport::equality("virial_first", 0, 0, 0, "degenerate ground state");
    r.skipped = true;
    r.passed = true;
    out.push_back(r);
  } else {
    auto [a, b] = virial_ground(p, pots, psi);
    out.push_back(a);
    out.push_back(b);
    out.push_back(force_balance(p, pots, e.density));
  }
  out.push_back(zero_momentum(psi));
  return out;
}

inline CommandOutput cmd_diagnose(const RunConfig& c) {
  const DiagnoseConfig dc = c.diagnose.value_or(DiagnoseConfig{});
  const std::vector<ResidualReport> reps =
      dc.battery == "model" ? model_battery(c) : default_battery(seed_of(c), threads_of(c));
  Csv csv({"name", "lhs", "rhs", "residual", "tolerance", "passed", "skipped", "context"});
  json arr = json::array();
  int failed = 0;
  for (const auto& r : reps) {
    std::string ctx = r.context;
    std::replace(ctx.begin(), ctx.end(), ',', ';');
    csv.row({r.name, fmt(r.lhs), fmt(r.rhs), fmt(r.residual), fmt(r.tolerance),
             r.passed ? "true" : "false", r.skipped ? "true" : "false", ctx});
    arr.push_back({{"name", r.name},
                   {"lhs", num(r.lhs)},
                   {"rhs", num(r.rhs)},
                   {"residual", num(r.residual)},
                   {"tolerance", r.tolerance},
                   {"passed", r.passed},
                   {"skipped", r.skipped},
                   {"context", r.context}});
    if (!r.passed) ++failed;
  }
  CommandOutput out;
  if (failed) {
    out.exit_code = ExitCode::kNumerical;
    out.warnings.push_back(std::to_string(failed) + " diagnostic check(s) failed");
  }
  json meta = {{"battery", dc.battery}, {"checks", arr}, {"failed", failed}};
  out.files.push_back({"diagnose.csv", "csv", csv.str()});
  out.files.push_back({"diagnose.json", "json", dump(meta)});
  return out;
}

// ---------------------------------------------------------------------------
// hk-scan

inline CommandOutput cmd_hk_scan(const RunConfig& c) {
  const ModelParams& p = c.require_model();
  const HkScanConfig hc = c.hk_scan.value_or(HkScanConfig{});
  std::vector<Potentials> grid;
  for (double v : hc.v_values) {
    for (double j : hc.j_values) {
      grid.push_back({Vector::Constant(p.n_spins, v), Vector::Constant(p.n_modes, j)});
    }
  }
  const HkScanReport rep = hk_scan(p, grid, hc.tol, threads_of(c), cutoff_options(c));

  std::vector<std::string> header;
  append(header, indexed("v", p.n_spins));
  append(header, indexed("j", p.n_modes));
  append(header, indexed("sigma", p.n_spins));
  append(header, indexed("xi", p.n_modes));
  append(header, std::vector<std::string>{"energy", "cutoff", "skipped"});
  Csv csv(header);
  for (const auto& pt : rep.points) {
    std::vector<std::string> row;
    append(row, pt.potentials.v);
    append(row, pt.potentials.j);
    append(row, pt.density.sigma);
    append(row, pt.density.xi);
    append(row, std::vector<std::string>{fmt(pt.energy), std::to_string(pt.cutoff),
                                         pt.skipped ? "true" : "false"});
    csv.row(row);
  }
  json cols = json::array();
  for (const auto& col : rep.collisions) {
    cols.push_back({{"first", col.first},
                    {"second", col.second},
                    {"distance", col.distance},
                    {"first_regular", col.first_regular},
                    {"second_regular", col.second_regular}});
  }
  json meta = {{"points", rep.points.size()},
               {"collisions", rep.collisions.size()},
               {"collision_pairs", cols},
               {"min_distance", num(rep.min_distance)},
               {"separation", rep.separation},
               {"skipped", rep.skipped}};
  CommandOutput out;
  if (!rep.collisions.empty()) {
    out.warnings.push_back(std::to_string(rep.collisions.size()) + " density collision(s)");
  }
  out.files.push_back({"hk_scan.csv", "csv", csv.str()});
  out.files.push_back({"hk_scan.json", "json", dump(meta)});
  return out;
}

// ---------------------------------------------------------------------------
// dispatch and output

inline const std::map<std::string, CommandOutput (*)(const RunConfig&)>& commands() {
  static const std::map<std::string, CommandOutput (*)(const RunConfig&)> table{
      {"spectrum", cmd_spectrum},       {"curve", cmd_curve},
      {"functional", cmd_functional},   {"adiabatic", cmd_adiabatic},
      {"regular-set", cmd_regular_set}, {"diagnose", cmd_diagnose},
      {"hk-scan", cmd_hk_scan}};
  return table;
}

inline CommandOutput run_command(const std::string& name, const RunConfig& c) {
  const auto it = commands().find(name);
  if (it == commands().end()) throw ConfigError("unknown command " + name);
  return it->second(c);
}

inline std::string compiler_version() {
#if defined(__clang__)
  return std::string("clang ") + __clang_version__;
#elif defined(__GNUC__)
  return std::string("gcc ") + __VERSION__;
#else
  return "unknown";
#endif
}

inline json versions() {
  return {{"dickedft", kVersion},
          {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) +
                        "." + std::to_string(EIGEN_MINOR_VERSION)},
          {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
          {"compiler", compiler_version()}};
}

inline json sidecar(const std::string& command, const OutputFile& f, const RunConfig& c,
                    double wall_seconds) {
  return {{"file", f.name},
          {"format", f.format},
          {"command", command},
          {"config", to_json(c)},
          {"seed", seed_of(c)},
          {"threads", threads_of(c)},
          {"versions", versions()},
          {"wall_time_seconds", wall_seconds}};
}

/// Writes the files whose format is selected, each with a .meta.json sidecar.
/// Returns the paths written.
inline std::vector<std::filesystem::path> write_outputs(const std::string& command,
                                                        const CommandOutput& out,
                                                        const RunConfig& c,
                                                        double wall_seconds) {
  namespace fs = std::filesystem;
  const fs::path dir = c.output.dir.value_or(".");
  const std::vector<std::string> formats =
      c.output.formats.value_or(std::vector<std::string>{"csv", "json", "svg"});
  std::vector<std::pair<fs::path, std::string>> pending;
  for (const auto& f : out.files) {
    if (std::find(formats.begin(), formats.end(), f.format) == formats.end()) continue;
    pending.emplace_back(dir / f.name, f.content);
    pending.emplace_back(dir / (f.name + ".meta.json"), dump(sidecar(command, f, c, wall_seconds)));
  }
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ConfigError("cannot create output directory " + dir.string());
  std::vector<fs::path> written;
  for (const auto& [path, content] : pending) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    os << content;
    if (!os) throw ConfigError("cannot write " + path.string());
    written.push_back(path);
  }
  return written;
}

}  // namespace dickedft::cli
