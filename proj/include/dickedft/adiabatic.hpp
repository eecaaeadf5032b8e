// Copyright 2026 The dickedft Authors
// SPDX-License-Identifier: Apache-2.0

/**
 * @file adiabatic.hpp
 * @brief Adiabatic connection in the coupling strength s ↦ sΛ at ξ = 0.
 *
 * Two integrals over the optimizers ψ_s of F_LL^{sΛ}(σ, 0) are evaluated on
 * the same composite Gauss–Legendre nodes:
 *
 *   route A   a(s) = ⟨ψ_s, x·Λσ_z ψ_s⟩,  F^Λ(σ,0) = F⁰(σ,0) + ∫₀¹ a(s) ds
 *   route B   b(s) = s(½|Λσ|² − ½‖Λσ_zψ_s‖²) − ⟨t·σ_xψ_s, ∇·Λ(σ_z − σ)ψ_s⟩,
 *             G^Λ(σ) = ∫₀¹ b(s) ds.
 *
 * With F⁰(σ,0) = M − Σ|t_n|√(1−σ_n²), both give
 * F^Λ(σ,ξ) = M + |ξ|² − Σ|t_n|√(1−σ_n²) + ξ·Λσ + G^Λ(σ).
 */

#pragma once

#include <boost/math/quadrature/gauss.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dickedft/constrained_search.hpp"
#include "dickedft/error.hpp"
#include "dickedft/functionals.hpp"
#include "dickedft/geometry.hpp"
#include "dickedft/model.hpp"

namespace dickedft {

struct AdiabaticOptions {
  double quad_tol = 1e-6;
  int initial_panels = 2;  ///< 8 nodes per panel
  int max_panels = 64;
  double tol = 1e-10;  ///< per-node functional tolerance
  /// Warm-start each constrained search from the previous node.
  bool chained = true;
  double monotonicity_tol = 1e-6;
  std::uint64_t seed = 0;
  FunctionalOptions functional;
  SearchOptions search;
};

struct AdiabaticTrace {
  std::vector<double> s_nodes;
  std::vector<double> weights;
  std::vector<double> integrand_values;  ///< route A, a(s)
  std::vector<double> g_integrand_values;  ///< route B, b(s)
  std::vector<double> virial_residuals;
  std::vector<WaveFunction> optimizers;
  double integral_a = 0.0;
  double G_value = 0.0;
  double F_reconstructed = 0.0;  ///< at ξ = 0
  double F_zero = 0.0;  ///< F⁰(σ, 0)
  Vector sigma;
  ModelParams params;
  int panels = 0;
  bool converged = false;
  bool monotone = true;
  bool kink_flag = false;
  std::vector<double> refinement_changes;

  /// F^Λ(σ, ξ) from G^Λ(σ).
  double reconstruct(const Vector& xi) const {
    return F_zero + xi.squaredNorm() + xi.dot(params.coupling * sigma) + G_value;
  }

  /// Route A estimate of F^Λ(σ, ξ).
  double reconstruct_route_a(const Vector& xi) const {
    return F_zero + xi.squaredNorm() + xi.dot(params.coupling * sigma) + integral_a;
  }
};

class QuadratureError : public ConvergenceError {
 public:
  QuadratureError(const std::string& what, AdiabaticTrace trace)
      : ConvergenceError(what), trace_(std::move(trace)) {}
  const AdiabaticTrace& trace() const { return trace_; }

 private:
  AdiabaticTrace trace_;
};

namespace detail {

inline void require_regular(const Vector& sigma) {
  if (sigma.size() <= kMaxGeometrySpins && !is_regular(sigma)) {
    throw DomainError("adiabatic connection requires a regular magnetization");
  }
}

struct NodeValues {
  double a = 0.0;
  double b = 0.0;
  double virial = 0.0;
};

/// Route A and B integrands and the virial residual
/// ‖∇ψ‖² − ‖xψ‖² − ½⟨x·(sΛ)σ_zψ⟩ for the optimizer at coupling s.
inline NodeValues node_values(const ModelParams& params, const Vector& sigma, double s,
                              const WaveFunction& psi) {
  const TruncatedBasis& basis = psi.basis();
  const Vector& c = psi.coefficients();
  const int N = params.n_spins, M = params.n_modes;
  std::vector<Vector> zpsi;
  for (int n = 0; n < N; ++n) zpsi.push_back(build_spin(SpinAxis::kZ, n, basis).apply(c));
  Vector tx = Vector::Zero(c.size());
  for (int n = 0; n < N; ++n) {
    if (params.tunneling(n) == 0.0) continue;
    tx += params.tunneling(n) * build_spin(SpinAxis::kX, n, basis).apply(c);
  }
  const Vector lam_sigma = params.coupling * sigma;
  NodeValues out;
  double grad2 = 0.0, x2 = 0.0, lz2 = 0.0, cross = 0.0;
  for (int m = 0; m < M; ++m) {
    const OperatorMatrix X = build_position(m, basis);
    const OperatorMatrix D = build_derivative(m, basis);
    Vector field = Vector::Zero(c.size());
    for (int n = 0; n < N; ++n) field += params.coupling(m, n) * zpsi[static_cast<std::size_t>(n)];
    out.a += c.dot(X.apply(field));
    lz2 += field.squaredNorm();
    cross += tx.dot(D.apply(Vector(field - lam_sigma(m) * c)));
    grad2 += D.apply(c).squaredNorm();
    x2 += X.apply(c).squaredNorm();
  }
  out.b = s * (0.5 * lam_sigma.squaredNorm() - 0.5 * lz2) - cross;
  out.virial = grad2 - x2 - 0.5 * s * out.a;
  return out;
}

inline std::vector<std::pair<double, double>> composite_gauss(int panels) {
  using Rule = boost::math::quadrature::gauss<double, 8>;
  const auto& x = Rule::abscissa();
  const auto& w = Rule::weights();
  std::vector<std::pair<double, double>> nodes;
  const double h = 1.0 / panels;
  for (int p = 0; p < panels; ++p) {
    const double mid = (p + 0.5) * h;
    for (std::size_t k = x.size(); k-- > 0;) nodes.emplace_back(mid - 0.5 * h * x[k], 0.5 * h * w[k]);
    for (std::size_t k = 0; k < x.size(); ++k) nodes.emplace_back(mid + 0.5 * h * x[k], 0.5 * h * w[k]);
  }
  return nodes;
}

}  // namespace detail

/// Optimizer ψ_s of F_LL^{sΛ}(σ, 0). For one spin and one mode it is the
/// ground state at the inverse-map potentials; otherwise a constrained search.
inline WaveFunction ac_optimizer(const ModelParams& params, const Vector& sigma, double s,
                                 const AdiabaticOptions& opts = {},
                                 const std::optional<WaveFunction>& warm = std::nullopt) {
  const ModelParams ps = params.with_coupling_scale(s);
  const DensityPair target{sigma, Vector::Zero(params.n_modes)};
  if (params.n_spins == 1 && params.n_modes == 1) {
    FunctionalResult r = lieb_functional(ps, target, opts.tol, opts.functional);
    if (const auto* w = std::get_if<WaveFunction>(&r.optimizer)) return *w;
    throw ConvergenceError("degenerate optimizer in the one-spin adiabatic path");
  }
  SearchOptions so = opts.search;
  so.functional = opts.functional;
  if (warm) {
    so.warm_start = warm;
    so.restarts = 0;
  }
  FunctionalResult r = fll_constrained_search(ps, target, opts.tol, opts.seed, so);
  return std::get<WaveFunction>(r.optimizer);
}

/// Route A integrand a(s) = ⟨ψ_s, x·Λσ_z ψ_s⟩.
inline double ac_integrand(const ModelParams& params, const Vector& sigma, double s,
                           const AdiabaticOptions& opts = {}) {
  params.validate();
  detail::require_regular(sigma);
  const WaveFunction psi = ac_optimizer(params, sigma, s, opts);
  return detail::node_values(params, sigma, s, psi).a;
}

/// G^Λ(σ) and both adiabatic integrals by composite Gauss–Legendre, doubling
/// the panel count until both integrals change by less than quad_tol.
inline AdiabaticTrace g_lambda(const ModelParams& params, const Vector& sigma,
                               const AdiabaticOptions& opts = {}) {
  params.validate();
  if (sigma.size() != params.n_spins) throw ConfigError("sigma must have n_spins entries");
  detail::require_regular(sigma);
  if (!(opts.quad_tol > 0.0)) throw ConfigError("quad_tol must be positive");

  AdiabaticTrace trace;
  trace.params = params;
  trace.sigma = sigma;
  trace.F_zero = params.n_modes;
  for (int n = 0; n < params.n_spins; ++n) {
    trace.F_zero -= std::abs(params.tunneling(n)) * std::sqrt(1.0 - sigma(n) * sigma(n));
  }

  double prev_a = 0.0, prev_b = 0.0;
  bool have_prev = false;
  for (int panels = std::max(1, opts.initial_panels); panels <= opts.max_panels; panels *= 2) {
    AdiabaticTrace level;
    level.params = trace.params;
    level.sigma = trace.sigma;
    level.F_zero = trace.F_zero;
    level.refinement_changes = trace.refinement_changes;
    level.panels = panels;
    std::optional<WaveFunction> warm;
    for (const auto& [s, w] : detail::composite_gauss(panels)) {
      WaveFunction psi = ac_optimizer(params, sigma, s, opts, opts.chained ? warm : std::nullopt);
      const detail::NodeValues nv = detail::node_values(params, sigma, s, psi);
      level.s_nodes.push_back(s);
      level.weights.push_back(w);
      level.integrand_values.push_back(nv.a);
      level.g_integrand_values.push_back(nv.b);
      level.virial_residuals.push_back(nv.virial);
      level.integral_a += w * nv.a;
      level.G_value += w * nv.b;
      warm = psi;
      level.optimizers.push_back(std::move(psi));
    }
    level.F_reconstructed = level.reconstruct(Vector::Zero(params.n_modes));
    const auto& a = level.integrand_values;
    for (std::size_t i = 1; i < a.size(); ++i) {
      if (a[i] > a[i - 1] + opts.monotonicity_tol) level.monotone = false;
    }
    for (std::size_t i = 1; i + 1 < a.size(); ++i) {
      const double jump = std::abs(a[i + 1] - a[i]);
      const double local = std::max(std::abs(a[i] - a[i - 1]),
                                    i + 2 < a.size() ? std::abs(a[i + 2] - a[i + 1]) : 0.0);
      if (jump > 1e-6 && jump > 10.0 * local) level.kink_flag = true;
    }
    if (have_prev) {
      const double change = std::max(std::abs(level.integral_a - prev_a),
                                     std::abs(level.G_value - prev_b));
      level.refinement_changes.push_back(change);
      if (change < opts.quad_tol) {
        level.converged = true;
        return level;
      }
    }
    prev_a = level.integral_a;
    prev_b = level.G_value;
    have_prev = true;
    trace = std::move(level);
  }
  throw QuadratureError("adiabatic quadrature did not converge", std::move(trace));
}

/// |∫a − ∫b|: the two adiabatic routes must agree.
inline double ac_consistency(const AdiabaticTrace& trace) {
  return std::abs(trace.integral_a - trace.G_value);
}

inline double ac_consistency(const ModelParams& params, const Vector& sigma,
                             const AdiabaticOptions& opts = {}) {
  return ac_consistency(g_lambda(params, sigma, opts));
}

}  // namespace dickedft
