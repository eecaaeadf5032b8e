// Copyright 2026 The dickedft Authors
// SPDX-License-Identifier: Apache-2.0

/**
 * @file diagnostics.hpp
 * @brief Residual checks of the exact identities: virial theorems, the Rabi
 *        identities, zero momentum, force balance, Hohenberg–Kohn
 *        injectivity and the second-order optimality condition.
 *
 * Derivatives always use the truncated ladder operator ∂ of model.hpp.
 */

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "dickedft/constrained_search.hpp"
#include "dickedft/error.hpp"
#include "dickedft/functionals.hpp"
#include "dickedft/geometry.hpp"
#include "dickedft/model.hpp"
#include "dickedft/parallel.hpp"
#include "dickedft/spectral.hpp"

namespace dickedft {

struct ResidualReport {
  std::string name;
  double lhs = 0.0;
  double rhs = 0.0;
  double residual = 0.0;
  double tolerance = 0.0;
  bool passed = false;
  bool skipped = false;
  std::string context;

  /// Equality lhs = rhs within tol.
  static ResidualReport equality(std::string name, double lhs, double rhs, double tol,
                                 std::string context = {}) {
    ResidualReport r{std::move(name), lhs, rhs, std::abs(lhs - rhs), tol, false, false,
                     std::move(context)};
    r.passed = r.residual <= tol;
    return r;
  }

  /// Inequality lhs ≥ rhs; the residual is the violation.
  static ResidualReport at_least(std::string name, double lhs, double rhs, double tol,
                                 std::string context = {}) {
    ResidualReport r{std::move(name), lhs, rhs, std::max(0.0, rhs - lhs), tol, false, false,
                     std::move(context)};
    r.passed = r.residual <= tol;
    return r;
  }
};

inline constexpr double kDefaultResidualTol = 1e-6;

namespace detail {

inline std::string describe(const ModelParams& p) {
  std::ostringstream os;
  os.precision(17);
  os << "N=" << p.n_spins << " M=" << p.n_modes << " coupling=[";
  for (Eigen::Index i = 0; i < p.coupling.size(); ++i) os << (i ? " " : "") << p.coupling.data()[i];
  os << "] tunneling=[";
  for (Eigen::Index i = 0; i < p.tunneling.size(); ++i) os << (i ? " " : "") << p.tunneling(i);
  os << "]";
  return os.str();
}

}  // namespace detail

/// Both virial theorems for a ground state of H(v, j):
///   ‖∇ψ‖² = ‖xψ‖² + ½⟨x·Λσ_z⟩ + ½ j·ξ
///   ⟨t·σ_x⟩ = −(2/M) Re⟨ψ, (t·σ_x)(x·∇)ψ⟩.
inline std::pair<ResidualReport, ResidualReport> virial_ground(
    const ModelParams& params, const Potentials& pots, const WaveFunction& psi,
    double tol = kDefaultResidualTol, double precondition_tol = 1e-6) {
  const TruncatedBasis& basis = psi.basis();
  const ModelOperators ops(params, basis);
  const Vector& c = psi.coefficients();
  const Vector hc = ops.hamiltonian(pots).apply(c);
  const double e = c.dot(hc);
  if ((hc - e * c).norm() > precondition_tol) {
    throw PreconditionError("state is not an eigenstate of H(v, j)");
  }
  double grad2 = 0.0, x2 = 0.0, xi_j = 0.0;
  Vector xgrad = Vector::Zero(c.size());
  for (int m = 0; m < params.n_modes; ++m) {
    const auto mm = static_cast<std::size_t>(m);
    const Vector dc = ops.derivative[mm].apply(c);
    grad2 += dc.squaredNorm();
    x2 += ops.position[mm].apply(c).squaredNorm();
    xi_j += pots.j(m) * ops.position[mm].expectation(c);
    xgrad += ops.position[mm].apply(dc);
  }
  const double coupling = c.dot(ops.coupling_apply(c));
  Vector tx = Vector::Zero(c.size());
  for (int n = 0; n < params.n_spins; ++n) {
    tx += params.tunneling(n) * ops.sigma_x[static_cast<std::size_t>(n)].apply(c);
  }
  const std::string ctx = detail::describe(params);
  return {ResidualReport::equality("virial_first", grad2, x2 + 0.5 * coupling + 0.5 * xi_j, tol, ctx),
          ResidualReport::equality("virial_second", c.dot(tx),
                                   -2.0 / params.n_modes * tx.dot(xgrad), tol, ctx)};
}

/// Rabi-model identities for an optimizer of F_LL(σ, ξ), with ψ± the spin-up
/// and spin-down components:
///   (iii)  ‖ψ′‖² − ‖xψ‖² = λ⟨x⟩₊ − λξ/2 − ξ(λσ + 2ξ)/2
///   (iv a) ⟨x⟩₊ = −⟨x⟩₋ + ξ
///   (iv b) ⟨x⟩₊ = −t⟨ψ⁻, ψ⁺′⟩ − λ(1 − σ²)/4 + ξ(1 + σ)/2
///   (iv c) (1 + σ²)/(4t) ≥ ⟨ψ⁻, ψ⁺″⟩.
inline std::vector<ResidualReport> rabi_identities(const ModelParams& params,
                                                   const DensityPair& target,
                                                   const WaveFunction& psi,
                                                   double tol = kDefaultResidualTol) {
  if (params.n_spins != 1 || params.n_modes != 1) {
    throw ConfigError("Rabi identities need one spin and one mode");
  }
  const TruncatedBasis& basis = psi.basis();
  const DensityPair got = density_pair(psi);
  if (got.distance(target) > std::max(tol, 1e-6)) {
    throw PreconditionError("state does not have the target densities");
  }
  const int K = basis.cutoff();
  const Vector& c = psi.coefficients();
  Vector up(K), down(K);
  for (int n = 0; n < K; ++n) {
    up(n) = c(2 * n);
    down(n) = c(2 * n + 1);
  }
  Matrix X = Matrix::Zero(K, K), D = Matrix::Zero(K, K);
  for (int n = 1; n < K; ++n) {
    const double a = std::sqrt(0.5 * n);
    X(n - 1, n) = X(n, n - 1) = a;
    D(n - 1, n) = a;
    D(n, n - 1) = -a;
  }
  const double lam = params.coupling(0, 0);
  const double t = params.tunneling(0);
  const double s = target.sigma(0), xi = target.xi(0);
  const double kinetic = (D * up).squaredNorm() + (D * down).squaredNorm();
  const double potential = (X * up).squaredNorm() + (X * down).squaredNorm();
  const double x_up = up.dot(X * up), x_down = down.dot(X * down);
  const std::string ctx = detail::describe(params);
  std::vector<ResidualReport> out;
  out.push_back(ResidualReport::equality(
      "rabi_iii", kinetic - potential,
      lam * x_up - 0.5 * lam * xi - 0.5 * xi * (lam * s + 2.0 * xi), tol, ctx));
  out.push_back(ResidualReport::equality("rabi_iv_a", x_up, -x_down + xi, tol, ctx));
  out.push_back(ResidualReport::equality(
      "rabi_iv_b", x_up,
      -t * down.dot(D * up) - lam * (1.0 - s * s) / 4.0 + xi * (1.0 + s) / 2.0, tol, ctx));
  out.push_back(ResidualReport::at_least("rabi_inequality", (1.0 + s * s) / (4.0 * t),
                                         down.dot(D * (D * up)), tol, ctx));
  return out;
}

/// max_m |⟨−i∂_m⟩| for a complex state.
inline ResidualReport zero_momentum(const ComplexVector& psi, const TruncatedBasis& basis,
                                    double tol = 1e-12) {
  double worst = 0.0;
  for (int m = 0; m < basis.n_modes(); ++m) {
    const ComplexVector dpsi = build_derivative(m, basis).apply(psi);
    // ⟨ψ, −i∂ψ⟩ = −i ψ^H ∂ψ.
    const std::complex<double> p = std::complex<double>(0.0, -1.0) * psi.dot(dpsi);
    worst = std::max(worst, std::abs(p));
  }
  return ResidualReport::equality("zero_momentum", worst, 0.0, tol);
}

inline ResidualReport zero_momentum(const WaveFunction& psi, double tol = 1e-12) {
  return zero_momentum(ComplexVector(psi.coefficients().cast<std::complex<double>>()),
                       psi.basis(), tol);
}

inline ResidualReport zero_momentum(const Ensemble& ens, double tol = 1e-12) {
  if (ens.states.empty()) throw ConfigError("empty ensemble");
  const TruncatedBasis& basis = ens.states.front().basis();
  double worst = 0.0;
  for (int m = 0; m < basis.n_modes(); ++m) {
    const OperatorMatrix D = build_derivative(m, basis);
    std::complex<double> p = 0.0;
    for (std::size_t k = 0; k < ens.states.size(); ++k) {
      const ComplexVector c = ens.states[k].coefficients().cast<std::complex<double>>();
      p += ens.weights[k] * std::complex<double>(0.0, -1.0) * c.dot(D.apply(c));
    }
    worst = std::max(worst, std::abs(p));
  }
  return ResidualReport::equality("zero_momentum", worst, 0.0, tol);
}

/// ‖j + Λσ + 2ξ‖ for ground-state densities of H(v, j).
inline ResidualReport force_balance(const ModelParams& params, const Potentials& pots,
                                    const DensityPair& density, double tol = 1e-8) {
  const Vector r = pots.j + params.coupling * density.sigma + 2.0 * density.xi;
  return ResidualReport::equality("force_balance", r.norm(), 0.0, tol, detail::describe(params));
}

struct HkPoint {
  Potentials potentials;
  DensityPair density;
  double energy = 0.0;
  int cutoff = 0;
  bool skipped = false;  ///< degenerate ground state
};

struct HkCollision {
  std::size_t first = 0;
  std::size_t second = 0;
  double distance = 0.0;
  bool first_regular = false;
  bool second_regular = false;
};

struct HkScanReport {
  std::vector<HkPoint> points;
  std::vector<HkCollision> collisions;
  double min_distance = std::numeric_limits<double>::infinity();
  double separation = 0.0;
  int skipped = 0;
};

/// Ground-state densities on a grid of potentials; pairs closer than 10·tol
/// in (σ, ξ) space are collisions.
inline HkScanReport hk_scan(const ModelParams& params, const std::vector<Potentials>& grid,
                            double tol = 1e-7, int threads = 1,
                            const CutoffOptions& opts = {}) {
  params.validate();
  HkScanReport rep;
  rep.separation = 10.0 * tol;
  rep.points = parallel_map(grid.size(), threads, [&](std::size_t i) {
    const EnergyResult e = energy(params, grid[i], 1e-11, opts);
    HkPoint p{grid[i], e.density, e.energy, e.spectrum.cutoff_used, e.spectrum.degenerate};
    return p;
  });
  auto regular = [&](const DensityPair& d) {
    if (d.sigma.size() > kMaxGeometrySpins) return true;
    return is_regular(d.sigma.cwiseMax(-1.0).cwiseMin(1.0));
  };
  for (std::size_t a = 0; a < rep.points.size(); ++a) {
    if (rep.points[a].skipped) {
      ++rep.skipped;
      continue;
    }
    for (std::size_t b = a + 1; b < rep.points.size(); ++b) {
      if (rep.points[b].skipped) continue;
      const double d = rep.points[a].density.distance(rep.points[b].density);
      rep.min_distance = std::min(rep.min_distance, d);
      if (d <= rep.separation) {
        rep.collisions.push_back({a, b, d, regular(rep.points[a].density),
                                  regular(rep.points[b].density)});
      }
    }
  }
  return rep;
}

/// ⟨χ, H(v,j)χ⟩ ≥ E‖χ‖² on random unit tangent vectors
/// χ ⊥ {ψ, σ_z^n ψ, x_m ψ}.
inline ResidualReport second_order_check(const ModelParams& params, const Multipliers& mult,
                                         const WaveFunction& psi, int n_dirs = 200,
                                         std::uint64_t seed = 0, double slack = 1e-8) {
  if (!mult.v.allFinite() || !mult.j.allFinite()) {
    ResidualReport r = ResidualReport::at_least("second_order", 0.0, 0.0, slack,
                                                "non-finite multipliers (frozen spin)");
    r.skipped = true;
    return r;
  }
  const TruncatedBasis& basis = psi.basis();
  const ModelOperators ops(params, basis);
  const OperatorMatrix H = ops.hamiltonian(mult.potentials());
  const Vector& c = psi.coefficients();
  Matrix N(c.size(), 1 + params.n_spins + params.n_modes);
  N.col(0) = c;
  for (int n = 0; n < params.n_spins; ++n) N.col(1 + n) = ops.sigma_z[static_cast<std::size_t>(n)].apply(c);
  for (int m = 0; m < params.n_modes; ++m) {
    N.col(1 + params.n_spins + m) = ops.position[static_cast<std::size_t>(m)].apply(c);
  }
  Eigen::ColPivHouseholderQR<Matrix> qr(N);
  qr.setThreshold(1e-10);
  if (qr.rank() < N.cols()) {
    ResidualReport r = ResidualReport::at_least("second_order", 0.0, 0.0, slack,
                                                "tangent projection rank deficient");
    r.skipped = true;
    r.passed = true;
    return r;
  }
  const Matrix Q = qr.householderQ() * Matrix::Identity(N.rows(), N.cols());
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  double worst = std::numeric_limits<double>::infinity();
  for (int k = 0; k < n_dirs; ++k) {
    Vector chi(c.size());
    for (Eigen::Index i = 0; i < chi.size(); ++i) chi(i) = normal(rng);
    chi -= Q * (Q.transpose() * chi);
    chi -= Q * (Q.transpose() * chi);
    chi.normalize();
    worst = std::min(worst, chi.dot(H.apply(chi)) - mult.energy);
  }
  return ResidualReport::at_least("second_order", worst, 0.0, slack, detail::describe(params));
}

// ---------------------------------------------------------------------------
// Default battery

/// Checks over a fixed parameter set; every report should pass.
inline std::vector<ResidualReport> default_battery(std::uint64_t seed = 0, int threads = 1) {
  std::vector<ResidualReport> out;
  const auto rabi = ModelParams::rabi(1.0, 1.0);
  Matrix lam2(1, 2);
  lam2 << 0.8, 0.5;
  const auto two = ModelParams::make(2, 1, lam2, (Vector(2) << 1.0, 0.7).finished());

  {
    const auto p = ModelParams::rabi(1.3, 0.7);
    const Potentials pots{Vector::Constant(1, 0.2), Vector::Constant(1, -0.3)};
    const EnergyResult e = energy(p, pots, 1e-11);
    auto [a, b] = virial_ground(p, pots, e.spectrum.ground());
    out.push_back(a);
    out.push_back(b);
    out.push_back(force_balance(p, pots, e.density));
    out.push_back(zero_momentum(e.spectrum.ground()));
  }
  {
    const Potentials pots{(Vector(2) << 0.3, -0.2).finished(), Vector::Constant(1, 0.4)};
    const EnergyResult e = energy(two, pots, 1e-11);
    auto [a, b] = virial_ground(two, pots, e.spectrum.ground());
    out.push_back(a);
    out.push_back(b);
    out.push_back(force_balance(two, pots, e.density));
  }
  {
    const DensityPair target{Vector::Constant(1, 0.5), Vector::Constant(1, 0.2)};
    const FunctionalResult r = fll_constrained_search(rabi, target, 1e-10, seed);
    const WaveFunction& psi = std::get<WaveFunction>(r.optimizer);
    for (auto& rep : rabi_identities(rabi, target, psi)) out.push_back(rep);
    out.push_back(second_order_check(rabi, *r.multipliers, psi, 200, seed));
    out.push_back(ResidualReport::equality("schrodinger", r.residuals.at("schrodinger"), 0.0, 1e-7));
    out.push_back(ResidualReport::equality("aufbau_index",
                                           aufbau_index(rabi, *r.multipliers, psi), 0.0, 0.0));
    const FunctionalResult l = lieb_functional(rabi, target, 1e-10);
    out.push_back(ResidualReport::equality("fl_equals_fll", l.value, r.value, 1e-8));
  }
  {
    std::vector<Potentials> grid;
    for (int a = -2; a <= 2; ++a) {
      for (int b = -2; b <= 2; ++b) {
        grid.push_back({Vector::Constant(1, 0.5 * a), Vector::Constant(1, 0.5 * b)});
      }
    }
    const HkScanReport hk = hk_scan(rabi, grid, 1e-7, threads);
    ResidualReport r = ResidualReport::at_least("hk_min_separation", hk.min_distance,
                                                hk.separation, 0.0);
    r.context = "collisions=" + std::to_string(hk.collisions.size());
    out.push_back(r);
  }
  return out;
}

}  // namespace dickedft
