// Copyright 2026 The dickedft Authors
// SPDX-License-Identifier: Apache-2.0

/**
 * @file constrained_search.hpp
 * @brief Levy–Lieb functional F_LL(σ, ξ) = min ⟨ψ, H_0 ψ⟩ over real ψ with
 *        ‖ψ‖ = 1, ⟨σ_z⟩ = σ and ⟨x⟩ = ξ.
 *
 * The constraint set is a smooth manifold wherever the normals
 * {ψ, σ_z^n ψ, x_m ψ} are independent. The search runs Riemannian conjugate
 * gradients on it (gradient projected on the normal complement, retraction by
 * a Newton correction along the normals), then polishes the best run with
 * Newton's method on the full KKT system, whose multipliers are (E, v, j).
 */

#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "dickedft/error.hpp"
#include "dickedft/functionals.hpp"
#include "dickedft/model.hpp"
#include "dickedft/spectral.hpp"

namespace dickedft {

struct SearchOptions {
  int restarts = 5;
  double perturbation = 0.1;
  int max_iterations = 20000;
  /// Switch to the Newton polish below this projected-gradient norm; the
  /// objective's round-off stalls descent near √ε anyway.
  double gradient_tol = 1e-6;
  int newton_iterations = 30;
  double constraint_tol = 1e-8;
  bool verify_cutoff = true;
  int max_cutoff_levels = 8;
  /// 0 picks the cutoff from the trial-state tail and the spectrum at the
  /// decoupled potential guess.
  int initial_cutoff = 0;
  /// Extra starting point, e.g. the optimizer of a nearby problem. It is
  /// embedded into the search basis.
  std::optional<WaveFunction> warm_start;
  FunctionalOptions functional;
};

/// Copies coefficients between truncations of the same model by matching
/// (spin configuration, occupations); states beyond the target cutoff are
/// dropped and the result renormalized.
inline WaveFunction embed_state(const WaveFunction& psi, const TruncatedBasis& to) {
  const TruncatedBasis& from = psi.basis();
  if (from.n_spins() != to.n_spins() || from.n_modes() != to.n_modes()) {
    throw ConfigError("cannot embed between different models");
  }
  Vector c = Vector::Zero(static_cast<Eigen::Index>(to.dimension()));
  std::vector<int> occ(static_cast<std::size_t>(from.n_modes()));
  for (std::size_t i = 0; i < from.dimension(); ++i) {
    bool inside = true;
    for (int m = 0; m < from.n_modes(); ++m) {
      occ[static_cast<std::size_t>(m)] = from.occupation(i, m);
      if (occ[static_cast<std::size_t>(m)] >= to.cutoff()) inside = false;
    }
    if (!inside) continue;
    c(static_cast<Eigen::Index>(to.index(from.spin_index(i), occ))) =
        psi.coefficients()(static_cast<Eigen::Index>(i));
  }
  return WaveFunction::normalized(to, std::move(c));
}

namespace detail {

/// Constrained quadratic problem on the basis states compatible with the
/// frozen spins. Constraint 0 is the norm; then free spins, then modes.
struct SearchProblem {
  TruncatedBasis basis;
  std::vector<std::size_t> indices;  ///< full index of each local coordinate
  SparseMatrix h;
  std::vector<SparseMatrix> ops;
  Vector targets;
  std::vector<int> free_spins;
  int n_modes = 0;

  Eigen::Index size() const { return h.rows(); }
  int constraint_count() const { return static_cast<int>(ops.size()); }

  double objective(const Vector& psi) const { return psi.dot(h * psi); }

  Vector constraints(const Vector& psi) const {
    Vector c(constraint_count());
    for (int k = 0; k < constraint_count(); ++k) {
      c(k) = psi.dot(ops[static_cast<std::size_t>(k)] * psi) - targets(k);
    }
    return c;
  }

  Matrix normals(const Vector& psi) const {
    Matrix n(size(), constraint_count());
    for (int k = 0; k < constraint_count(); ++k) n.col(k) = ops[static_cast<std::size_t>(k)] * psi;
    return n;
  }

  /// Least-squares coefficients of y in the span of the normals.
  static Vector normal_coefficients(const Matrix& n, const Vector& y) {
    Eigen::CompleteOrthogonalDecomposition<Matrix> cod(n.transpose() * n);
    cod.setThreshold(1e-13);
    return cod.solve(n.transpose() * y);
  }

  static Vector project(const Matrix& n, const Vector& y) {
    return y - n * normal_coefficients(n, y);
  }

  /// Newton correction along the normals back onto the constraint set.
  bool retract(Vector& psi) const {
    for (int it = 0; it < 60; ++it) {
      const Vector c = constraints(psi);
      if (c.cwiseAbs().maxCoeff() < 1e-14) return true;
      const Matrix n = normals(psi);
      Eigen::CompleteOrthogonalDecomposition<Matrix> cod(n.transpose() * n);
      cod.setThreshold(1e-13);
      const Vector delta = -0.5 * cod.solve(c);
      if (!delta.allFinite()) return false;
      psi += n * delta;
    }
    return constraints(psi).cwiseAbs().maxCoeff() < 1e-12;
  }

  Vector to_full(const Vector& local) const {
    Vector c = Vector::Zero(static_cast<Eigen::Index>(basis.dimension()));
    for (std::size_t k = 0; k < indices.size(); ++k) {
      c(static_cast<Eigen::Index>(indices[k])) = local(static_cast<Eigen::Index>(k));
    }
    return c;
  }

  Vector to_local(const Vector& full) const {
    Vector c(static_cast<Eigen::Index>(indices.size()));
    for (std::size_t k = 0; k < indices.size(); ++k) {
      c(static_cast<Eigen::Index>(k)) = full(static_cast<Eigen::Index>(indices[k]));
    }
    return c;
  }
};

inline SearchProblem make_problem(const ModelParams& params, const DensityPair& target,
                                  const TruncatedBasis& basis, const FrozenSplit& split) {
  SearchProblem p;
  p.basis = basis;
  p.free_spins = split.free;
  p.n_modes = params.n_modes;
  for (std::size_t i = 0; i < basis.dimension(); ++i) {
    bool ok = true;
    for (std::size_t k = 0; k < split.frozen.size() && ok; ++k) {
      ok = basis.spin_value(i, split.frozen[k]) == split.signs[k];
    }
    if (ok) p.indices.push_back(i);
  }
  const auto d = static_cast<Eigen::Index>(p.indices.size());
  std::vector<Triplet> sel;
  sel.reserve(p.indices.size());
  for (std::size_t k = 0; k < p.indices.size(); ++k) {
    sel.emplace_back(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(p.indices[k]), 1.0);
  }
  SparseMatrix S(d, static_cast<Eigen::Index>(basis.dimension()));
  S.setFromTriplets(sel.begin(), sel.end());
  const SparseMatrix St = S.transpose();
  auto restrict = [&](const SparseMatrix& a) -> SparseMatrix {
    SparseMatrix r = S * a * St;
    r.makeCompressed();
    return r;
  };
  p.h = restrict(build_h0(params, basis).sparse());
  SparseMatrix id(d, d);
  id.setIdentity();
  p.ops.push_back(id);
  p.targets.resize(1 + static_cast<Eigen::Index>(split.free.size()) + params.n_modes);
  p.targets(0) = 1.0;
  Eigen::Index k = 1;
  for (int n : split.free) {
    p.ops.push_back(restrict(build_spin(SpinAxis::kZ, n, basis).sparse()));
    p.targets(k++) = target.sigma(n);
  }
  for (int m = 0; m < params.n_modes; ++m) {
    p.ops.push_back(restrict(build_position(m, basis).sparse()));
    p.targets(k++) = target.xi(m);
  }
  return p;
}

struct SearchRun {
  Vector psi;
  double value = std::numeric_limits<double>::infinity();
  double gradient = std::numeric_limits<double>::infinity();
  int iterations = 0;
  bool ok = false;
};

/// Riemannian conjugate gradients (Polak–Ribière+) from psi0.
inline SearchRun riemannian_cg(const SearchProblem& p, Vector psi,
                               const SearchOptions& opts) {
  SearchRun run;
  if (!p.retract(psi)) return run;
  auto gradient = [&](const Vector& x, Matrix& n, Vector& w) {
    n = p.normals(x);
    const Vector hx = p.h * x;
    w = SearchProblem::normal_coefficients(n, hx);
    return Vector(2.0 * (hx - n * w));
  };
  Matrix n;
  Vector w;
  Vector g = gradient(psi, n, w);
  Vector d = -g;
  double f = p.objective(psi);
  int it = 0;
  int stalled = 0;
  for (; it < opts.max_iterations; ++it) {
    const double gn = g.norm();
    if (gn < opts.gradient_tol) break;
    double slope = g.dot(d);
    if (slope >= 0.0) {
      d = -g;
      slope = -gn * gn;
    }
    // Initial step from the curvature of the Lagrangian along d.
    Vector ad = p.h * d;
    for (int k = 0; k < p.constraint_count(); ++k) ad -= w(k) * (p.ops[static_cast<std::size_t>(k)] * d);
    const double curv = 2.0 * d.dot(ad);
    double alpha = curv > 0.0 ? -slope / curv : 1.0 / std::max(gn, 1e-12);
    bool accepted = false;
    Vector next;
    double fn = f;
    for (int ls = 0; ls < 50; ++ls, alpha *= 0.5) {
      next = psi + alpha * d;
      if (!p.retract(next)) continue;
      fn = p.objective(next);
      if (fn <= f + 1e-4 * alpha * slope || fn <= f - 1e-15 * std::abs(f)) {
        accepted = true;
        break;
      }
    }
    if (!accepted) break;
    stalled = (f - fn <= 1e-14 * (1.0 + std::abs(f))) ? stalled + 1 : 0;
    if (stalled > 20) break;
    Matrix n_next;
    Vector w_next;
    const Vector g_next = gradient(next, n_next, w_next);
    const Vector g_old_t = SearchProblem::project(n_next, g);
    const double beta = std::max(0.0, g_next.dot(g_next - g_old_t) / (gn * gn));
    d = -g_next + beta * SearchProblem::project(n_next, d);
    psi = std::move(next);
    g = g_next;
    n = std::move(n_next);
    w = std::move(w_next);
    f = fn;
    // Periodic restart keeps the directions conjugate on the curved set.
    if ((it + 1) % 200 == 0) d = -g;
  }
  run.psi = std::move(psi);
  run.value = f;
  run.gradient = g.norm();
  run.iterations = it;
  run.ok = true;
  return run;
}

struct KktState {
  Vector psi;
  Vector mu;  ///< H ψ = Σ μ_k A_k ψ
  double stationarity = std::numeric_limits<double>::infinity();
  double constraint = std::numeric_limits<double>::infinity();
};

inline KktState kkt_residuals(const SearchProblem& p, Vector psi, Vector mu) {
  KktState s;
  Vector r = p.h * psi;
  for (int k = 0; k < p.constraint_count(); ++k) r -= mu(k) * (p.ops[static_cast<std::size_t>(k)] * psi);
  s.stationarity = r.norm();
  s.constraint = p.constraints(psi).cwiseAbs().maxCoeff();
  s.psi = std::move(psi);
  s.mu = std::move(mu);
  return s;
}

/// Newton's method on the bordered system
///   [H − Σ μ_k A_k   −N] [dψ]   [−r]
///   [      Nᵀ         0] [dμ] = [−c/2].
inline KktState newton_kkt(const SearchProblem& p, const Vector& psi0, int iterations) {
  Vector psi = psi0;
  Vector mu = SearchProblem::normal_coefficients(p.normals(psi), p.h * psi);
  KktState best = kkt_residuals(p, psi, mu);
  const Eigen::Index d = p.size();
  const int q = p.constraint_count();
  for (int it = 0; it < iterations; ++it) {
    if (best.stationarity < 1e-13 && best.constraint < 1e-15) break;
    const Matrix n = p.normals(psi);
    SparseMatrix hm = p.h;
    for (int k = 0; k < q; ++k) hm -= mu(k) * p.ops[static_cast<std::size_t>(k)];
    std::vector<Triplet> t;
    t.reserve(static_cast<std::size_t>(hm.nonZeros() + 2 * d * q));
    for (Eigen::Index r = 0; r < hm.outerSize(); ++r) {
      for (SparseMatrix::InnerIterator itr(hm, r); itr; ++itr) t.emplace_back(itr.row(), itr.col(), itr.value());
    }
    for (int k = 0; k < q; ++k) {
      for (Eigen::Index i = 0; i < d; ++i) {
        const double v = n(i, k);
        if (v == 0.0) continue;
        t.emplace_back(i, d + k, -v);
        t.emplace_back(d + k, i, v);
      }
    }
    Eigen::SparseMatrix<double> J(d + q, d + q);
    J.setFromTriplets(t.begin(), t.end());
    J.makeCompressed();
    Vector rhs(d + q);
    rhs.head(d) = -(hm * psi);
    rhs.tail(q) = -0.5 * p.constraints(psi);
    Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu;
    lu.compute(J);
    if (lu.info() != Eigen::Success) break;
    const Vector step = lu.solve(rhs);
    if (lu.info() != Eigen::Success || !step.allFinite()) break;
    psi += step.head(d);
    mu += step.tail(q);
    KktState s = kkt_residuals(p, psi, mu);
    if (s.stationarity + s.constraint < best.stationarity + best.constraint) {
      best = s;
    } else if (it > 3) {
      break;
    }
  }
  return best;
}

struct SearchOutcome {
  Vector psi;  ///< local coordinates
  Vector mu;
  double value = std::numeric_limits<double>::infinity();
  double gradient = 0.0;
  double stationarity = 0.0;
  double constraint = 0.0;
  int iterations = 0;
};

/// Best of the runs from the given starts, polished by Newton–KKT.
inline SearchOutcome solve_problem(const SearchProblem& p, const std::vector<Vector>& starts,
                                   const SearchOptions& opts) {
  std::optional<SearchRun> best;
  int iterations = 0;
  for (const Vector& s : starts) {
    SearchRun r = riemannian_cg(p, s, opts);
    iterations += r.iterations;
    if (r.ok && (!best || r.value < best->value)) best = std::move(r);
  }
  if (!best) throw ConvergenceError("constrained search could not reach the constraint set");
  SearchOutcome out;
  out.iterations = iterations;
  out.gradient = best->gradient;
  KktState base = kkt_residuals(
      p, best->psi, SearchProblem::normal_coefficients(p.normals(best->psi), p.h * best->psi));
  KktState polished = newton_kkt(p, best->psi, opts.newton_iterations);
  const bool better = polished.constraint < 1e-12 &&
                      polished.stationarity < base.stationarity &&
                      p.objective(polished.psi) <= best->value + 1e-9 * (1.0 + std::abs(best->value));
  const KktState& use = better ? polished : base;
  out.psi = use.psi;
  out.mu = use.mu;
  out.stationarity = use.stationarity;
  out.constraint = use.constraint;
  out.value = p.objective(out.psi);
  return out;
}

inline Multipliers multipliers_from(const SearchProblem& p, const Vector& mu, int n_spins) {
  Multipliers m;
  m.energy = mu(0);
  m.v = Vector::Constant(n_spins, std::numeric_limits<double>::quiet_NaN());
  m.j = Vector(p.n_modes);
  Eigen::Index k = 1;
  for (int n : p.free_spins) m.v(n) = -mu(k++);
  for (int q = 0; q < p.n_modes; ++q) m.j(q) = -mu(k++);
  return m;
}

inline int initial_search_cutoff(const ModelParams& params, const DensityPair& target,
                                 const SearchOptions& opts) {
  if (opts.initial_cutoff > 0) return std::max(2, opts.initial_cutoff);
  int K = trial_cutoff(target, 1e-14, opts.functional.initial_cutoff);
  if (!params.decoupled()) {
    Vector s = target.sigma.cwiseMax(-1.0 + 1e-3).cwiseMin(1.0 - 1e-3);
    const Potentials guess{decoupled_guess(params, s),
                           -(params.coupling * target.sigma + 2.0 * target.xi)};
    CutoffOptions co = opts.functional.cutoff_options();
    try {
      K = std::max(K, converge_cutoff(params, guess, 1e-10, 1, co).cutoff_used);
    } catch (const CutoffConvergenceError& e) {
      K = std::max(K, e.best().cutoff_used);
    }
  }
  return K;
}

}  // namespace detail

/// Levy–Lieb constrained search. Starts from the trial state and from
/// `restarts` random perturbations of it drawn from the seeded generator.
inline FunctionalResult fll_constrained_search(const ModelParams& params,
                                               const DensityPair& target,
                                               double tol = 1e-9,
                                               std::uint64_t seed = 0,
                                               const SearchOptions& opts = {}) {
  params.validate();
  target.validate(params);
  const auto split = detail::split_frozen(target.sigma, 1e-12);
  DensityPair t = target;
  for (std::size_t k = 0; k < split.frozen.size(); ++k) t.sigma(split.frozen[k]) = split.signs[k];

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  int K = detail::initial_search_cutoff(params, t, opts);
  TruncatedBasis basis = build_basis(params, {K}, opts.functional.dimension_cap);
  detail::SearchProblem prob = detail::make_problem(params, t, basis, split);

  std::vector<Vector> starts;
  const Vector trial = prob.to_local(trial_state(params, t, basis).psi.coefficients());
  starts.push_back(trial);
  if (opts.warm_start) {
    starts.push_back(prob.to_local(embed_state(*opts.warm_start, basis).coefficients()));
  }
  for (int r = 0; r < opts.restarts; ++r) {
    Vector noise(trial.size());
    for (Eigen::Index i = 0; i < noise.size(); ++i) noise(i) = normal(rng);
    noise *= opts.perturbation / noise.norm();
    starts.push_back((trial + noise).normalized());
  }
  detail::SearchOutcome out = detail::solve_problem(prob, starts, opts);
  double change = std::numeric_limits<double>::quiet_NaN();

  if (opts.verify_cutoff) {
    bool settled = false;
    for (int level = 0; level < opts.max_cutoff_levels; ++level) {
      const int K2 = grow_cutoff(K, opts.functional.growth);
      TruncatedBasis basis2;
      try {
        basis2 = build_basis(params, {K2}, opts.functional.dimension_cap);
      } catch (const SizingError&) {
        break;
      }
      detail::SearchProblem prob2 = detail::make_problem(params, t, basis2, split);
      const WaveFunction warm = embed_state(
          WaveFunction::normalized(basis, prob.to_full(out.psi)), basis2);
      detail::SearchOutcome out2 =
          detail::solve_problem(prob2, {prob2.to_local(warm.coefficients())}, opts);
      change = std::abs(out2.value - out.value);
      K = K2;
      basis = std::move(basis2);
      prob = std::move(prob2);
      out = std::move(out2);
      if (change <= tol) {
        settled = true;
        break;
      }
    }
    if (!settled) change = std::isnan(change) ? change : std::max(change, 2.0 * tol);
  }

  FunctionalResult res;
  res.value = out.value;
  res.cutoff_used = K;
  res.representable = split.frozen.empty();
  const Multipliers mult = detail::multipliers_from(prob, out.mu, params.n_spins);
  res.multipliers = mult;
  res.optimizer = WaveFunction::normalized(basis, prob.to_full(out.psi));
  res.residuals["schrodinger"] = out.stationarity;
  res.residuals["constraint"] = out.constraint;
  res.residuals["gradient"] = out.gradient;
  res.residuals["iterations"] = out.iterations;
  res.residuals["cutoff_change"] = change;
  if (split.frozen.empty()) {
    res.residuals["multiplier_identity"] =
        std::abs(out.value - (mult.energy - mult.v.dot(target.sigma) - mult.j.dot(target.xi)));
  }
  res.converged = out.constraint <= opts.constraint_tol &&
                  (std::isnan(change) || change <= tol);
  if (out.constraint > opts.constraint_tol) {
    throw ConvergenceError("constraint violation " + std::to_string(out.constraint) +
                           " above tolerance at exit");
  }
  return res;
}

/// F_LL − F_L; never below −tol for a correct pair of evaluations.
inline double fll_fl_gap(const ModelParams& params, const DensityPair& target,
                         double tol = 1e-8, std::uint64_t seed = 0,
                         const SearchOptions& opts = {}) {
  const double fll = fll_constrained_search(params, target, 0.1 * tol, seed, opts).value;
  const double fl = lieb_functional(params, target, 0.1 * tol, opts.functional).value;
  const double gap = fll - fl;
  if (gap < -tol) {
    throw ConvergenceError("F_LL below F_L by " + std::to_string(-gap));
  }
  return gap;
}

}  // namespace dickedft
