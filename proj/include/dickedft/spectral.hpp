// Copyright 2026 The dickedft Authors
// SPDX-License-Identifier: Apache-2.0

/**
 * @file spectral.hpp
 * @brief Low-lying eigenpairs of truncated Hamiltonians, Fock-cutoff
 *        convergence and ground-state degeneracy detection.
 */

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dickedft/error.hpp"
#include "dickedft/lanczos.hpp"
#include "dickedft/model.hpp"

namespace dickedft {

struct SpectralResult {
  Vector eigenvalues;  ///< ascending
  std::vector<WaveFunction> eigenvectors;
  double gap = std::numeric_limits<double>::infinity();
  bool degenerate = false;
  int cutoff_used = 0;
  double residual = 0.0;  ///< max_i ‖Hψ_i − E_iψ_i‖

  const WaveFunction& ground() const { return eigenvectors.front(); }
  double ground_energy() const { return eigenvalues(0); }
  int count() const { return static_cast<int>(eigenvalues.size()); }
};

struct EigensolveOptions {
  std::size_t dense_limit = 800;
  double lanczos_tol = 1e-12;
  int max_restarts = 2000;
  /// Defaults to 1e-9·(1 + |E_0|).
  std::optional<double> degeneracy_tol;
};

inline double default_degeneracy_tol(double e0) {
  return 1e-9 * (1.0 + std::abs(e0));
}

/// Sign convention: the largest-magnitude coefficient is made positive.
inline void fix_phase(Vector& v) {
  Eigen::Index imax = 0;
  v.cwiseAbs().maxCoeff(&imax);
  if (v(imax) < 0.0) v = -v;
}

inline SpectralResult eigensolve(const OperatorMatrix& H,
                                 const TruncatedBasis& basis, int k,
                                 const EigensolveOptions& opts = {}) {
  const std::size_t dim = H.dimension();
  if (dim != basis.dimension()) throw ConfigError("operator/basis mismatch");
  if (k < 1 || static_cast<std::size_t>(k) > dim) {
    throw ConfigError("eigenpair count must lie in [1, D]");
  }
  if (!H.is_real()) throw ConfigError("eigensolve expects a real operator");

  Vector values;
  Matrix vectors;
  if (dim <= opts.dense_limit) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(H.dense());
    if (es.info() != Eigen::Success) {
      throw ConvergenceError("dense eigensolver failed");
    }
    values = es.eigenvalues().head(k);
    vectors = es.eigenvectors().leftCols(k);
  } else {
    LanczosOptions lo;
    lo.nev = k;
    lo.tol = opts.lanczos_tol;
    lo.max_restarts = opts.max_restarts;
    const SparseMatrix& A = H.sparse();
    auto r = lanczos_lowest(
        [&A](const Vector& x) -> Vector { return A * x; },
        static_cast<Eigen::Index>(dim), lo);
    if (!r.converged) {
      throw ConvergenceError("Lanczos did not converge, residual " +
                             std::to_string(r.residuals.maxCoeff()));
    }
    values = r.values;
    vectors = r.vectors;
  }

  SpectralResult out;
  out.eigenvalues = values;
  out.cutoff_used = basis.cutoff();
  for (int i = 0; i < k; ++i) {
    Vector v = vectors.col(i);
    v.normalize();
    fix_phase(v);
    out.residual = std::max(out.residual, (H.apply(v) - values(i) * v).norm());
    out.eigenvectors.emplace_back(basis, std::move(v));
  }
  if (k >= 2) {
    out.gap = values(1) - values(0);
    const double tol = opts.degeneracy_tol.value_or(default_degeneracy_tol(values(0)));
    out.degenerate = out.gap <= tol;
  }
  return out;
}

/// Number of eigenvalues within tol_deg of the lowest one.
inline int ground_degeneracy(const SpectralResult& result,
                             std::optional<double> tol_deg = std::nullopt) {
  if (result.count() < 1) throw ConfigError("empty spectral result");
  const double e0 = result.eigenvalues(0);
  const double tol = tol_deg.value_or(default_degeneracy_tol(e0));
  int d = 0;
  for (int i = 0; i < result.count(); ++i) {
    if (result.eigenvalues(i) - e0 <= tol) ++d;
  }
  return d;
}

class CutoffConvergenceError : public ConvergenceError {
 public:
  CutoffConvergenceError(const std::string& what, SpectralResult best)
      : ConvergenceError(what), best_(std::move(best)) {}
  const SpectralResult& best() const { return best_; }

 private:
  SpectralResult best_;
};

struct CutoffOptions {
  int initial_cutoff = 8;
  double growth = 1.5;
  std::size_t dimension_cap = kDefaultDimensionCap;
  EigensolveOptions eigen;
};

inline int grow_cutoff(int k, double growth) {
  return std::max(k + 1, static_cast<int>(std::ceil(growth * k)));
}

namespace detail {

/// With Λ = 0 and j = 0 the oscillators are diagonal in the Fock basis, so a
/// truncated eigenvalue is exact whenever it lies below every state that has
/// some occupation ≥ K. The lowest such state has energy M + 2K − Σ√(t²+v²).
inline bool truncation_exact(const ModelParams& params, const Potentials& pots,
                             const SpectralResult& r, int cutoff) {
  if (!params.decoupled() || pots.j.cwiseAbs().maxCoeff() != 0.0) return false;
  double spin_floor = 0.0;
  for (int n = 0; n < params.n_spins; ++n) {
    spin_floor += std::hypot(params.tunneling(n), pots.v(n));
  }
  const double excluded = params.n_modes + 2.0 * cutoff - spin_floor;
  return r.eigenvalues(r.count() - 1) < excluded - 1e-12;
}

}  // namespace detail

/// Solves at growing cutoffs K ← ⌈1.5K⌉ until all k eigenvalues change by
/// less than tol; returns the result at the largest cutoff used.
inline SpectralResult converge_cutoff(const ModelParams& params,
                                      const Potentials& pots, double tol, int k,
                                      const CutoffOptions& opts = {}) {
  if (!(tol > 0.0)) throw ConfigError("cutoff tolerance must be positive");
  params.validate();
  pots.validate(params);
  int cutoff = std::max(2, opts.initial_cutoff);
  auto solve = [&](int K) {
    TruncatedBasis basis = build_basis(params, Truncation{K}, opts.dimension_cap);
    if (static_cast<std::size_t>(k) > basis.dimension()) {
      throw ConfigError("more eigenpairs requested than basis states");
    }
    return eigensolve(build_h(params, pots, basis), basis, k, opts.eigen);
  };
  SpectralResult prev = solve(cutoff);
  if (std::isinf(tol) || detail::truncation_exact(params, pots, prev, cutoff)) {
    return prev;
  }
  for (;;) {
    const int next = grow_cutoff(cutoff, opts.growth);
    SpectralResult cur;
    try {
      cur = solve(next);
    } catch (const SizingError& e) {
      throw CutoffConvergenceError(
          std::string("cutoff cap reached before convergence: ") + e.what(),
          std::move(prev));
    }
    const double change = (cur.eigenvalues - prev.eigenvalues).cwiseAbs().maxCoeff();
    cutoff = next;
    if (change < tol) return cur;
    prev = std::move(cur);
  }
}

}  // namespace dickedft
