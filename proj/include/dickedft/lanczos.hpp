// Copyright 2026 The dickedft Authors
// SPDX-License-Identifier: Apache-2.0

/**
 * @file lanczos.hpp
 * @brief Thick-restart Lanczos with full reorthogonalization for the lowest
 *        eigenpairs of a real symmetric operator.
 *
 * The Krylov basis V and its image W = A·V are kept explicitly, so every
 * Rayleigh–Ritz step is the exact projection VᵀAV. After a cycle the lowest
 * Ritz vectors are kept and the space is extended with the orthogonalized
 * residual of the last basis vector.
 */

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>

namespace dickedft {

struct LanczosOptions {
  int nev = 1;
  int basis_size = 0;  ///< 0 selects max(2·nev + 20, 40).
  int max_restarts = 1000;
  double tol = 1e-11;  ///< Residual tolerance relative to max(1, |θ|).
  std::uint64_t seed = 0x5eedULL;
};

struct LanczosResult {
  Eigen::VectorXd values;
  Eigen::MatrixXd vectors;
  Eigen::VectorXd residuals;
  int restarts = 0;
  bool converged = false;
};

namespace detail {

/// Orthogonalizes q against the first `count` columns of V (two passes).
inline double orthogonalize(Eigen::VectorXd& q, const Eigen::MatrixXd& V,
                            Eigen::Index count) {
  for (int pass = 0; pass < 2; ++pass) {
    if (count == 0) break;
    const Eigen::VectorXd c = V.leftCols(count).transpose() * q;
    q.noalias() -= V.leftCols(count) * c;
  }
  return q.norm();
}

}  // namespace detail

template <class Apply>
LanczosResult lanczos_lowest(Apply&& apply, Eigen::Index dim,
                             const LanczosOptions& opts) {
  using Eigen::Index;
  using Eigen::MatrixXd;
  using Eigen::VectorXd;

  const Index nev = std::min<Index>(opts.nev, dim);
  Index ncv = opts.basis_size > 0 ? opts.basis_size
                                  : std::max<Index>(2 * nev + 20, 40);
  ncv = std::min(ncv, dim);
  const Index keep = std::min<Index>(ncv - 1, nev + (ncv - nev) / 2);

  std::mt19937_64 rng(opts.seed);
  std::normal_distribution<double> normal;
  auto random_vector = [&] {
    VectorXd r(dim);
    for (Index i = 0; i < dim; ++i) r(i) = normal(rng);
    return r;
  };

  MatrixXd V(dim, ncv);
  MatrixXd W(dim, ncv);
  VectorXd q = random_vector();
  q.normalize();
  V.col(0) = q;
  W.col(0) = apply(V.col(0));
  Index filled = 1;

  LanczosResult out;
  for (int cycle = 0; cycle <= opts.max_restarts; ++cycle) {
    while (filled < ncv) {
      q = W.col(filled - 1);
      double nq = detail::orthogonalize(q, V, filled);
      if (nq < 1e-12 * std::max(1.0, W.col(filled - 1).norm())) {
        // Invariant subspace reached; continue from a fresh direction.
        q = random_vector();
        nq = detail::orthogonalize(q, V, filled);
      }
      V.col(filled) = q / nq;
      W.col(filled) = apply(V.col(filled));
      ++filled;
    }

    MatrixXd T = V.transpose() * W;
    T = 0.5 * (T + T.transpose()).eval();
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(T);
    const MatrixXd& Y = es.eigenvectors();
    const VectorXd& theta = es.eigenvalues();

    MatrixXd U = V * Y.leftCols(nev);
    MatrixXd AU = W * Y.leftCols(nev);
    VectorXd res(nev);
    bool done = true;
    for (Index i = 0; i < nev; ++i) {
      res(i) = (AU.col(i) - theta(i) * U.col(i)).norm();
      if (res(i) > opts.tol * std::max(1.0, std::abs(theta(i)))) done = false;
    }
    out.values = theta.head(nev);
    out.vectors = std::move(U);
    out.residuals = res;
    out.restarts = cycle;
    if (done || ncv == dim) {
      out.converged = done || ncv == dim;
      return out;
    }

    // Continuation direction: residual of the last basis vector against the
    // whole current space, to which every Ritz residual is parallel.
    VectorXd f = W.col(ncv - 1);
    double nf = detail::orthogonalize(f, V, ncv);
    MatrixXd Vk = V * Y.leftCols(keep);
    MatrixXd Wk = W * Y.leftCols(keep);
    V.leftCols(keep) = Vk;
    W.leftCols(keep) = Wk;
    nf = detail::orthogonalize(f, V, keep);
    if (nf < 1e-12) {
      f = random_vector();
      nf = detail::orthogonalize(f, V, keep);
    }
    V.col(keep) = f / nf;
    W.col(keep) = apply(V.col(keep));
    filled = keep + 1;
  }
  out.converged = false;
  return out;
}

}  // namespace dickedft
