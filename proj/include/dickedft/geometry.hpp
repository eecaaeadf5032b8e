// Copyright 2026 The dickedft Authors
// SPDX-License-Identifier: Apache-2.0

/**
 * @file geometry.hpp
 * @brief The regular set of magnetizations: the cube [-1,1]^N minus the
 *        affine hulls of maximally irregular vertex sets.
 *
 * A set S of cube vertices is maximally irregular when dim Aff(S) = N−1.
 * Every such hull is spanned by N affinely independent vertices of S, so the
 * enumeration runs over N-element subsets and keeps those of full affine rank.
 */

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <set>
#include <vector>

#include "dickedft/error.hpp"

namespace dickedft {

inline constexpr int kMaxGeometrySpins = 4;

/// Points σ with normal·σ = offset; unit normal, first nonzero entry positive.
struct Hyperplane {
  Eigen::VectorXd normal;
  double offset = 0.0;

  double signed_distance(const Eigen::VectorXd& sigma) const {
    return normal.dot(sigma) - offset;
  }
};

/// Vertex Ωe_α of the cube for spin configuration α (bit set = spin down,
/// spin 1 most significant).
inline Eigen::VectorXd omega_column(std::size_t alpha, int n_spins) {
  Eigen::VectorXd v(n_spins);
  for (int n = 0; n < n_spins; ++n) {
    const auto bit = static_cast<std::size_t>(n_spins - 1 - n);
    v(n) = ((alpha >> bit) & 1U) ? -1.0 : 1.0;
  }
  return v;
}

/// Subset of spin configurations with their cube vertices as columns.
struct VertexSet {
  std::vector<std::size_t> configs;
  Eigen::MatrixXd vertices;  ///< N × |S|

  static VertexSet of(std::vector<std::size_t> configs, int n_spins) {
    if (configs.empty()) throw ConfigError("vertex set must be non-empty");
    VertexSet s{std::move(configs), Eigen::MatrixXd(n_spins, 0)};
    s.vertices.resize(n_spins, static_cast<Eigen::Index>(s.configs.size()));
    for (std::size_t k = 0; k < s.configs.size(); ++k) {
      s.vertices.col(static_cast<Eigen::Index>(k)) = omega_column(s.configs[k], n_spins);
    }
    return s;
  }

  int affine_dimension() const {
    const Eigen::Index cnt = vertices.cols();
    if (cnt <= 1) return 0;
    Eigen::MatrixXd diff = vertices.rightCols(cnt - 1).colwise() - vertices.col(0);
    Eigen::FullPivLU<Eigen::MatrixXd> lu(diff);
    lu.setThreshold(1e-10);
    return static_cast<int>(lu.rank());
  }
};

namespace detail {

inline void canonicalize(Hyperplane& h) {
  h.normal /= h.normal.norm();
  for (Eigen::Index i = 0; i < h.normal.size(); ++i) {
    if (std::abs(h.normal(i)) > 1e-12) {
      if (h.normal(i) < 0) {
        h.normal = -h.normal;
        h.offset = -h.offset;
      }
      break;
    }
  }
  for (Eigen::Index i = 0; i < h.normal.size(); ++i) {
    if (std::abs(h.normal(i)) < 1e-14) h.normal(i) = 0.0;
  }
  if (std::abs(h.offset) < 1e-14) h.offset = 0.0;
}

inline bool same_plane(const Hyperplane& a, const Hyperplane& b) {
  return (a.normal - b.normal).cwiseAbs().maxCoeff() < 1e-9 &&
         std::abs(a.offset - b.offset) < 1e-9;
}

inline bool plane_less(const Hyperplane& a, const Hyperplane& b) {
  for (Eigen::Index i = 0; i < a.normal.size(); ++i) {
    if (std::abs(a.normal(i) - b.normal(i)) > 1e-9) return a.normal(i) < b.normal(i);
  }
  if (std::abs(a.offset - b.offset) > 1e-9) return a.offset < b.offset;
  return false;
}

inline std::vector<Hyperplane> enumerate_hyperplanes(int n) {
  const std::size_t nv = std::size_t{1} << n;
  std::vector<Hyperplane> planes;
  std::vector<std::size_t> pick(static_cast<std::size_t>(n));
  for (std::size_t i = 0; i < pick.size(); ++i) pick[i] = i;
  for (;;) {
    VertexSet s = VertexSet::of(pick, n);
    if (s.affine_dimension() == n - 1) {
      Hyperplane h;
      if (n == 1) {
        h.normal = Eigen::VectorXd::Ones(1);
      } else {
        Eigen::MatrixXd diff =
            s.vertices.rightCols(n - 1).colwise() - s.vertices.col(0);
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(diff.transpose(), Eigen::ComputeFullV);
        h.normal = svd.matrixV().col(n - 1);
      }
      h.normal /= h.normal.norm();
      h.offset = h.normal.dot(s.vertices.col(0));
      canonicalize(h);
      bool dup = false;
      for (const auto& p : planes) {
        if (same_plane(p, h)) {
          dup = true;
          break;
        }
      }
      if (!dup) planes.push_back(h);
    }
    // Next combination in lexicographic order.
    int i = n - 1;
    while (i >= 0 && pick[static_cast<std::size_t>(i)] == nv - static_cast<std::size_t>(n) + static_cast<std::size_t>(i)) --i;
    if (i < 0) break;
    ++pick[static_cast<std::size_t>(i)];
    for (int k = i + 1; k < n; ++k) {
      pick[static_cast<std::size_t>(k)] = pick[static_cast<std::size_t>(k - 1)] + 1;
    }
  }
  std::sort(planes.begin(), planes.end(), plane_less);
  return planes;
}

inline const std::vector<Hyperplane>& cached_hyperplanes(int n) {
  static const std::array<std::vector<Hyperplane>, kMaxGeometrySpins + 1> table = [] {
    std::array<std::vector<Hyperplane>, kMaxGeometrySpins + 1> t;
    for (int k = 1; k <= kMaxGeometrySpins; ++k) {
      t[static_cast<std::size_t>(k)] = enumerate_hyperplanes(k);
    }
    return t;
  }();
  return table[static_cast<std::size_t>(n)];
}

inline void check_geometry_size(int n) {
  if (n < 1) throw ConfigError("number of spins must be positive");
  if (n > kMaxGeometrySpins) {
    throw SizingError("hyperplane enumeration supports N <= 4");
  }
}

}  // namespace detail

/// All hyperplanes Aff(S) of maximally irregular vertex sets, including the
/// cube faces, sorted lexicographically by (normal, offset).
inline std::vector<Hyperplane> irregular_hyperplanes(int n_spins) {
  detail::check_geometry_size(n_spins);
  return detail::cached_hyperplanes(n_spins);
}

inline constexpr double kDefaultPlaneTolerance = 1e-12;

/// True iff sigma lies in the open cube and farther than tol from every
/// irregular hyperplane.
inline bool is_regular(const Eigen::VectorXd& sigma,
                       double tol = kDefaultPlaneTolerance) {
  const int n = static_cast<int>(sigma.size());
  detail::check_geometry_size(n);
  if (!sigma.allFinite() || sigma.cwiseAbs().maxCoeff() > 1.0 + tol) {
    throw DomainError("magnetization outside [-1,1]^N");
  }
  if (sigma.cwiseAbs().maxCoeff() >= 1.0 - tol) return false;
  for (const auto& h : detail::cached_hyperplanes(n)) {
    if (std::abs(h.signed_distance(sigma)) <= tol) return false;
  }
  return true;
}

/// Sign of sigma relative to each irregular hyperplane (+1 / −1, 0 on it).
inline std::vector<int> sign_vector(const Eigen::VectorXd& sigma,
                                    double tol = kDefaultPlaneTolerance) {
  const int n = static_cast<int>(sigma.size());
  detail::check_geometry_size(n);
  std::vector<int> s;
  for (const auto& h : detail::cached_hyperplanes(n)) {
    const double d = h.signed_distance(sigma);
    s.push_back(std::abs(d) <= tol ? 0 : (d > 0 ? 1 : -1));
  }
  return s;
}

/// Monte Carlo count of connected components of the regular set: distinct
/// sign vectors of uniform samples from the open cube.
inline int count_components(int n_spins, std::size_t samples, std::uint64_t seed,
                            double margin = 1e-9) {
  detail::check_geometry_size(n_spins);
  if (samples == 0) throw ConfigError("need at least one sample");
  const auto& planes = detail::cached_hyperplanes(n_spins);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  std::set<std::vector<int>> cells;
  std::size_t accepted = 0;
  Eigen::VectorXd x(n_spins);
  for (std::size_t s = 0; s < samples; ++s) {
    for (int k = 0; k < n_spins; ++k) x(k) = uni(rng);
    std::vector<int> sv;
    sv.reserve(planes.size());
    bool near = false;
    for (const auto& h : planes) {
      const double d = h.signed_distance(x);
      if (std::abs(d) <= margin) {
        near = true;
        break;
      }
      sv.push_back(d > 0 ? 1 : -1);
    }
    if (near) continue;
    ++accepted;
    cells.insert(std::move(sv));
  }
  if (2 * accepted < samples) {
    throw ConvergenceError("too few samples away from irregular hyperplanes");
  }
  return static_cast<int>(cells.size());
}

/// Uniform sample of the regular set by rejection.
template <class Rng>
Eigen::VectorXd sample_regular(int n_spins, Rng& rng) {
  detail::check_geometry_size(n_spins);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  Eigen::VectorXd x(n_spins);
  for (;;) {
    for (int k = 0; k < n_spins; ++k) x(k) = uni(rng);
    if (is_regular(x)) return x;
  }
}

inline Eigen::VectorXd sample_regular(int n_spins, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return sample_regular(n_spins, rng);
}

}  // namespace dickedft
