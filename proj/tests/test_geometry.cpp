// Copyright 2026 The dickedft Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <Eigen/Dense>

#include <cmath>
#include <random>
#include <set>
#include <vector>

#include "dickedft/geometry.hpp"

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Brute-force regularity straight from the definition: σ is irregular iff it
// is a convex combination of cube vertices whose affine hull is not all of R^N.
// Checks every vertex subset S with dim Aff(S) < N via a feasibility LP solved
// as nonnegative least squares on the (small) vertex matrix.
bool in_convex_hull(const MatrixXd& V, const VectorXd& x) {
  // Projected gradient on the simplex for min ‖Vc − x‖².
  const Eigen::Index k = V.cols();
  VectorXd c = VectorXd::Constant(k, 1.0 / static_cast<double>(k));
  const MatrixXd G = V.transpose() * V;
  const double L = G.norm() + 1e-12;
  for (int it = 0; it < 20000; ++it) {
    VectorXd y = c - (G * c - V.transpose() * x) / L;
    // Euclidean projection onto the simplex.
    std::vector<double> u(y.data(), y.data() + k);
    std::sort(u.begin(), u.end(), std::greater<>());
    double css = 0.0, theta = 0.0;
    for (Eigen::Index j = 0; j < k; ++j) {
      css += u[static_cast<std::size_t>(j)];
      const double t = (css - 1.0) / static_cast<double>(j + 1);
      if (u[static_cast<std::size_t>(j)] - t > 0) theta = t;
    }
    c = (y.array() - theta).max(0.0);
  }
  return (V * c - x).norm() < 1e-7;
}

bool regular_by_definition(const VectorXd& sigma) {
  const int n = static_cast<int>(sigma.size());
  const std::size_t nv = std::size_t{1} << n;
  for (std::size_t mask = 1; mask < (std::size_t{1} << nv); ++mask) {
    std::vector<std::size_t> cfg;
    for (std::size_t a = 0; a < nv; ++a) {
      if (mask >> a & 1U) cfg.push_back(a);
    }
    auto s = dickedft::VertexSet::of(cfg, n);
    if (s.affine_dimension() >= n) continue;
    if (in_convex_hull(s.vertices, sigma)) return false;
  }
  return true;
}

TEST(Hyperplanes, OneSpin) {
  auto h = dickedft::irregular_hyperplanes(1);
  ASSERT_EQ(h.size(), 2U);
  EXPECT_DOUBLE_EQ(h[0].normal(0), 1.0);
  EXPECT_DOUBLE_EQ(h[0].offset, -1.0);
  EXPECT_DOUBLE_EQ(h[1].offset, 1.0);
}

TEST(Hyperplanes, TwoSpinsAreDiagonalsAndEdges) {
  auto h = dickedft::irregular_hyperplanes(2);
  ASSERT_EQ(h.size(), 6U);
  const double r = 1.0 / std::sqrt(2.0);
  std::set<std::vector<long>> got;
  for (const auto& p : h) {
    EXPECT_NEAR(p.normal.norm(), 1.0, 1e-14);
    got.insert({std::lround(p.normal(0) * 1e6), std::lround(p.normal(1) * 1e6),
                std::lround(p.offset * 1e6)});
  }
  const long q = std::lround(r * 1e6);
  const std::set<std::vector<long>> want = {
      {0, 1000000, 1000000}, {0, 1000000, -1000000}, {1000000, 0, 1000000},
      {1000000, 0, -1000000}, {q, q, 0}, {q, -q, 0}};
  EXPECT_EQ(got, want);
}

TEST(Hyperplanes, CountsAndSizeCap) {
  EXPECT_EQ(dickedft::irregular_hyperplanes(3).size(), 20U);
  EXPECT_NO_THROW(dickedft::irregular_hyperplanes(4));
  EXPECT_THROW(dickedft::irregular_hyperplanes(5), dickedft::SizingError);
  for (const auto& p : dickedft::irregular_hyperplanes(4)) {
    Eigen::Index first = 0;
    while (std::abs(p.normal(first)) < 1e-12) ++first;
    EXPECT_GT(p.normal(first), 0.0);
  }
}

TEST(IsRegular, Examples) {
  EXPECT_TRUE(dickedft::is_regular(VectorXd::Constant(1, 0.0)));
  EXPECT_FALSE(dickedft::is_regular(VectorXd::Constant(1, 1.0)));
  EXPECT_FALSE(dickedft::is_regular((VectorXd(2) << 0.3, 0.3).finished()));
  EXPECT_TRUE(dickedft::is_regular((VectorXd(2) << 0.3, -0.1).finished()));
  EXPECT_THROW(dickedft::is_regular(VectorXd::Constant(2, 1.5)), dickedft::DomainError);
}

TEST(IsRegular, TwoSpinClosedFormOnGrid) {
  for (int a = 0; a <= 200; ++a) {
    for (int b = 0; b <= 200; ++b) {
      const double s1 = -1.0 + 0.01 * a, s2 = -1.0 + 0.01 * b;
      VectorXd s(2);
      s << s1, s2;
      const bool closed = std::abs(s1) < 1 && std::abs(s2) < 1 &&
                          std::abs(s1 - s2) > 1e-12 && std::abs(s1 + s2) > 1e-12;
      ASSERT_EQ(dickedft::is_regular(s), closed) << s1 << "," << s2;
    }
  }
}

TEST(IsRegular, MatchesDefinitionForThreeSpins) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  for (int k = 0; k < 20; ++k) {
    VectorXd s(3);
    for (int i = 0; i < 3; ++i) s(i) = uni(rng);
    EXPECT_EQ(dickedft::is_regular(s), regular_by_definition(s)) << s.transpose();
  }
  // On the plane σ1 + σ2 + σ3 = 1 yet off every diagonal plane.
  const VectorXd on = (VectorXd(3) << 0.5, 0.4, 0.1).finished();
  EXPECT_FALSE(regular_by_definition(on));
  EXPECT_FALSE(dickedft::is_regular(on));
  const VectorXd diag = (VectorXd(3) << 0.2, 0.2, -0.5).finished();
  EXPECT_FALSE(regular_by_definition(diag));
  EXPECT_FALSE(dickedft::is_regular(diag));
}

TEST(IsRegular, CubeSymmetry) {
  std::mt19937_64 rng(11);
  for (int k = 0; k < 200; ++k) {
    VectorXd s = dickedft::sample_regular(3, rng);
    VectorXd p(3);
    p << s(2), s(0), s(1);
    EXPECT_TRUE(dickedft::is_regular(p));
    EXPECT_TRUE(dickedft::is_regular(-s));
  }
}

TEST(Components, LowDimensions) {
  EXPECT_EQ(dickedft::count_components(1, 1000, 1), 1);
  EXPECT_EQ(dickedft::count_components(2, 100000, 1), 4);
}

TEST(Components, ThreeSpinsFromHyperplaneArrangement) {
  // Twenty planes: six diagonal planes, six cube faces and the eight planes
  // ±σ1 ± σ2 ± σ3 = ±1 through three vertices each. Together they cut the
  // open cube into 96 cells.
  EXPECT_EQ(dickedft::count_components(3, 1000000, 3), 96);
}

TEST(SampleRegular, ReproducibleAndCoversAllCells) {
  EXPECT_EQ(dickedft::sample_regular(2, std::uint64_t{5}), dickedft::sample_regular(2, std::uint64_t{5}));
  std::mt19937_64 rng(1);
  std::set<std::vector<int>> cells;
  for (int k = 0; k < 1000; ++k) {
    VectorXd s = dickedft::sample_regular(2, rng);
    ASSERT_TRUE(dickedft::is_regular(s));
    cells.insert(dickedft::sign_vector(s));
  }
  EXPECT_EQ(cells.size(), 4U);
}

}  // namespace
