// Copyright 2026 The dickedft Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "dickedft/constrained_search.hpp"

namespace {

using dickedft::DensityPair;
using dickedft::Matrix;
using dickedft::ModelParams;
using dickedft::Vector;

Vector vec1(double a) { return Vector::Constant(1, a); }
Vector vec2(double a, double b) { return (Vector(2) << a, b).finished(); }

double closed_form_zero_coupling(const ModelParams& p, const DensityPair& d) {
  double f = p.n_modes;
  for (Eigen::Index m = 0; m < d.xi.size(); ++m) f += d.xi(m) * d.xi(m);
  for (int n = 0; n < p.n_spins; ++n) f -= std::abs(p.tunneling(n)) * std::sqrt(1 - d.sigma(n) * d.sigma(n));
  return f;
}

TEST(ConstrainedSearch, ZeroCouplingMatchesClosedForm) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-1, 1);
  auto p = ModelParams::make(2, 2, Matrix::Zero(2, 2), vec2(1.0, 0.6));
  for (int k = 0; k < 3; ++k) {
    DensityPair d{vec2(0.9 * u(rng), 0.9 * u(rng)), vec2(u(rng), u(rng))};
    auto r = dickedft::fll_constrained_search(p, d, 1e-9, k);
    EXPECT_NEAR(r.value, closed_form_zero_coupling(p, d), 1e-8);
  }
}

TEST(ConstrainedSearch, AgreesWithLiebForRabi) {
  auto p = ModelParams::rabi(1.0, 1.0);
  DensityPair d{vec1(0.3), vec1(-0.4)};
  auto s = dickedft::fll_constrained_search(p, d);
  auto l = dickedft::lieb_functional(p, d);
  EXPECT_NEAR(s.value, l.value, 1e-8);
  EXPECT_NEAR(s.multipliers->v(0), l.multipliers->v(0), 1e-6);
  EXPECT_NEAR(s.multipliers->j(0), l.multipliers->j(0), 1e-6);
}

TEST(ConstrainedSearch, OptimizerSolvesEulerLagrangeEquation) {
  Matrix lam(1, 2);
  lam << 0.8, 0.5;
  auto p = ModelParams::make(2, 1, lam, vec2(1.0, 0.7));
  DensityPair d{vec2(0.3, -0.2), vec1(0.1)};
  auto r = dickedft::fll_constrained_search(p, d, 1e-10, 4);
  ASSERT_TRUE(r.converged);
  const auto& psi = std::get<dickedft::WaveFunction>(r.optimizer);
  const auto& m = *r.multipliers;
  auto h = dickedft::build_h(p, m.potentials(), psi.basis());
  const Vector res = h.apply(psi.coefficients()) - m.energy * psi.coefficients();
  EXPECT_LT(res.norm(), 1e-7);
  EXPECT_LT(dickedft::density_pair(psi).distance(d), 1e-9);
  // Value from the multipliers: F = E − v·σ − j·ξ.
  EXPECT_NEAR(r.value, m.energy - m.v.dot(d.sigma) - m.j.dot(d.xi), 1e-8);
  EXPECT_LE(dickedft::aufbau_index(p, m, psi), p.n_spins + p.n_modes);
}

TEST(ConstrainedSearch, SameSeedSameResult) {
  auto p = ModelParams::rabi(2.0, 1.0);
  DensityPair d{vec1(-0.5), vec1(0.2)};
  auto a = dickedft::fll_constrained_search(p, d, 1e-9, 42);
  auto b = dickedft::fll_constrained_search(p, d, 1e-9, 42);
  EXPECT_EQ(a.value, b.value);
}

TEST(ConstrainedSearch, WarmStartReachesSameValue) {
  auto p = ModelParams::rabi(1.0, 1.0);
  DensityPair d{vec1(0.6), vec1(0.0)};
  auto cold = dickedft::fll_constrained_search(p, d);
  dickedft::SearchOptions so;
  so.restarts = 0;
  so.warm_start = std::get<dickedft::WaveFunction>(cold.optimizer);
  auto warm = dickedft::fll_constrained_search(p, {vec1(0.62), vec1(0.0)}, 1e-9, 0, so);
  auto ref = dickedft::lieb_functional(p, {vec1(0.62), vec1(0.0)});
  EXPECT_NEAR(warm.value, ref.value, 1e-8);
}

TEST(ConstrainedSearch, BoundaryTargetFreezesSpin) {
  auto p = ModelParams::rabi(1.0, 1.0);
  auto r = dickedft::fll_constrained_search(p, {vec1(-1.0), vec1(0.3)});
  // Spin down: F = 1 + ξ² − λξ.
  EXPECT_NEAR(r.value, 1.0 + 0.09 - 0.3, 1e-8);
  EXPECT_FALSE(std::isfinite(r.multipliers->v(0)));
}

TEST(ConstrainedSearch, FllFlGapVanishesForRabi) {
  auto p = ModelParams::rabi(1.5, 1.0);
  EXPECT_LT(std::abs(dickedft::fll_fl_gap(p, {vec1(0.1), vec1(-0.2)})), 1e-7);
}

TEST(ConstrainedSearch, EmbedStatePreservesAmplitudes) {
  auto p = ModelParams::rabi(1.0, 1.0);
  DensityPair d{vec1(0.2), vec1(0.5)};
  auto small = dickedft::build_basis(p, {12});
  auto big = dickedft::build_basis(p, {20});
  auto psi = dickedft::trial_state(p, d, small).psi;
  auto e = dickedft::embed_state(psi, big);
  EXPECT_NEAR(e.coefficients().norm(), 1.0, 1e-14);
  EXPECT_LT(dickedft::density_pair(e).distance(dickedft::density_pair(psi)), 1e-14);
}

}  // namespace
