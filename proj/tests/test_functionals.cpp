// Copyright 2026 The dickedft Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "dickedft/functionals.hpp"

namespace {

using dickedft::DensityPair;
using dickedft::Matrix;
using dickedft::ModelParams;
using dickedft::Potentials;
using dickedft::Vector;

Vector vec1(double a) { return Vector::Constant(1, a); }
Vector vec2(double a, double b) { return (Vector(2) << a, b).finished(); }

ModelParams two_spin() {
  Matrix lam(1, 2);
  lam << 0.8, 0.5;
  return ModelParams::make(2, 1, lam, vec2(1.0, 0.7));
}

TEST(DensityPair, OfTrialStateMatchesTarget) {
  auto p = two_spin();
  DensityPair target{vec2(0.4, -0.7), vec1(0.6)};
  auto basis = dickedft::build_basis(p, {dickedft::trial_cutoff(target)});
  auto trial = dickedft::trial_state(p, target, basis);
  EXPECT_FALSE(trial.truncation_warning());
  EXPECT_LT(dickedft::density_pair(trial.psi).distance(target), 1e-12);
}

TEST(ZeroCoupling, ClosedFormIncludingNegativeTunneling) {
  auto p = ModelParams::make(2, 2, Matrix::Zero(2, 2), vec2(1.0, -0.5));
  DensityPair target{vec2(0.3, -0.6), vec2(0.2, -1.1)};
  const double expect = 2.0 + 0.04 + 1.21 - std::sqrt(1 - 0.09) - 0.5 * std::sqrt(1 - 0.36);
  EXPECT_NEAR(dickedft::zero_coupling_fll(p, target), expect, 1e-14);
  // The trial state attains it.
  auto basis = dickedft::build_basis(p, {dickedft::trial_cutoff(target)});
  auto psi = dickedft::trial_state(p, target, basis).psi;
  auto h0 = dickedft::build_h0(p, basis);
  EXPECT_NEAR(h0.expectation(psi.coefficients()), expect, 1e-12);
}

TEST(ZeroCoupling, RejectsCoupledModel) {
  EXPECT_THROW(dickedft::zero_coupling_fll(ModelParams::rabi(1.0, 1.0), {vec1(0.1), vec1(0.0)}),
               dickedft::ConfigError);
}

TEST(InverseMap, RecoversPotentialsOfAGroundState) {
  for (const auto& p : {ModelParams::rabi(1.0, 1.0), two_spin()}) {
    Potentials pots{Vector::LinSpaced(p.n_spins, 0.3, -0.4), vec1(-0.25)};
    auto e = dickedft::energy(p, pots, 1e-12);
    auto r = dickedft::inverse_map(p, e.density, 1e-11);
    EXPECT_LT((r.potentials.v - pots.v).norm(), 1e-7);
    EXPECT_LT((r.potentials.j - pots.j).norm(), 1e-9);
    EXPECT_LT(r.density_error, 1e-10);
    EXPECT_NEAR(r.multipliers.energy, e.energy, 1e-9);
  }
}

TEST(InverseMap, ForceBalanceFixesJ) {
  auto p = ModelParams::rabi(1.5, 0.8);
  DensityPair target{vec1(-0.35), vec1(0.4)};
  auto r = dickedft::inverse_map(p, target);
  EXPECT_NEAR(r.potentials.j(0), -(1.5 * -0.35 + 2 * 0.4), 1e-14);
}

TEST(InverseMap, BoundaryIsNotRepresentable) {
  auto p = ModelParams::rabi(1.0, 1.0);
  EXPECT_THROW(dickedft::inverse_map(p, {vec1(1.0), vec1(0.0)}), dickedft::BoundaryError);
  EXPECT_THROW(dickedft::inverse_map(p, {vec1(-1.0), vec1(0.3)}), dickedft::BoundaryError);
}

TEST(LiebFunctional, DominatesEveryLegendreLowerBound) {
  // F_L(σ,ξ) = sup_{v,j} [E(v,j) − vσ − jξ].
  auto p = ModelParams::rabi(1.0, 1.0);
  DensityPair target{vec1(0.3), vec1(-0.4)};
  auto r = dickedft::lieb_functional(p, target);
  ASSERT_TRUE(r.converged);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (int k = 0; k < 20; ++k) {
    Potentials q{vec1(u(rng)), vec1(u(rng))};
    const double lower = dickedft::energy(p, q, 1e-12).energy - q.v(0) * 0.3 + q.j(0) * 0.4;
    EXPECT_LE(lower, r.value + 1e-9);
  }
  const Potentials& w = *r.representing_potentials;
  EXPECT_NEAR(dickedft::energy(p, w, 1e-12).energy - w.v(0) * 0.3 + w.j(0) * 0.4, r.value, 1e-9);
}

TEST(LiebFunctional, EvenUnderJointSignFlip) {
  auto p = ModelParams::rabi(1.2, 0.9);
  auto a = dickedft::lieb_functional(p, {vec1(0.45), vec1(0.3)});
  auto b = dickedft::lieb_functional(p, {vec1(-0.45), vec1(-0.3)});
  EXPECT_NEAR(a.value, b.value, 1e-9);
}

TEST(LiebFunctional, XiDependenceIsQuadraticPlusLinear) {
  // F(σ,ξ) = F(σ,0) + ξ² + ξ·Λσ.
  auto p = ModelParams::rabi(0.7, 1.0);
  const double f0 = dickedft::lieb_functional(p, {vec1(0.2), vec1(0.0)}).value;
  const double f1 = dickedft::lieb_functional(p, {vec1(0.2), vec1(0.9)}).value;
  EXPECT_NEAR(f1, f0 + 0.81 + 0.9 * 0.7 * 0.2, 1e-9);
}

TEST(LiebFunctional, FrozenSpinOnBoundary) {
  // σ = 1 freezes the spin up; the mode sees a constant force λ.
  auto p = ModelParams::rabi(1.0, 1.0);
  auto r = dickedft::lieb_functional(p, {vec1(1.0), vec1(0.2)});
  EXPECT_NEAR(r.value, 1.0 + 0.04 + 0.2, 1e-10);
  EXPECT_FALSE(r.representable);
}

TEST(LiebFunctional, EnsembleWhenOneSpinDoesNotTunnel) {
  // t₂ = 0: eigenstates have σ₂ = ±1, so interior σ₂ needs a mixture.
  auto p = ModelParams::make(2, 1, Matrix::Zero(1, 2), vec2(1.0, 0.0));
  DensityPair target{vec2(0.2, 0.3), vec1(0.1)};
  auto r = dickedft::lieb_functional(p, target);
  EXPECT_NEAR(r.value, 1.0 + 0.01 - std::sqrt(1 - 0.04), 1e-8);
  ASSERT_TRUE(std::holds_alternative<dickedft::Ensemble>(r.optimizer));
  const auto& ens = std::get<dickedft::Ensemble>(r.optimizer);
  EXPECT_LT(dickedft::density_pair(ens).distance(target), 1e-8);
  double total = 0;
  for (double w : ens.weights) total += w;
  EXPECT_NEAR(total, 1.0, 1e-12);
}

TEST(LiebFunctional, CoupledMixtureBracketedByDuality) {
  Matrix lam(1, 2);
  lam << 0.8, 0.5;
  auto p = ModelParams::make(2, 1, lam, vec2(1.0, 0.0));
  DensityPair target{vec2(-0.3, 0.4), vec1(0.2)};
  auto r = dickedft::lieb_functional(p, target);
  ASSERT_TRUE(r.converged);
  ASSERT_TRUE(std::holds_alternative<dickedft::Ensemble>(r.optimizer));
  EXPECT_LT(r.residuals.at("duality_gap"), 1e-9);
  // The ensemble itself is an upper bound: Σ w ⟨H₀⟩ at the target densities.
  const auto& ens = std::get<dickedft::Ensemble>(r.optimizer);
  EXPECT_LT(dickedft::density_pair(ens).distance(target), 1e-8);
  const auto h0 = dickedft::build_h0(p, ens.states.front().basis());
  double upper = 0.0;
  for (std::size_t k = 0; k < ens.states.size(); ++k) {
    upper += ens.weights[k] * h0.expectation(ens.states[k].coefficients());
  }
  EXPECT_NEAR(upper, r.value, 1e-8);
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (int k = 0; k < 10; ++k) {
    Potentials q{vec2(u(rng), u(rng)), vec1(u(rng))};
    const double lower = dickedft::energy(p, q, 1e-12).energy - q.v.dot(target.sigma) - q.j.dot(target.xi);
    EXPECT_LE(lower, r.value + 1e-9);
  }
}

TEST(LiebFunctional, ThreeSpinsWithOneFrozenSector) {
  Matrix lam(1, 3);
  lam << -0.17, -0.59, -0.21;
  auto p = ModelParams::make(3, 1, lam, (Vector(3) << 0.73, 0.0, 0.93).finished());
  DensityPair target{(Vector(3) << 0.05, -0.35, -0.54).finished(), vec1(0.21)};
  auto r = dickedft::lieb_functional(p, target);
  ASSERT_TRUE(r.converged);
  EXPECT_LT(r.residuals.at("duality_gap"), 1e-9);
  EXPECT_LT(r.residuals.at("density"), 1e-8);
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(-1.5, 1.5);
  for (int k = 0; k < 5; ++k) {
    Potentials q{(Vector(3) << u(rng), u(rng), u(rng)).finished(), vec1(u(rng))};
    const double lower = dickedft::energy(p, q, 1e-12).energy - q.v.dot(target.sigma) - q.j.dot(target.xi);
    EXPECT_LE(lower, r.value + 1e-9);
  }
}

TEST(EnsembleFit, InfeasibleTargetThrows) {
  auto p = ModelParams::rabi(1.0, 1.0);
  auto spec = dickedft::converge_cutoff(p, Potentials::zero(p), 1e-10, 1);
  EXPECT_THROW(dickedft::ensemble_fit(spec, {vec1(0.5), vec1(0.0)}), dickedft::InfeasibleError);
}

TEST(Aufbau, GroundStateHasIndexZero) {
  auto p = two_spin();
  Potentials pots{vec2(0.1, -0.2), vec1(0.3)};
  auto basis = dickedft::build_basis(p, {30});
  auto spec = dickedft::eigensolve(dickedft::build_h(p, pots, basis), basis, 3);
  dickedft::Multipliers m{spec.ground_energy(), pots.v, pots.j};
  EXPECT_EQ(dickedft::aufbau_index(p, m, spec.ground()), 0);
  EXPECT_EQ(dickedft::aufbau_index(p, m, spec.eigenvectors[1]), 1);
}

TEST(Energy, DensityOfGroundStateSatisfiesForceBalance) {
  auto p = two_spin();
  Potentials pots{vec2(-0.3, 0.6), vec1(0.45)};
  auto e = dickedft::energy(p, pots, 1e-12);
  const Vector r = pots.j + p.coupling * e.density.sigma + 2.0 * e.density.xi;
  EXPECT_LT(r.norm(), 1e-9);
}

}  // namespace
