// Copyright 2026 The dickedft Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>

#include "dickedft/adiabatic.hpp"

namespace {

using dickedft::Matrix;
using dickedft::ModelParams;
using dickedft::Vector;

Vector vec1(double a) { return Vector::Constant(1, a); }

TEST(Adiabatic, RoutesAgreeAndReproduceLieb) {
  auto p = ModelParams::rabi(1.0, 1.0);
  auto t = dickedft::g_lambda(p, vec1(0.3));
  EXPECT_TRUE(t.converged);
  EXPECT_LT(dickedft::ac_consistency(t), 1e-8);
  const double ref = dickedft::lieb_functional(p, {vec1(0.3), vec1(0.0)}).value;
  EXPECT_NEAR(t.F_reconstructed, ref, 1e-8);
  // F(σ,ξ) = F(σ,0) + ξ² + ξΛσ carries over to the reconstruction.
  const double ref_xi = dickedft::lieb_functional(p, {vec1(0.3), vec1(-0.5)}).value;
  EXPECT_NEAR(t.reconstruct(vec1(-0.5)), ref_xi, 1e-8);
  EXPECT_NEAR(t.reconstruct_route_a(vec1(-0.5)), ref_xi, 1e-8);
}

TEST(Adiabatic, IntegrandIsNonIncreasing) {
  // d/ds F^{sΛ} = a(s) is the derivative of a concave function of s.
  auto t = dickedft::g_lambda(ModelParams::rabi(1.5, 1.0), vec1(0.6));
  EXPECT_TRUE(t.monotone);
  EXPECT_FALSE(t.kink_flag);
  for (double v : t.virial_residuals) EXPECT_LT(std::abs(v), 1e-7);
}

TEST(Adiabatic, VanishesWithoutCoupling) {
  auto p = ModelParams::make(1, 1, Matrix::Zero(1, 1), vec1(1.0));
  auto t = dickedft::g_lambda(p, vec1(-0.4));
  EXPECT_NEAR(t.G_value, 0.0, 1e-12);
  EXPECT_NEAR(t.F_reconstructed, 1.0 - std::sqrt(1 - 0.16), 1e-12);
}

TEST(Adiabatic, SingleIntegrandValueAtEndpoint) {
  // a(0) = ⟨x⟩ Λσ at the decoupled optimizer, which has ξ = 0.
  auto p = ModelParams::rabi(1.0, 1.0);
  EXPECT_NEAR(dickedft::ac_integrand(p, vec1(0.3), 0.0), 0.0, 1e-10);
}

TEST(Adiabatic, TwoSpinsWithConstrainedSearch) {
  Matrix lam(1, 2);
  lam << 0.6, 0.4;
  auto p = ModelParams::make(2, 1, lam, (Vector(2) << 1.0, 0.8).finished());
  const Vector sigma = (Vector(2) << 0.3, -0.1).finished();
  dickedft::AdiabaticOptions o;
  o.initial_panels = 1;
  o.max_panels = 4;
  o.quad_tol = 1e-6;
  auto t = dickedft::g_lambda(p, sigma, o);
  EXPECT_LT(dickedft::ac_consistency(t), 1e-7);
  const double ref = dickedft::lieb_functional(p, {sigma, Vector::Zero(1)}).value;
  EXPECT_NEAR(t.F_reconstructed, ref, 1e-6);
}

TEST(Adiabatic, IrregularMagnetizationRejected) {
  Matrix lam(1, 2);
  lam << 1.0, 1.0;
  auto p = ModelParams::make(2, 1, lam, (Vector(2) << 1.0, 1.0).finished());
  EXPECT_THROW(dickedft::g_lambda(p, (Vector(2) << 0.2, 0.2).finished()), dickedft::DomainError);
}

TEST(Adiabatic, QuadratureFailureCarriesTrace) {
  dickedft::AdiabaticOptions o;
  o.quad_tol = 1e-30;
  o.max_panels = 2;
  try {
    dickedft::g_lambda(ModelParams::rabi(1.0, 1.0), vec1(0.2), o);
    FAIL() << "expected QuadratureError";
  } catch (const dickedft::QuadratureError& e) {
    EXPECT_EQ(e.trace().panels, 2);
    EXPECT_EQ(e.trace().s_nodes.size(), 16u);
  }
}

}  // namespace
