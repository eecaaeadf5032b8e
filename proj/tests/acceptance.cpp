// Copyright 2026 The dickedft Authors
// SPDX-License-Identifier: Apache-2.0

// Acceptance checks. Usage: acceptance [n ...]; no arguments runs 1..11.
// Prints one PASS/FAIL line per check and exits 1 if any check failed.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "cli/commands.hpp"
#include "dickedft/dickedft.hpp"

namespace {

using namespace dickedft;

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Check {
  int id;
  const char* name;
  double time_limit;  // seconds
  std::function<Outcome()> run;
};

std::string sci(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", x);
  return buf;
}

Vector uniform(std::mt19937_64& rng, int n, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  Vector v(n);
  for (int k = 0; k < n; ++k) v(k) = u(rng);
  return v;
}

double draw(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

// Λ = 0: F = M + |ξ|² − Σ t_n √(1 − σ_n²).
double decoupled_closed_form(const Vector& t, const DensityPair& d) {
  double f = static_cast<double>(d.xi.size()) + d.xi.squaredNorm();
  for (Eigen::Index n = 0; n < t.size(); ++n) f -= t(n) * std::sqrt(1.0 - d.sigma(n) * d.sigma(n));
  return f;
}

// ---------------------------------------------------------------------------

Outcome zero_coupling() {
  constexpr double kTol = 1e-6;
  std::mt19937_64 rng(101);
  double worst = 0.0;
  for (int k = 0; k < 50; ++k) {
    const int N = 1 + k % 3, M = 1 + (k / 3) % 2;
    const Vector t = uniform(rng, N, 0.2, 1.5);
    const ModelParams p = ModelParams::make(N, M, Matrix::Zero(M, N), t);
    const DensityPair d{uniform(rng, N, -0.95, 0.95), uniform(rng, M, -1.0, 1.0)};
    const double f = fll_constrained_search(p, d, 1e-9, static_cast<std::uint64_t>(k)).value;
    worst = std::max(worst, std::abs(f - decoupled_closed_form(t, d)));
  }
  return {worst <= kTol, "max |F_LL - closed form| = " + sci(worst) + " over 50 targets"};
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> cells;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

Outcome figure() {
  constexpr double kExact = 1e-8, kEven = 1e-8, kConvex = -1e-8;
  const std::vector<double> lambdas{0.0, 0.5, 1.0, 2.0};
  cli::RunConfig c;
  c.model = ModelParams::rabi(1.0, 1.0);
  cli::CurveConfig cc;
  cc.lambdas = lambdas;
  cc.sigma_min = -0.99;
  cc.sigma_max = 0.99;
  cc.points = 41;
  c.curve = cc;
  const cli::CommandOutput out = cli::cmd_curve(c);

  // Read the curves back from the CSV the command writes.
  std::vector<std::vector<std::pair<double, double>>> curves(lambdas.size());
  for (const auto& f : out.files) {
    if (f.name != "curve.csv") continue;
    std::stringstream ss(f.content);
    std::string line;
    std::getline(ss, line);
    while (std::getline(ss, line)) {
      const auto cells = split(line);
      const double lambda = std::stod(cells[0]);
      const auto it = std::find(lambdas.begin(), lambdas.end(), lambda);
      curves[static_cast<std::size_t>(it - lambdas.begin())].push_back(
          {std::stod(cells[1]), cells[2] == "nan" ? std::nan("") : std::stod(cells[2])});
    }
  }
  double exact = 0.0, odd = 0.0, convex = INFINITY;
  std::vector<double> at_zero;
  bool complete = true;
  for (const auto& cv : curves) {
    const std::size_t n = cv.size();
    if (n != 41) complete = false;
    for (std::size_t k = 0; k < n; ++k) {
      if (!std::isfinite(cv[k].second)) complete = false;
      odd = std::max(odd, std::abs(cv[k].second - cv[n - 1 - k].second));
      if (k > 0 && k + 1 < n) {
        convex = std::min(convex, cv[k + 1].second - 2.0 * cv[k].second + cv[k - 1].second);
      }
      if (cv[k].first == 0.0) at_zero.push_back(cv[k].second);
    }
  }
  for (const auto& [s, f] : curves.front()) {
    exact = std::max(exact, std::abs(f - (1.0 - std::sqrt(1.0 - s * s))));
  }
  std::string order = "F(0) by lambda:";
  for (double f : at_zero) order += " " + sci(f);
  bool nonincreasing = true;
  for (std::size_t k = 1; k < at_zero.size(); ++k) nonincreasing &= at_zero[k] <= at_zero[k - 1];
  order += nonincreasing ? " (non-increasing)" : " (not monotone)";
  const bool pass = complete && exact <= kExact && odd <= kEven && convex >= kConvex;
  return {pass, "lambda=0 error " + sci(exact) + ", max |F(s)-F(-s)| " + sci(odd) +
                    ", min second difference " + sci(convex) + "; " + order};
}

Outcome lieb_equals_levy_lieb() {
  constexpr double kTol = 1e-6;
  std::mt19937_64 rng(303);
  double worst = 0.0;
  for (int k = 0; k < 20; ++k) {
    const ModelParams p = ModelParams::rabi(draw(rng, 0.2, 2.0), draw(rng, 0.3, 1.5));
    const DensityPair d{uniform(rng, 1, -0.9, 0.9), uniform(rng, 1, -1.0, 1.0)};
    const double fl = lieb_functional(p, d, 1e-10).value;
    const double fll = fll_constrained_search(p, d, 1e-10, static_cast<std::uint64_t>(k)).value;
    worst = std::max(worst, std::abs(fl - fll));
  }
  return {worst <= kTol, "max |F_L - F_LL| = " + sci(worst) + " over 20 Rabi targets"};
}

Outcome force_balance_check() {
  constexpr double kTol = 1e-8;
  double worst = 0.0;
  int count = 0;
  auto check = [&](const ModelParams& p, const Potentials& pots) {
    const EnergyResult e = energy(p, pots, 1e-11);
    const Vector r = pots.j + p.coupling * e.density.sigma + 2.0 * e.density.xi;
    worst = std::max(worst, r.norm());
    ++count;
  };
  const ModelParams rabi = ModelParams::rabi(1.0, 1.0);
  for (int a = 0; a < 7; ++a) {
    for (int b = 0; b < 7; ++b) {
      check(rabi, {Vector::Constant(1, -1.5 + 0.5 * a), Vector::Constant(1, -1.5 + 0.5 * b)});
    }
  }
  std::mt19937_64 rng(404);
  for (int k = 0; k < 5; ++k) {
    const Matrix lam = uniform(rng, 2, -1.0, 1.0).transpose();
    const ModelParams p = ModelParams::make(2, 1, lam, uniform(rng, 2, 0.3, 1.5));
    check(p, {uniform(rng, 2, -1.0, 1.0), uniform(rng, 1, -1.0, 1.0)});
  }
  return {worst <= kTol,
          "max |j + Lambda sigma + 2 xi| = " + sci(worst) + " over " + std::to_string(count) +
              " ground states"};
}

Outcome virial() {
  constexpr double kTol = 1e-6;
  std::mt19937_64 rng(505);
  double first = 0.0, second = 0.0;
  for (int k = 0; k < 10; ++k) {
    const int N = 1 + k % 2, M = 1 + (k / 2) % 2;
    const Matrix lam = Matrix::NullaryExpr(M, N, [&] { return draw(rng, -1.0, 1.0); });
    const ModelParams p = ModelParams::make(N, M, lam, uniform(rng, N, 0.3, 1.5));
    const Potentials pots{uniform(rng, N, -1.0, 1.0), uniform(rng, M, -1.0, 1.0)};
    const EnergyResult e = energy(p, pots, 1e-9);
    const auto [a, b] = virial_ground(p, pots, e.spectrum.ground(), kTol);
    first = std::max(first, a.residual);
    second = std::max(second, b.residual);
  }
  return {first <= kTol && second <= kTol,
          "max residuals " + sci(first) + " and " + sci(second) + " over 10 ground states"};
}

Outcome regular_set() {
  // Closed form: R2 is the open square without both diagonals.
  int mismatches = 0;
  for (int a = 0; a <= 200; ++a) {
    for (int b = 0; b <= 200; ++b) {
      Vector s(2);
      s << (a - 100) / 100.0, (b - 100) / 100.0;
      const bool inside = std::abs(s(0)) < 1.0 && std::abs(s(1)) < 1.0;
      const bool expect = inside && s(0) != s(1) && s(0) != -s(1);
      if (is_regular(s, 1e-12) != expect) ++mismatches;
    }
  }
  const int c2 = count_components(2, 200000, 6);
  const int c3 = count_components(3, 200000, 6);
  return {mismatches == 0 && c2 == 4 && c3 == 24,
          std::to_string(mismatches) + " mismatches on the 201x201 grid; components " +
              std::to_string(c2) + " (N=2, expected 4), " + std::to_string(c3) +
              " (N=3, expected 24)"};
}

Outcome adiabatic() {
  constexpr double kConsistency = 2e-6, kValue = 1e-5;
  double cons = 0.0, value = 0.0;
  for (double lambda : {0.5, 1.0}) {
    const ModelParams p = ModelParams::rabi(lambda, 1.0);
    for (double s : {0.0, 0.3, 0.6}) {
      const Vector sigma = Vector::Constant(1, s);
      const AdiabaticTrace tr = g_lambda(p, sigma);
      const double fll = fll_constrained_search(p, {sigma, Vector::Zero(1)}, 1e-10).value;
      cons = std::max(cons, ac_consistency(tr));
      value = std::max(value, std::abs(tr.F_reconstructed - fll));
    }
  }
  return {cons <= kConsistency && value <= kValue,
          "max consistency " + sci(cons) + ", max |F_reconstructed - F_LL| " + sci(value)};
}

Outcome euler_lagrange() {
  constexpr double kResidual = 1e-7;
  std::mt19937_64 rng(808);
  double worst = 0.0;
  int max_index = 0, rabi_index = 0;
  bool bounded = true;
  const std::vector<std::pair<int, int>> sizes{{1, 1}, {1, 1}, {1, 1}, {1, 1}, {2, 1},
                                               {2, 1}, {2, 1}, {1, 2}, {1, 2}, {2, 2}};
  for (std::size_t k = 0; k < sizes.size(); ++k) {
    const auto [N, M] = sizes[k];
    const Matrix lam = Matrix::NullaryExpr(M, N, [&] { return draw(rng, -1.0, 1.0); });
    const ModelParams p = ModelParams::make(N, M, lam, uniform(rng, N, 0.3, 1.5));
    Vector sigma;
    do {
      sigma = uniform(rng, N, -0.85, 0.85);
    } while (N == 2 && std::abs(std::abs(sigma(0)) - std::abs(sigma(1))) < 0.1);
    const DensityPair d{sigma, uniform(rng, M, -1.0, 1.0)};
    const FunctionalResult r = fll_constrained_search(p, d, 1e-10, k);
    const auto& psi = std::get<WaveFunction>(r.optimizer);
    const Multipliers& m = *r.multipliers;
    const OperatorMatrix h = build_h(p, m.potentials(), psi.basis());
    worst = std::max(worst, (h.apply(psi.coefficients()) - m.energy * psi.coefficients()).norm());
    const int idx = aufbau_index(p, m, psi);
    max_index = std::max(max_index, idx);
    bounded &= idx <= N + M;
    if (N == 1 && M == 1) rabi_index = std::max(rabi_index, idx);
  }
  return {worst <= kResidual && bounded && rabi_index == 0,
          "max Schrodinger residual " + sci(worst) + ", max aufbau index " +
              std::to_string(max_index) + ", max index at N=M=1 " + std::to_string(rabi_index)};
}

Outcome hohenberg_kohn() {
  const ModelParams p = ModelParams::rabi(1.0, 1.0);
  std::vector<Potentials> grid;
  for (double v : {-1.0, -0.5, 0.0, 0.5, 1.0}) {
    for (double j : {-1.0, -0.5, 0.0, 0.5, 1.0}) {
      grid.push_back({Vector::Constant(1, v), Vector::Constant(1, j)});
    }
  }
  const HkScanReport rep = hk_scan(p, grid, 1e-7);
  return {rep.collisions.empty() && rep.skipped == 0 && rep.min_distance > 1e-6,
          std::to_string(rep.collisions.size()) + " collisions, min separation " +
              sci(rep.min_distance)};
}

Outcome boundary() {
  constexpr double kLast = 10.0;
  const ModelParams p = ModelParams::rabi(1.0, 1.0);
  std::vector<double> s, f;
  for (int k = 3; k <= 12; ++k) {
    s.push_back(1.0 - std::ldexp(1.0, -k));
    f.push_back(lieb_functional(p, {Vector::Constant(1, s.back()), Vector::Zero(1)}, 1e-10).value);
  }
  std::vector<double> d;
  for (std::size_t k = 0; k + 1 < s.size(); ++k) d.push_back((f[k + 1] - f[k]) / (s[k + 1] - s[k]));
  bool increasing = true;
  for (std::size_t k = 1; k < d.size(); ++k) increasing &= d[k] > d[k - 1];
  int rejected = 0;
  for (double edge : {1.0, -1.0}) {
    try {
      inverse_map(p, {Vector::Constant(1, edge), Vector::Zero(1)});
    } catch (const BoundaryError&) {
      ++rejected;
    }
  }
  return {increasing && d.back() > kLast && rejected == 2,
          std::string("forward differences ") + (increasing ? "increasing" : "not increasing") +
              ", last " + sci(d.back()) + "; " + std::to_string(rejected) +
              "/2 edge targets rejected"};
}

Outcome sign_flip() {
  constexpr double kTol = 1e-7;
  std::mt19937_64 rng(1111);
  double worst = 0.0;
  for (int k = 0; k < 20; ++k) {
    const ModelParams p = ModelParams::rabi(draw(rng, 0.2, 2.0), draw(rng, 0.3, 1.5));
    const DensityPair d{uniform(rng, 1, -0.9, 0.9), uniform(rng, 1, -1.0, 1.0)};
    const auto seed = static_cast<std::uint64_t>(k);
    const double a = fll_constrained_search(p, d, 1e-10, seed).value;
    const double b = fll_constrained_search(p, {-d.sigma, -d.xi}, 1e-10, seed).value;
    worst = std::max(worst, std::abs(a - b));
  }
  return {worst <= kTol, "max |F(-s,-x) - F(s,x)| = " + sci(worst) + " over 20 pairs"};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Check> checks{
      {1, "zero-coupling closed form", 120, zero_coupling},
      {2, "figure reproduction", 60, figure},
      {3, "F_L = F_LL for Rabi", 300, lieb_equals_levy_lieb},
      {4, "force balance", 120, force_balance_check},
      {5, "virial identities", 120, virial},
      {6, "regular-set geometry", 60, regular_set},
      {7, "adiabatic connection", 600, adiabatic},
      {8, "Euler-Lagrange and aufbau", 300, euler_lagrange},
      {9, "Hohenberg-Kohn injectivity", 60, hohenberg_kohn},
      {10, "boundary behavior", 60, boundary},
      {11, "sign-flip symmetry", 120, sign_flip},
  };
  std::vector<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.push_back(std::atoi(argv[i]));
  bool all = true;
  for (const auto& c : checks) {
    if (!wanted.empty() && std::find(wanted.begin(), wanted.end(), c.id) == wanted.end()) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (secs > c.time_limit) {
      o.pass = false;
      o.detail += "; over the " + sci(c.time_limit) + " s limit";
    }
    std::printf("%s %d %s: %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", c.id, c.name,
                o.detail.c_str(), secs);
    std::fflush(stdout);
    all &= o.pass;
  }
  return all ? 0 : 1;
}
