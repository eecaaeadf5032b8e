// Copyright 2026 The dickedft Authors
// SPDX-License-Identifier: Apache-2.0

/**
 * @file functionals.hpp
 * @brief Ground-state energy map, inverse map (σ, ξ) → (v, j), the Lieb
 *        functional by Legendre duality, closed forms and ensemble fitting.
 *
 * The Levy–Lieb constrained search lives in constrained_search.hpp.
 */

#pragma once

#include <Eigen/Dense>
#include <boost/math/tools/toms748_solve.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "dickedft/error.hpp"
#include "dickedft/model.hpp"
#include "dickedft/spectral.hpp"

namespace dickedft {

/// Magnetization σ_n = ⟨σ_z^n⟩ and displacement ξ_m = ⟨x_m⟩.
struct DensityPair {
  static constexpr double kCubeSlack = 1e-12;

  Vector sigma;
  Vector xi;

  void validate(const ModelParams& p) const {
    if (sigma.size() != p.n_spins || xi.size() != p.n_modes) {
      throw ConfigError("density pair must have sizes (n_spins, n_modes)");
    }
    if (!sigma.allFinite() || !xi.allFinite()) {
      throw ConfigError("density pair must be finite");
    }
    if (sigma.size() > 0 && sigma.cwiseAbs().maxCoeff() > 1.0 + kCubeSlack) {
      throw DomainError("magnetization outside [-1,1]^N");
    }
  }

  double distance(const DensityPair& o) const {
    return std::sqrt((sigma - o.sigma).squaredNorm() + (xi - o.xi).squaredNorm());
  }
};

/// Lagrange multipliers of the constrained search: H(v,j)ψ = Eψ.
struct Multipliers {
  double energy = 0.0;
  Vector v;
  Vector j;

  Potentials potentials() const { return {v, j}; }
};

struct Ensemble {
  std::vector<double> weights;
  std::vector<WaveFunction> states;
};

using Optimizer = std::variant<std::monostate, WaveFunction, Ensemble>;

struct FunctionalResult {
  double value = std::numeric_limits<double>::quiet_NaN();
  std::optional<Potentials> representing_potentials;
  std::optional<Multipliers> multipliers;
  Optimizer optimizer;
  bool converged = false;
  bool representable = true;
  std::map<std::string, double> residuals;
  int cutoff_used = 0;
};

// ---------------------------------------------------------------------------
// Densities

namespace detail {

/// Bilinear forms ⟨a, σ_z^n b⟩ and ⟨a, x_m b⟩.
inline DensityPair cross_density(const Vector& a, const Vector& b,
                                 const TruncatedBasis& basis) {
  const int N = basis.n_spins();
  const int M = basis.n_modes();
  DensityPair d{Vector::Zero(N), Vector::Zero(M)};
  const std::size_t dim = basis.dimension();
  for (std::size_t i = 0; i < dim; ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    const double ab = a(ii) * b(ii);
    if (ab != 0.0) {
      for (int n = 0; n < N; ++n) d.sigma(n) += ab * basis.spin_value(i, n);
    }
    for (int m = 0; m < M; ++m) {
      const int occ = basis.occupation(i, m);
      if (occ == 0) continue;
      const auto lo = static_cast<Eigen::Index>(i - basis.mode_stride(m));
      d.xi(m) += std::sqrt(0.5 * occ) * (a(ii) * b(lo) + a(lo) * b(ii));
    }
  }
  return d;
}

}  // namespace detail

inline DensityPair density_pair(const Vector& coefficients,
                                const TruncatedBasis& basis) {
  if (static_cast<std::size_t>(coefficients.size()) != basis.dimension()) {
    throw ConfigError("state length does not match basis dimension");
  }
  return detail::cross_density(coefficients, coefficients, basis);
}

inline DensityPair density_pair(const WaveFunction& psi) {
  return density_pair(psi.coefficients(), psi.basis());
}

inline DensityPair density_pair(const Ensemble& ens) {
  if (ens.states.empty()) throw ConfigError("empty ensemble");
  DensityPair d = density_pair(ens.states.front());
  d.sigma *= ens.weights.front();
  d.xi *= ens.weights.front();
  for (std::size_t k = 1; k < ens.states.size(); ++k) {
    const DensityPair dk = density_pair(ens.states[k]);
    d.sigma += ens.weights[k] * dk.sigma;
    d.xi += ens.weights[k] * dk.xi;
  }
  return d;
}

// ---------------------------------------------------------------------------
// Zero coupling

/// F⁰(σ, ξ) = M + |ξ|² − Σ |t_n| √(1 − σ_n²).
inline double zero_coupling_fll(const ModelParams& params,
                                const DensityPair& target) {
  params.validate();
  if (!params.decoupled()) {
    throw ConfigError("closed form requires zero coupling");
  }
  target.validate(params);
  double f = params.n_modes + target.xi.squaredNorm();
  for (int n = 0; n < params.n_spins; ++n) {
    const double s = std::min(1.0, std::abs(target.sigma(n)));
    f -= std::abs(params.tunneling(n)) * std::sqrt(std::max(0.0, 1.0 - s * s));
  }
  return f;
}

struct TrialState {
  static constexpr double kTailWarning = 1e-8;

  WaveFunction psi;
  double tail_mass = 0.0;  ///< Probability cut off by the Fock truncation.

  bool truncation_warning() const { return tail_mass > kTailWarning; }
};

/// Displaced Gaussian ⊗ product spin state with the target densities. The
/// spin factor of slot n is (√(1+σ_n), s_n√(1−σ_n))/√2 with s_n the sign of
/// t_n, so that −t_n⟨σ_x^n⟩ = −|t_n|√(1−σ_n²).
inline TrialState trial_state(const DensityPair& target,
                              const TruncatedBasis& basis,
                              const Vector& tunneling_sign = Vector()) {
  const int N = basis.n_spins();
  const int M = basis.n_modes();
  const int K = basis.cutoff();
  if (target.sigma.size() != N || target.xi.size() != M) {
    throw ConfigError("target does not match basis");
  }
  if (target.sigma.cwiseAbs().maxCoeff() > 1.0 + DensityPair::kCubeSlack) {
    throw DomainError("magnetization outside [-1,1]^N");
  }

  Matrix spin(2, N);
  for (int n = 0; n < N; ++n) {
    const double s = std::clamp(target.sigma(n), -1.0, 1.0);
    const double sign =
        (tunneling_sign.size() == N && tunneling_sign(n) < 0.0) ? -1.0 : 1.0;
    spin(0, n) = std::sqrt(0.5 * (1.0 + s));
    spin(1, n) = sign * std::sqrt(0.5 * (1.0 - s));
  }
  // Coherent state |α⟩ with α = ξ/√2: c_k = e^{−α²/2} α^k / √k!.
  Matrix fock(K, M);
  double kept = 1.0;
  for (int m = 0; m < M; ++m) {
    const double alpha = target.xi(m) / std::sqrt(2.0);
    fock(0, m) = std::exp(-0.5 * alpha * alpha);
    for (int k = 1; k < K; ++k) fock(k, m) = fock(k - 1, m) * alpha / std::sqrt(static_cast<double>(k));
    kept *= fock.col(m).squaredNorm();
  }

  Vector c(static_cast<Eigen::Index>(basis.dimension()));
  for (std::size_t i = 0; i < basis.dimension(); ++i) {
    double v = 1.0;
    for (int n = 0; n < N; ++n) v *= spin(basis.spin_value(i, n) > 0 ? 0 : 1, n);
    for (int m = 0; m < M; ++m) v *= fock(basis.occupation(i, m), m);
    c(static_cast<Eigen::Index>(i)) = v;
  }
  return {WaveFunction::normalized(basis, std::move(c)), std::max(0.0, 1.0 - kept)};
}

inline TrialState trial_state(const ModelParams& params, const DensityPair& target,
                              const TruncatedBasis& basis) {
  return trial_state(target, basis, params.tunneling);
}

/// Smallest cutoff whose coherent-state tail at the target is below tail.
inline int trial_cutoff(const DensityPair& target, double tail = 1e-14,
                        int minimum = 8) {
  int K = std::max(2, minimum);
  for (;; ++K) {
    double kept = 1.0;
    for (Eigen::Index m = 0; m < target.xi.size(); ++m) {
      const double a2 = 0.5 * target.xi(m) * target.xi(m);
      double term = std::exp(-a2), sum = term;
      for (int k = 1; k < K; ++k) {
        term *= a2 / k;
        sum += term;
      }
      kept *= sum;
    }
    if (1.0 - kept <= tail || K > 400) return K;
  }
}

// ---------------------------------------------------------------------------
// Energy map and inverse map

struct FunctionalOptions {
  double boundary_eps = 1e-6;
  double cutoff_tol = 1e-11;  ///< Eigenvalue change accepted between cutoffs.
  int initial_cutoff = 8;
  double growth = 1.5;
  std::size_t dimension_cap = kDefaultDimensionCap;
  EigensolveOptions eigen;
  int max_iterations = 100;

  CutoffOptions cutoff_options() const {
    CutoffOptions c;
    c.initial_cutoff = initial_cutoff;
    c.growth = growth;
    c.dimension_cap = dimension_cap;
    c.eigen = eigen;
    return c;
  }
};

struct EnergyResult {
  double energy = 0.0;
  DensityPair density;
  SpectralResult spectrum;
};

/// Ground energy E(v, j) and ground-state densities at a converged cutoff.
inline EnergyResult energy(const ModelParams& params, const Potentials& pots,
                           double tol = 1e-10, const CutoffOptions& opts = {}) {
  SpectralResult spec = converge_cutoff(params, pots, tol, 2, opts);
  DensityPair d = density_pair(spec.ground());
  const double e = spec.ground_energy();
  return {e, std::move(d), std::move(spec)};
}

struct InverseMapResult {
  Potentials potentials;
  Multipliers multipliers;
  SpectralResult spectrum;
  DensityPair achieved;
  int cutoff_used = 0;
  int iterations = 0;
  double density_error = std::numeric_limits<double>::infinity();
  double value_change = std::numeric_limits<double>::quiet_NaN();
  /// Set when the target needs a mixture over a cluster of ground states
  /// spread by at most this much in energy.
  std::optional<double> degeneracy_width;
};

class InverseMapError : public ConvergenceError {
 public:
  InverseMapError(const std::string& what, InverseMapResult best)
      : ConvergenceError(what), best_(std::move(best)) {}
  const InverseMapResult& best() const { return best_; }

 private:
  InverseMapResult best_;
};

namespace detail {

struct GroundEval {
  Vector v;
  SpectralResult spectrum;
  DensityPair density;
  std::optional<double> cluster_width;
};

inline GroundEval ground_eval(const ModelOperators& ops, const Potentials& pots,
                              const EigensolveOptions& eig, int nev = 2) {
  SpectralResult spec = eigensolve(ops.hamiltonian(pots), ops.basis,
                                   std::min<int>(nev, static_cast<int>(ops.dimension())), eig);
  DensityPair d = density_pair(spec.ground());
  return {pots.v, std::move(spec), std::move(d), std::nullopt};
}

inline InverseMapResult to_result(const GroundEval& e, const Vector& j,
                                  const DensityPair& target, int iterations) {
  InverseMapResult r;
  r.potentials = {e.v, j};
  r.multipliers = {e.spectrum.ground_energy(), e.v, j};
  r.spectrum = e.spectrum;
  r.achieved = e.density;
  r.cutoff_used = e.spectrum.cutoff_used;
  r.iterations = iterations;
  r.density_error = std::max((e.density.sigma - target.sigma).cwiseAbs().maxCoeff(),
                             (e.density.xi - target.xi).cwiseAbs().maxCoeff());
  r.degeneracy_width = e.cluster_width;
  return r;
}

/// Potential v_n of the decoupled spin with magnetization σ_n.
inline Vector decoupled_guess(const ModelParams& params, const Vector& sigma) {
  Vector v(params.n_spins);
  for (int n = 0; n < params.n_spins; ++n) {
    const double s = sigma(n);
    v(n) = -std::abs(params.tunneling(n)) * s / std::sqrt(std::max(1e-300, 1.0 - s * s));
  }
  return v;
}

/// Euclidean projection of a vector onto the probability simplex.
inline Vector project_simplex(const Vector& y) {
  std::vector<double> u(y.data(), y.data() + y.size());
  std::sort(u.begin(), u.end(), std::greater<>());
  double css = 0.0, theta = 0.0;
  for (std::size_t k = 0; k < u.size(); ++k) {
    css += u[k];
    const double t = (css - 1.0) / static_cast<double>(k + 1);
    if (u[k] - t > 0.0) theta = t;
  }
  return (y.array() - theta).max(0.0).matrix();
}

inline Matrix project_spectraplex(const Matrix& y) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (y + y.transpose()));
  const Vector lam = project_simplex(es.eigenvalues());
  return es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().transpose();
}

/// A_k(a, b) = ⟨φ_a, O_k φ_b⟩ over the first d eigenvectors, O_k running
/// over σ_z^1..σ_z^N and then (if with_modes) x_1..x_M.
inline std::vector<Matrix> density_matrices(const SpectralResult& spec, int d, bool with_modes) {
  const TruncatedBasis& basis = spec.ground().basis();
  const int N = basis.n_spins();
  const int K = N + (with_modes ? basis.n_modes() : 0);
  std::vector<Matrix> A(static_cast<std::size_t>(K), Matrix::Zero(d, d));
  for (int a = 0; a < d; ++a) {
    for (int b = a; b < d; ++b) {
      const DensityPair c = cross_density(spec.eigenvectors[static_cast<std::size_t>(a)].coefficients(),
                                          spec.eigenvectors[static_cast<std::size_t>(b)].coefficients(),
                                          basis);
      for (int k = 0; k < K; ++k) {
        const double val = k < N ? c.sigma(k) : c.xi(k - N);
        A[static_cast<std::size_t>(k)](a, b) = val;
        A[static_cast<std::size_t>(k)](b, a) = val;
      }
    }
  }
  return A;
}

inline Vector apply_densities(const std::vector<Matrix>& A, const Matrix& rho) {
  Vector p(static_cast<Eigen::Index>(A.size()));
  for (std::size_t k = 0; k < A.size(); ++k) p(static_cast<Eigen::Index>(k)) = (A[k] * rho).trace();
  return p;
}

/// argmin over density matrices ρ of ‖(tr A_k ρ)_k − b‖², by FISTA.
inline Matrix spectraplex_fit(const std::vector<Matrix>& A, const Vector& b, int d) {
  Matrix rho = Matrix::Identity(d, d) / d;
  if (d == 1) return rho;
  double L = 0.0;
  for (const auto& a : A) L += a.squaredNorm();
  L = 2.0 * L + 1e-300;
  Matrix y = rho;
  double t = 1.0;
  for (int it = 0; it < 50000; ++it) {
    const Vector r = apply_densities(A, y) - b;
    Matrix g = Matrix::Zero(d, d);
    for (std::size_t k = 0; k < A.size(); ++k) g += 2.0 * r(static_cast<Eigen::Index>(k)) * A[k];
    const Matrix next = project_spectraplex(y - g / L);
    const double tn = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    y = next + ((t - 1.0) / tn) * (next - rho);
    rho = next;
    t = tn;
    if ((apply_densities(A, rho) - b).norm() < 1e-14) break;
  }
  return rho;
}

/// σ(v) is non-increasing for a single spin: bracket and solve with TOMS 748.
inline GroundEval solve_single_spin(const ModelOperators& ops, const Vector& j,
                                    double sigma_target, double v0, double tol,
                                    const FunctionalOptions& opts, int& iters) {
  std::optional<GroundEval> best;
  double best_res = std::numeric_limits<double>::infinity();
  auto eval = [&](double v) {
    ++iters;
    GroundEval e = ground_eval(ops, {Vector::Constant(1, v), j}, opts.eigen);
    const double r = e.density.sigma(0) - sigma_target;
    if (std::abs(r) < best_res) {
      best_res = std::abs(r);
      best = std::move(e);
    }
    return r;
  };
  auto fail = [&](const std::string& why) -> GroundEval {
    throw InverseMapError(why, best ? to_result(*best, j, DensityPair{Vector::Constant(1, sigma_target), Vector()}, iters)
                                    : InverseMapResult{});
  };

  double a = v0, fa = eval(a);
  if (std::abs(fa) <= tol) return *best;
  double step = std::max(0.5, 0.5 * std::abs(v0));
  double b = a, fb = fa;
  int expand = 0;
  // f(v) = σ(v) − σ* decreases in v.
  while ((fa > 0) == (fb > 0) && fb != 0.0) {
    if (++expand > 80) return fail("could not bracket the magnetization target");
    a = b;
    fa = fb;
    b = fa > 0 ? a + step : a - step;
    fb = eval(b);
    step *= 2.0;
  }
  if (a > b) {
    std::swap(a, b);
    std::swap(fa, fb);
  }
  if (best_res <= tol) return *best;
  boost::uintmax_t max_iter = static_cast<boost::uintmax_t>(std::max(opts.max_iterations, 10));
  auto stop = [&](double lo, double hi) {
    return best_res <= 0.01 * tol || hi - lo <= 1e-15 * (1.0 + std::abs(lo));
  };
  try {
    boost::math::tools::toms748_solve(eval, a, b, fa, fb, stop, max_iter);
  } catch (const std::exception&) {
    return fail("root finder failed");
  }
  if (best_res > tol) return fail("magnetization target not reached");
  return *best;
}

/// Ascent of the concave dual g(v) = E(v, j) − v·σ* when σ* needs a mixture
/// of degenerate ground states, where σ(v) jumps and plain Newton cannot
/// settle. E is replaced by the free energy −β⁻¹ log Σ_a exp(−βE_a) over the
/// low-lying eigenpairs, which is smooth with an exact Kubo–Mori Hessian, and
/// β is raised until the thermal weights resolve the ground cluster.
inline GroundEval smoothed_ascent(const ModelOperators& ops, const Vector& j,
                                  const Vector& sigma_target, const Vector& v0, double tol,
                                  const FunctionalOptions& opts, int& iters) {
  const int N = static_cast<int>(sigma_target.size());
  const int nev = std::min<int>(static_cast<int>(ops.dimension()),
                                std::min(16, (1 << std::min(N, 4)) + 4));
  auto eval = [&](const Vector& vv) {
    ++iters;
    return ground_eval(ops, {vv, j}, opts.eigen, nev);
  };
  GroundEval cur = eval(v0);
  auto fail = [&](const std::string& why) -> GroundEval {
    throw InverseMapError(why, to_result(cur, j, DensityPair{sigma_target, cur.density.xi}, iters));
  };
  struct Thermal {
    double value;
    Vector grad;
    Matrix hess;
    Vector weights;
  };
  auto thermal = [&](const GroundEval& e, double beta) {
    const SpectralResult& sp = e.spectrum;
    const int d = sp.count();
    const double e0 = sp.ground_energy();
    Vector p(d);
    for (int a = 0; a < d; ++a) p(a) = std::exp(-beta * (sp.eigenvalues(a) - e0));
    const double z = p.sum();
    p /= z;
    const auto A = density_matrices(sp, d, false);
    Thermal t;
    t.value = e0 - std::log(z) / beta - e.v.dot(sigma_target);
    t.weights = p;
    Vector mean(N);
    for (int n = 0; n < N; ++n) mean(n) = p.dot(A[static_cast<std::size_t>(n)].diagonal());
    t.grad = mean - sigma_target;
    // Φ_ab = (p_a − p_b) / (β(E_b − E_a)), with the limit p_a on ties.
    Matrix phi(d, d);
    for (int a = 0; a < d; ++a) {
      for (int b = 0; b < d; ++b) {
        const double gap = beta * (sp.eigenvalues(b) - sp.eigenvalues(a));
        phi(a, b) = std::abs(gap) < 1e-8 ? 0.5 * (p(a) + p(b)) : (p(a) - p(b)) / gap;
      }
    }
    t.hess.resize(N, N);
    for (int n = 0; n < N; ++n) {
      for (int m = 0; m <= n; ++m) {
        const double kubo =
            (A[static_cast<std::size_t>(n)].cwiseProduct(A[static_cast<std::size_t>(m)]).cwiseProduct(phi)).sum();
        t.hess(n, m) = t.hess(m, n) = -beta * (kubo - mean(n) * mean(m));
      }
    }
    return t;
  };

  const double scale = 1.0 + std::abs(cur.spectrum.ground_energy());
  const double beta_final = 1e11 / scale;
  double beta = 1e2 / scale;
  int budget = 4 * opts.max_iterations;
  std::optional<Vector> last_stage;
  for (;;) {
    Thermal t = thermal(cur, beta);
    // Eigenvalue roundoff ε moves the thermal weights by about βε.
    const double floor = std::max(tol, 1e-13 * scale * beta);
    double prev = std::numeric_limits<double>::infinity();
    int flat = 0;
    for (;;) {
      const double gmax = t.grad.cwiseAbs().maxCoeff();
      if (gmax <= floor) break;
      // Newton has stopped contracting: the gradient sits on eigensolver noise.
      flat = gmax > 0.5 * prev ? flat + 1 : 0;
      if (flat >= 3 && gmax <= 1e-3) break;
      prev = std::min(prev, gmax);
      if (--budget < 0) return fail("dual ascent exceeded the iteration limit");
      const Matrix neg = -t.hess + 1e-14 * beta * Matrix::Identity(N, N);
      Vector step = neg.ldlt().solve(t.grad);
      if (!step.allFinite()) step = t.grad;
      // No thermal weight across a crossing leaves a flat direction.
      const double cap = std::max(1.0, cur.v.cwiseAbs().maxCoeff());
      if (step.norm() > cap) step *= cap / step.norm();
      const double slope = t.grad.dot(step);
      double alpha = 1.0;
      bool moved = false;
      for (int ls = 0; ls < 40; ++ls, alpha *= 0.5) {
        GroundEval trial = eval(cur.v + alpha * step);
        Thermal tt = thermal(trial, beta);
        if (tt.value >= t.value + 1e-4 * alpha * slope ||
            (tt.value >= t.value && tt.grad.norm() < t.grad.norm())) {
          cur = std::move(trial);
          t = std::move(tt);
          moved = true;
          break;
        }
      }
      if (!moved) {
        if (t.grad.cwiseAbs().maxCoeff() <= std::max(1e3 * floor, 1e-3)) break;
        return fail("dual ascent stalled");
      }
    }
    if (beta >= beta_final) {
      double width = 0.0;
      int members = 0;
      for (int a = 0; a < cur.spectrum.count(); ++a) {
        if (t.weights(a) > 1e-14) {
          width = std::max(width, cur.spectrum.eigenvalues(a) - cur.spectrum.ground_energy());
          ++members;
        }
      }
      if (members > 1) cur.cluster_width = std::max(width * 1.01, 1e-13 * scale);
      return cur;
    }
    // The stage optima approach the kink like 1/β; extrapolate one decade.
    const Vector here = cur.v;
    beta = std::min(beta * 10.0, beta_final);
    if (last_stage) {
      GroundEval guess = eval(here + 0.1 * (here - *last_stage));
      if (thermal(guess, beta).value >= thermal(cur, beta).value) cur = std::move(guess);
    }
    last_stage = here;
  }
}

/// Damped Newton on v with a finite-difference Jacobian, falling back to
/// ascent on the concave dual g(v) = E(v, j) − v·σ*.
inline GroundEval solve_multi_spin(const ModelOperators& ops, const Vector& j,
                                   const Vector& sigma_target, Vector v, double tol,
                                   const FunctionalOptions& opts, int& iters) {
  const int N = static_cast<int>(v.size());
  auto eval = [&](const Vector& vv) {
    ++iters;
    return ground_eval(ops, {vv, j}, opts.eigen);
  };
  auto dual = [&](const GroundEval& e) {
    return e.spectrum.ground_energy() - e.v.dot(sigma_target);
  };
  GroundEval cur = eval(v);
  double best_rn = std::numeric_limits<double>::infinity();
  int slow = 0;
  for (int it = 0; it < opts.max_iterations; ++it) {
    const Vector r = cur.density.sigma - sigma_target;
    const double rn = r.norm();
    if (r.cwiseAbs().maxCoeff() <= tol) return cur;
    // Newton creeping along means σ(v) is not smooth near the solution.
    slow = rn > 0.5 * best_rn ? slow + 1 : 0;
    if (slow >= 5) break;
    best_rn = std::min(best_rn, rn);

    const double h = 1e-5 * std::max(1.0, cur.v.cwiseAbs().maxCoeff());
    Matrix J(N, N);
    for (int k = 0; k < N; ++k) {
      Vector vp = cur.v, vm = cur.v;
      vp(k) += h;
      vm(k) -= h;
      J.col(k) = (eval(vp).density.sigma - eval(vm).density.sigma) / (2.0 * h);
    }
    J = 0.5 * (J + J.transpose()).eval();
    Vector d = -J.colPivHouseholderQr().solve(r);
    // A near-singular J (a spin that does not tunnel) gives runaway steps.
    const double cap = std::max(1.0, cur.v.cwiseAbs().maxCoeff());
    if (d.norm() > cap) d *= cap / d.norm();
    bool accepted = false;
    if (d.allFinite() && r.dot(d) > 0.0) {
      double alpha = 1.0;
      for (int ls = 0; ls < 20 && !accepted; ++ls, alpha *= 0.5) {
        GroundEval trial = eval(cur.v + alpha * d);
        if ((trial.density.sigma - sigma_target).norm() < (1.0 - 1e-4 * alpha) * rn) {
          cur = std::move(trial);
          accepted = true;
        }
      }
    }
    if (!accepted) {
      // Supergradient ascent on the dual; its gradient is σ(v) − σ*.
      const double g0 = dual(cur);
      double beta = 1.0;
      for (int ls = 0; ls < 30 && !accepted; ++ls, beta *= 0.5) {
        GroundEval trial = eval(cur.v + beta * r);
        if (dual(trial) > g0 + 1e-4 * beta * rn * rn) {
          cur = std::move(trial);
          accepted = true;
        }
      }
    }
    if (!accepted) break;
  }
  return smoothed_ascent(ops, j, sigma_target, cur.v, tol, opts, iters);
}

}  // namespace detail

/// Potentials (v, j) whose ground state has the target densities. j follows
/// from force balance j = −(Λσ + 2ξ); v is found by a root search at a fixed
/// cutoff, then the result is re-verified at the next larger cutoff.
inline InverseMapResult inverse_map(const ModelParams& params,
                                    const DensityPair& target, double tol = 1e-10,
                                    const FunctionalOptions& opts = {}) {
  params.validate();
  target.validate(params);
  if (!(tol > 0.0)) throw ConfigError("tolerance must be positive");
  for (int n = 0; n < params.n_spins; ++n) {
    if (std::abs(target.sigma(n)) > 1.0 - opts.boundary_eps) {
      throw BoundaryError("magnetization on the cube boundary is not v-representable");
    }
  }
  const Vector j = -(params.coupling * target.sigma + 2.0 * target.xi);
  Vector v = detail::decoupled_guess(params, target.sigma);

  const CutoffOptions co = opts.cutoff_options();
  int K = converge_cutoff(params, {v, j}, opts.cutoff_tol, 1, co).cutoff_used;
  int iters = 0;
  for (;;) {
    ModelOperators ops(params, K, opts.dimension_cap);
    detail::GroundEval e =
        params.n_spins == 1
            ? detail::solve_single_spin(ops, j, target.sigma(0), v(0), tol, opts, iters)
            : detail::solve_multi_spin(ops, j, target.sigma, v, tol, opts, iters);
    v = e.v;
    if (e.spectrum.degenerate || e.cluster_width) {
      InverseMapResult r = detail::to_result(e, j, target, iters);
      return r;
    }
    const int K2 = grow_cutoff(K, opts.growth);
    std::optional<ModelOperators> ops2;
    try {
      ops2.emplace(params, K2, opts.dimension_cap);
    } catch (const SizingError&) {
      throw InverseMapError("cutoff cap reached during re-verification",
                            detail::to_result(e, j, target, iters));
    }
    detail::GroundEval e2 = detail::ground_eval(*ops2, {v, j}, opts.eigen);
    InverseMapResult r = detail::to_result(e2, j, target, iters);
    const double f1 = e.spectrum.ground_energy() - v.dot(target.sigma) - j.dot(target.xi);
    const double f2 = e2.spectrum.ground_energy() - v.dot(target.sigma) - j.dot(target.xi);
    r.value_change = std::abs(f2 - f1);
    if (r.density_error <= tol && r.value_change <= std::max(tol, opts.cutoff_tol)) {
      return r;
    }
    K = K2;
  }
}

// ---------------------------------------------------------------------------
// Ensembles

/// Density matrix on the degenerate ground space of spec whose densities hit
/// the target. Weights are sorted in decreasing order. deg_tol overrides the
/// default width of the ground cluster.
inline Ensemble ensemble_fit(const SpectralResult& spec, const DensityPair& target,
                             double tol = 1e-8, std::optional<double> deg_tol = std::nullopt) {
  const int d = ground_degeneracy(spec, deg_tol);
  const TruncatedBasis& basis = spec.ground().basis();
  const int N = basis.n_spins(), M = basis.n_modes();
  if (target.sigma.size() != N || target.xi.size() != M) {
    throw ConfigError("target does not match basis");
  }
  const auto A = detail::density_matrices(spec, d, true);
  Vector b(N + M);
  b << target.sigma, target.xi;
  const Matrix rho = detail::spectraplex_fit(A, b, d);
  const double dist = (detail::apply_densities(A, rho) - b).norm();
  if (dist > tol) {
    throw InfeasibleError("target outside the densities of the ground space", dist);
  }

  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (rho + rho.transpose()));
  Ensemble ens;
  double total = 0.0;
  for (int k = d - 1; k >= 0; --k) {
    const double w = es.eigenvalues()(k);
    if (w <= 1e-15) continue;
    Vector c = Vector::Zero(static_cast<Eigen::Index>(basis.dimension()));
    for (int a = 0; a < d; ++a) {
      c += es.eigenvectors()(a, k) * spec.eigenvectors[static_cast<std::size_t>(a)].coefficients();
    }
    fix_phase(c);
    ens.weights.push_back(w);
    ens.states.push_back(WaveFunction::normalized(basis, std::move(c)));
    total += w;
  }
  for (double& w : ens.weights) w /= total;
  return ens;
}

// ---------------------------------------------------------------------------
// Lieb functional

namespace detail {

/// Embeds a state of the model with the frozen spins removed into the full
/// basis, with frozen spin n fixed to σ_z = signs[n].
inline WaveFunction lift_frozen(const WaveFunction& reduced, const TruncatedBasis& full,
                                const std::vector<int>& frozen,
                                const std::vector<int>& signs) {
  const int N = full.n_spins();
  const int Nr = reduced.basis().n_spins();
  Vector c = Vector::Zero(static_cast<Eigen::Index>(full.dimension()));
  for (std::size_t i = 0; i < full.dimension(); ++i) {
    bool ok = true;
    std::size_t alpha_r = 0;
    for (int n = 0; n < N && ok; ++n) {
      auto it = std::find(frozen.begin(), frozen.end(), n);
      if (it != frozen.end()) {
        ok = full.spin_value(i, n) == signs[static_cast<std::size_t>(it - frozen.begin())];
      } else {
        alpha_r = (alpha_r << 1U) | (full.spin_value(i, n) > 0 ? 0U : 1U);
      }
    }
    if (!ok) continue;
    const std::size_t modes = i >> static_cast<std::size_t>(N);
    const std::size_t ir = alpha_r + (modes << static_cast<std::size_t>(Nr));
    c(static_cast<Eigen::Index>(i)) = reduced.coefficients()(static_cast<Eigen::Index>(ir));
  }
  return WaveFunction::normalized(full, std::move(c));
}

struct FrozenSplit {
  std::vector<int> frozen;
  std::vector<int> signs;
  std::vector<int> free;
};

inline FrozenSplit split_frozen(const Vector& sigma, double eps) {
  FrozenSplit s;
  for (int n = 0; n < static_cast<int>(sigma.size()); ++n) {
    if (std::abs(sigma(n)) >= 1.0 - eps) {
      s.frozen.push_back(n);
      s.signs.push_back(sigma(n) > 0 ? 1 : -1);
    } else {
      s.free.push_back(n);
    }
  }
  return s;
}

inline ModelParams reduced_params(const ModelParams& p, const std::vector<int>& keep) {
  ModelParams r;
  r.n_spins = static_cast<int>(keep.size());
  r.n_modes = p.n_modes;
  r.coupling.resize(p.n_modes, r.n_spins);
  r.tunneling.resize(r.n_spins);
  for (int k = 0; k < r.n_spins; ++k) {
    r.coupling.col(k) = p.coupling.col(keep[static_cast<std::size_t>(k)]);
    r.tunneling(k) = p.tunneling(keep[static_cast<std::size_t>(k)]);
  }
  return r;
}

}  // namespace detail

inline FunctionalResult lieb_functional(const ModelParams& params,
                                        const DensityPair& target,
                                        double tol = 1e-10,
                                        const FunctionalOptions& opts = {});

namespace detail {

/// A spin with |σ_n| = 1 is frozen in σ_z = ±1, so
/// F(σ, ξ) = F_reduced(σ', ξ) + Σ_frozen s_n Λ_{:,n}·ξ.
inline FunctionalResult boundary_lieb(const ModelParams& params,
                                      const DensityPair& target, double tol,
                                      const FunctionalOptions& opts,
                                      const FrozenSplit& split) {
  double offset = 0.0;
  for (std::size_t k = 0; k < split.frozen.size(); ++k) {
    offset += split.signs[k] * params.coupling.col(split.frozen[k]).dot(target.xi);
  }
  FunctionalResult out;
  out.representable = false;
  if (split.free.empty()) {
    out.value = params.n_modes + target.xi.squaredNorm() + offset;
    DensityPair t = target;
    for (std::size_t k = 0; k < split.frozen.size(); ++k) {
      t.sigma(split.frozen[k]) = split.signs[k];
    }
    const int K = trial_cutoff(target);
    TruncatedBasis basis = build_basis(params, {K}, opts.dimension_cap);
    TrialState ts = trial_state(params, t, basis);
    out.optimizer = ts.psi;
    out.cutoff_used = K;
    out.converged = true;
    out.residuals["truncation_tail"] = ts.tail_mass;
    return out;
  }
  ModelParams red = reduced_params(params, split.free);
  if (red.tunneling.cwiseAbs().maxCoeff() == 0.0) {
    // No tunneling left to define a reduced model: evaluate at the clamped
    // interior point instead.
    DensityPair clamped = target;
    for (std::size_t k = 0; k < split.frozen.size(); ++k) {
      clamped.sigma(split.frozen[k]) = split.signs[k] * (1.0 - 2.0 * opts.boundary_eps);
    }
    out = lieb_functional(params, clamped, tol, opts);
    out.representable = false;
    out.representing_potentials.reset();
    out.multipliers.reset();
    out.residuals["clamp_shift"] = 2.0 * opts.boundary_eps;
    return out;
  }
  DensityPair rt{Vector(static_cast<Eigen::Index>(split.free.size())), target.xi};
  for (std::size_t k = 0; k < split.free.size(); ++k) rt.sigma(static_cast<Eigen::Index>(k)) = target.sigma(split.free[k]);
  FunctionalResult r = lieb_functional(red, rt, tol, opts);
  out.value = r.value + offset;
  out.converged = r.converged;
  out.cutoff_used = r.cutoff_used;
  out.residuals = r.residuals;
  if (const auto* w = std::get_if<WaveFunction>(&r.optimizer)) {
    TruncatedBasis full = build_basis(params, {w->basis().cutoff()}, opts.dimension_cap);
    out.optimizer = lift_frozen(*w, full, split.frozen, split.signs);
  } else if (const auto* e = std::get_if<Ensemble>(&r.optimizer)) {
    Ensemble lifted;
    lifted.weights = e->weights;
    TruncatedBasis full = build_basis(params, {e->states.front().basis().cutoff()}, opts.dimension_cap);
    for (const auto& s : e->states) lifted.states.push_back(lift_frozen(s, full, split.frozen, split.signs));
    out.optimizer = std::move(lifted);
  }
  return out;
}

}  // namespace detail

/// F_L(σ, ξ) = E(v, j) − v·σ − j·ξ at the potentials of the inverse map.
inline FunctionalResult lieb_functional(const ModelParams& params,
                                        const DensityPair& target, double tol,
                                        const FunctionalOptions& opts) {
  params.validate();
  target.validate(params);
  const auto split = detail::split_frozen(target.sigma, opts.boundary_eps);
  if (!split.frozen.empty()) return detail::boundary_lieb(params, target, tol, opts, split);

  InverseMapResult r;
  try {
    r = inverse_map(params, target, tol, opts);
  } catch (const InverseMapError& e) {
    if (!e.best().spectrum.degenerate && !e.best().degeneracy_width) throw;
    r = e.best();
  }

  FunctionalResult out;
  out.representing_potentials = r.potentials;
  out.multipliers = r.multipliers;
  out.cutoff_used = r.cutoff_used;
  out.value = r.multipliers.energy - r.potentials.v.dot(target.sigma) -
              r.potentials.j.dot(target.xi);
  out.residuals["schrodinger"] = r.spectrum.residual;
  out.residuals["cutoff_change"] = r.value_change;
  if (r.spectrum.degenerate || r.degeneracy_width) {
    TruncatedBasis basis = build_basis(params, {r.cutoff_used}, opts.dimension_cap);
    const int k = std::min<int>(16, static_cast<int>(basis.dimension()));
    const OperatorMatrix h = build_h(params, r.potentials, basis);
    SpectralResult wide = eigensolve(h, basis, k, opts.eigen);
    Ensemble ens = ensemble_fit(wide, target, std::max(tol, 1e-8), r.degeneracy_width);
    const DensityPair got = density_pair(ens);
    out.residuals["density"] = got.distance(target);
    // tr(H ρ) − E₀ bounds F_L from above: F_L ∈ [value, value + gap].
    double mixed = 0.0;
    for (std::size_t k2 = 0; k2 < ens.states.size(); ++k2) {
      mixed += ens.weights[k2] * h.expectation(ens.states[k2].coefficients());
    }
    out.residuals["duality_gap"] = mixed - wide.ground_energy();
    out.optimizer = std::move(ens);
  } else {
    out.residuals["density"] = r.density_error;
    out.optimizer = r.spectrum.ground();
  }
  out.converged = out.residuals["density"] <= std::max(tol, 1e-8);
  return out;
}

// ---------------------------------------------------------------------------
// Aufbau

class IdentificationError : public Error {
 public:
  using Error::Error;
};

/// Position of psi in the spectrum of H(v, j), identified by overlap > 0.99
/// with an eigenvector or a degenerate eigenspace.
inline int aufbau_index(const ModelParams& params, const Multipliers& mult,
                        const WaveFunction& psi, double overlap = 0.99,
                        const EigensolveOptions& eig = {}) {
  const TruncatedBasis& basis = psi.basis();
  const int bound = params.n_spins + params.n_modes;
  const int k = std::min<int>(bound + 6, static_cast<int>(basis.dimension()));
  SpectralResult spec = eigensolve(build_h(params, mult.potentials(), basis), basis, k, eig);
  int start = 0;
  while (start < spec.count()) {
    const double tol_deg = default_degeneracy_tol(spec.eigenvalues(start));
    int end = start + 1;
    while (end < spec.count() && spec.eigenvalues(end) - spec.eigenvalues(start) <= tol_deg) ++end;
    double w = 0.0;
    for (int i = start; i < end; ++i) {
      const double o = spec.eigenvectors[static_cast<std::size_t>(i)].coefficients().dot(psi.coefficients());
      w += o * o;
    }
    if (w > overlap) {
      if (start > bound) {
        throw IdentificationError("optimizer above the (N+M)th excited state: index " +
                                  std::to_string(start));
      }
      return start;
    }
    start = end;
  }
  throw IdentificationError("optimizer matches no low-lying eigenvector");
}

}  // namespace dickedft
