// Copyright 2026 The dickedft Authors
// SPDX-License-Identifier: Apache-2.0

/**
 * @file model.hpp
 * @brief Multi-mode Dicke model: parameters, truncated Fock ⊗ spin basis and
 *        the operators acting on it.
 *
 * Basis ordering. A basis label is (α, n_1, …, n_M) with α ∈ [0, 2^N) the
 * spin configuration and n_m ∈ [0, K) the occupation of mode m. The flat index
 * is
 *
 *     i = α + 2^N · (n_1·K^{M-1} + n_2·K^{M-2} + … + n_M)
 *
 * so the spin index runs fastest and mode occupations are lexicographic with
 * mode 1 most significant. Within α, spin 1 is the most significant bit and a
 * cleared bit means spin up (σ_z = +1). For N = 2 the diagonals of σ_z^1 and
 * σ_z^2 on the spin factor are (1, 1, -1, -1) and (1, -1, 1, -1).
 *
 * Position and derivative use the ladder form x = (a + a†)/√2,
 * ∂ = (a - a†)/√2, truncated at occupation K-1.
 *
 * All C++ indices (spin slot n, mode m) are zero-based.
 */

#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "dickedft/error.hpp"

namespace dickedft {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using ComplexVector = Eigen::VectorXcd;
using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;
using Triplet = Eigen::Triplet<double>;

inline constexpr std::size_t kDefaultDimensionCap = 2'000'000;

/// Physical model: N two-level systems coupled to M oscillator modes.
struct ModelParams {
  int n_spins = 1;
  int n_modes = 1;
  Matrix coupling;  ///< M×N, dimensionless.
  Vector tunneling;  ///< length N, must not vanish identically.

  void validate() const {
    if (n_spins < 1 || n_modes < 1) {
      throw ConfigError("n_spins and n_modes must be positive");
    }
    if (coupling.rows() != n_modes || coupling.cols() != n_spins) {
      throw ConfigError("coupling must be an n_modes x n_spins matrix");
    }
    if (tunneling.size() != n_spins) {
      throw ConfigError("tunneling must have n_spins entries");
    }
    if (!coupling.allFinite() || !tunneling.allFinite()) {
      throw ConfigError("model parameters must be finite");
    }
    if (tunneling.cwiseAbs().maxCoeff() == 0.0) {
      throw ConfigError("tunneling vector must not vanish");
    }
  }

  bool decoupled() const { return coupling.cwiseAbs().maxCoeff() == 0.0; }

  /// Same model with coupling scaled by s.
  ModelParams with_coupling_scale(double s) const {
    ModelParams p = *this;
    p.coupling *= s;
    return p;
  }

  static ModelParams make(int n_spins, int n_modes, Matrix coupling,
                          Vector tunneling) {
    ModelParams p{n_spins, n_modes, std::move(coupling), std::move(tunneling)};
    p.validate();
    return p;
  }

  /// Quantum Rabi model: N = M = 1, coupling λ, tunneling t.
  static ModelParams rabi(double lambda, double t) {
    return make(1, 1, Matrix::Constant(1, 1, lambda), Vector::Constant(1, t));
  }
};

struct Truncation {
  int fock_cutoff = 2;  ///< K, occupations 0..K-1 per mode.
};

/// External potentials (v, j) of H(v, j) = H_0 + v·σ_z + j·x.
struct Potentials {
  Vector v;
  Vector j;

  static Potentials zero(const ModelParams& p) {
    return {Vector::Zero(p.n_spins), Vector::Zero(p.n_modes)};
  }

  void validate(const ModelParams& p) const {
    if (v.size() != p.n_spins || j.size() != p.n_modes) {
      throw ConfigError("potentials must have sizes (n_spins, n_modes)");
    }
    if (!v.allFinite() || !j.allFinite()) {
      throw ConfigError("potentials must be finite");
    }
  }
};

class TruncatedBasis {
 public:
  TruncatedBasis() = default;

  TruncatedBasis(int n_spins, int n_modes, int cutoff,
                 std::size_t cap = kDefaultDimensionCap)
      : n_spins_(n_spins), n_modes_(n_modes), cutoff_(cutoff) {
    if (n_spins < 1 || n_modes < 1) {
      throw ConfigError("basis needs at least one spin and one mode");
    }
    if (cutoff < 2) throw ConfigError("fock_cutoff must be at least 2");
    if (n_spins > 30) throw SizingError("too many spins for the basis");
    std::size_t dim = std::size_t{1} << n_spins;
    mode_strides_.assign(static_cast<std::size_t>(n_modes), 0);
    std::size_t modes = 1;
    for (int m = n_modes - 1; m >= 0; --m) {
      mode_strides_[static_cast<std::size_t>(m)] = dim * modes;
      if (modes > cap / static_cast<std::size_t>(cutoff) + 1) {
        throw SizingError("basis dimension exceeds cap");
      }
      modes *= static_cast<std::size_t>(cutoff);
    }
    if (modes > cap || dim > cap / modes) {
      throw SizingError("basis dimension " + std::to_string(dim) + "*" +
                        std::to_string(modes) + " exceeds cap " +
                        std::to_string(cap));
    }
    dimension_ = dim * modes;
  }

  std::size_t dimension() const { return dimension_; }
  int n_spins() const { return n_spins_; }
  int n_modes() const { return n_modes_; }
  int cutoff() const { return cutoff_; }
  std::size_t spin_dimension() const { return std::size_t{1} << n_spins_; }
  std::size_t mode_stride(int m) const {
    return mode_strides_[static_cast<std::size_t>(m)];
  }

  std::size_t spin_index(std::size_t i) const {
    return i & (spin_dimension() - 1);
  }

  int occupation(std::size_t i, int m) const {
    return static_cast<int>((i / mode_stride(m)) %
                            static_cast<std::size_t>(cutoff_));
  }

  /// σ_z eigenvalue (±1) of spin slot n in basis state i.
  int spin_value(std::size_t i, int n) const {
    return spin_config_value(spin_index(i), n);
  }

  int spin_config_value(std::size_t alpha, int n) const {
    const auto bit = static_cast<std::size_t>(n_spins_ - 1 - n);
    return ((alpha >> bit) & 1U) ? -1 : 1;
  }

  /// Index of the state with spin slot n flipped.
  std::size_t flip_spin(std::size_t i, int n) const {
    return i ^ (std::size_t{1} << static_cast<std::size_t>(n_spins_ - 1 - n));
  }

  std::size_t index(std::size_t alpha, const std::vector<int>& occ) const {
    std::size_t i = alpha;
    for (int m = 0; m < n_modes_; ++m) {
      i += mode_stride(m) * static_cast<std::size_t>(occ[static_cast<std::size_t>(m)]);
    }
    return i;
  }

  friend bool operator==(const TruncatedBasis& a, const TruncatedBasis& b) {
    return a.n_spins_ == b.n_spins_ && a.n_modes_ == b.n_modes_ &&
           a.cutoff_ == b.cutoff_;
  }

 private:
  int n_spins_ = 0;
  int n_modes_ = 0;
  int cutoff_ = 0;
  std::size_t dimension_ = 0;
  std::vector<std::size_t> mode_strides_;
};

enum class Structure { kDiagonal, kModeTridiagonal, kSpinFlip, kGeneral };

/// Hermitian operator on a truncated basis, stored sparse.
///
/// Every operator of the model is real; the imaginary part is only populated
/// for σ_y.
class OperatorMatrix {
 public:
  OperatorMatrix() = default;
  OperatorMatrix(SparseMatrix real, Structure structure,
                 SparseMatrix imag = {})
      : real_(std::move(real)), imag_(std::move(imag)), structure_(structure) {
    real_.makeCompressed();
    if (imag_.rows() == 0) imag_.resize(real_.rows(), real_.cols());
    imag_.makeCompressed();
  }

  std::size_t dimension() const { return static_cast<std::size_t>(real_.rows()); }
  Structure structure() const { return structure_; }
  const SparseMatrix& sparse() const { return real_; }
  const SparseMatrix& imag() const { return imag_; }
  bool is_real() const { return imag_.nonZeros() == 0; }

  Matrix dense() const { return Matrix(real_); }

  Vector apply(const Vector& x) const { return real_ * x; }

  ComplexVector apply(const ComplexVector& x) const {
    const Vector re = x.real(), im = x.imag();
    ComplexVector y(x.size());
    y.real() = real_ * re - imag_ * im;
    y.imag() = real_ * im + imag_ * re;
    return y;
  }

  double expectation(const Vector& psi) const { return psi.dot(real_ * psi); }

  /// Largest entrywise deviation from Hermiticity.
  double hermiticity_error() const {
    const SparseMatrix re_t = real_.transpose();
    const SparseMatrix im_t = imag_.transpose();
    double err = 0.0;
    if (real_.nonZeros() > 0) {
      const SparseMatrix d = real_ - re_t;
      for (Eigen::Index k = 0; k < d.outerSize(); ++k) {
        for (SparseMatrix::InnerIterator it(d, k); it; ++it) {
          err = std::max(err, std::abs(it.value()));
        }
      }
    }
    if (imag_.nonZeros() > 0) {
      const SparseMatrix d = imag_ + im_t;
      for (Eigen::Index k = 0; k < d.outerSize(); ++k) {
        for (SparseMatrix::InnerIterator it(d, k); it; ++it) {
          err = std::max(err, std::abs(it.value()));
        }
      }
    }
    return err;
  }

  friend OperatorMatrix operator+(const OperatorMatrix& a,
                                  const OperatorMatrix& b) {
    const Structure s =
        a.structure_ == b.structure_ ? a.structure_ : Structure::kGeneral;
    return OperatorMatrix(a.real_ + b.real_, s, a.imag_ + b.imag_);
  }

  friend OperatorMatrix operator*(double s, const OperatorMatrix& a) {
    return OperatorMatrix(s * a.real_, a.structure_, s * a.imag_);
  }

 private:
  SparseMatrix real_;
  SparseMatrix imag_;
  Structure structure_ = Structure::kGeneral;
};

/// Normalized real state vector over a truncated basis.
class WaveFunction {
 public:
  static constexpr double kNormTolerance = 1e-10;

  WaveFunction() = default;
  WaveFunction(TruncatedBasis basis, Vector coefficients)
      : basis_(std::move(basis)), coefficients_(std::move(coefficients)) {
    if (static_cast<std::size_t>(coefficients_.size()) != basis_.dimension()) {
      throw ConfigError("wavefunction length does not match basis dimension");
    }
    if (std::abs(coefficients_.norm() - 1.0) > kNormTolerance) {
      throw DomainError("wavefunction is not normalized");
    }
  }

  /// Normalizes before construction.
  static WaveFunction normalized(TruncatedBasis basis, Vector coefficients) {
    const double n = coefficients.norm();
    if (!(n > 0.0)) throw DomainError("cannot normalize a zero vector");
    return WaveFunction(std::move(basis), coefficients / n);
  }

  const TruncatedBasis& basis() const { return basis_; }
  const Vector& coefficients() const { return coefficients_; }
  std::size_t dimension() const { return basis_.dimension(); }

 private:
  TruncatedBasis basis_;
  Vector coefficients_;
};

inline TruncatedBasis build_basis(const ModelParams& params,
                                  const Truncation& trunc,
                                  std::size_t cap = kDefaultDimensionCap) {
  params.validate();
  return TruncatedBasis(params.n_spins, params.n_modes, trunc.fock_cutoff, cap);
}

namespace detail {

inline void check_mode(const TruncatedBasis& basis, int m) {
  if (m < 0 || m >= basis.n_modes()) throw ConfigError("mode index out of range");
}

inline void check_spin(const TruncatedBasis& basis, int n) {
  if (n < 0 || n >= basis.n_spins()) throw ConfigError("spin index out of range");
}

inline SparseMatrix from_triplets(std::size_t dim,
                                  const std::vector<Triplet>& triplets) {
  const auto d = static_cast<Eigen::Index>(dim);
  SparseMatrix m(d, d);
  m.setFromTriplets(triplets.begin(), triplets.end());
  return m;
}

/// Emits the ladder-form tridiagonal entries of mode m: value(n) on
/// (n-1 → n) above the diagonal and sign·value(n) below it.
inline std::vector<Triplet> mode_ladder(const TruncatedBasis& basis, int m,
                                        double lower_sign) {
  std::vector<Triplet> t;
  const std::size_t dim = basis.dimension();
  const std::size_t stride = basis.mode_stride(m);
  t.reserve(2 * dim);
  for (std::size_t i = 0; i < dim; ++i) {
    const int n = basis.occupation(i, m);
    if (n == 0) continue;
    const double val = std::sqrt(0.5 * n);
    const auto lo = static_cast<Eigen::Index>(i - stride);
    const auto hi = static_cast<Eigen::Index>(i);
    t.emplace_back(lo, hi, val);
    t.emplace_back(hi, lo, lower_sign * val);
  }
  return t;
}

}  // namespace detail

/// x_m = (a_m + a_m†)/√2.
inline OperatorMatrix build_position(int m, const TruncatedBasis& basis) {
  detail::check_mode(basis, m);
  return OperatorMatrix(
      detail::from_triplets(basis.dimension(), detail::mode_ladder(basis, m, 1.0)),
      Structure::kModeTridiagonal);
}

/// ∂_{x_m} = (a_m - a_m†)/√2, real antisymmetric.
inline OperatorMatrix build_derivative(int m, const TruncatedBasis& basis) {
  detail::check_mode(basis, m);
  return OperatorMatrix(
      detail::from_triplets(basis.dimension(), detail::mode_ladder(basis, m, -1.0)),
      Structure::kModeTridiagonal);
}

enum class SpinAxis { kX, kY, kZ };

/// Lifted Pauli matrix σ_axis acting on spin slot n.
inline OperatorMatrix build_spin(SpinAxis axis, int n, const TruncatedBasis& basis) {
  detail::check_spin(basis, n);
  const std::size_t dim = basis.dimension();
  std::vector<Triplet> t;
  t.reserve(dim);
  switch (axis) {
    case SpinAxis::kZ:
      for (std::size_t i = 0; i < dim; ++i) {
        const auto k = static_cast<Eigen::Index>(i);
        t.emplace_back(k, k, basis.spin_value(i, n));
      }
      return OperatorMatrix(detail::from_triplets(dim, t), Structure::kDiagonal);
    case SpinAxis::kX:
      for (std::size_t i = 0; i < dim; ++i) {
        t.emplace_back(static_cast<Eigen::Index>(i),
                       static_cast<Eigen::Index>(basis.flip_spin(i, n)), 1.0);
      }
      return OperatorMatrix(detail::from_triplets(dim, t), Structure::kSpinFlip);
    case SpinAxis::kY:
      // σ_y = [[0, -i], [i, 0]]: ⟨↑|σ_y|↓⟩ = -i.
      for (std::size_t i = 0; i < dim; ++i) {
        const double val = basis.spin_value(i, n) > 0 ? -1.0 : 1.0;
        t.emplace_back(static_cast<Eigen::Index>(i),
                       static_cast<Eigen::Index>(basis.flip_spin(i, n)), val);
      }
      return OperatorMatrix(SparseMatrix(static_cast<Eigen::Index>(dim),
                                         static_cast<Eigen::Index>(dim)),
                            Structure::kSpinFlip, detail::from_triplets(dim, t));
  }
  throw ConfigError("unknown spin axis");
}

/// H_0 = Σ_m 2(n̂_m + ½) + Σ_{m,n} Λ_{mn} x_m σ_z^n − Σ_n t_n σ_x^n.
inline OperatorMatrix build_h0(const ModelParams& params,
                               const TruncatedBasis& basis) {
  params.validate();
  if (basis.n_spins() != params.n_spins || basis.n_modes() != params.n_modes) {
    throw ConfigError("basis does not match model");
  }
  const std::size_t dim = basis.dimension();
  const int N = params.n_spins;
  const int M = params.n_modes;
  std::vector<Triplet> t;
  t.reserve(dim * static_cast<std::size_t>(1 + 2 * M + N));
  for (std::size_t i = 0; i < dim; ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    double diag = 0.0;
    for (int m = 0; m < M; ++m) diag += 2.0 * basis.occupation(i, m) + 1.0;
    t.emplace_back(ii, ii, diag);
    for (int m = 0; m < M; ++m) {
      const int occ = basis.occupation(i, m);
      if (occ == 0) continue;
      double field = 0.0;
      for (int n = 0; n < N; ++n) field += params.coupling(m, n) * basis.spin_value(i, n);
      if (field == 0.0) continue;
      const double val = field * std::sqrt(0.5 * occ);
      const auto lo = static_cast<Eigen::Index>(i - basis.mode_stride(m));
      t.emplace_back(lo, ii, val);
      t.emplace_back(ii, lo, val);
    }
    for (int n = 0; n < N; ++n) {
      if (params.tunneling(n) == 0.0) continue;
      t.emplace_back(ii, static_cast<Eigen::Index>(basis.flip_spin(i, n)),
                     -params.tunneling(n));
    }
  }
  return OperatorMatrix(detail::from_triplets(dim, t), Structure::kGeneral);
}

/// H(v, j) = H_0 + v·σ_z + j·x. Zero potential components add nothing, so
/// build_h with zero potentials reproduces build_h0 entry for entry.
inline OperatorMatrix build_h(const ModelParams& params, const Potentials& pots,
                              const TruncatedBasis& basis) {
  pots.validate(params);
  OperatorMatrix h = build_h0(params, basis);
  SparseMatrix extra(static_cast<Eigen::Index>(basis.dimension()),
                     static_cast<Eigen::Index>(basis.dimension()));
  bool any = false;
  for (int n = 0; n < params.n_spins; ++n) {
    if (pots.v(n) == 0.0) continue;
    extra += pots.v(n) * build_spin(SpinAxis::kZ, n, basis).sparse();
    any = true;
  }
  for (int m = 0; m < params.n_modes; ++m) {
    if (pots.j(m) == 0.0) continue;
    extra += pots.j(m) * build_position(m, basis).sparse();
    any = true;
  }
  if (!any) return h;
  return OperatorMatrix(SparseMatrix(h.sparse() + extra), Structure::kGeneral);
}

/// Operators of one model on one basis, built once and shared read-only.
struct ModelOperators {
  ModelParams params;
  TruncatedBasis basis;
  OperatorMatrix h0;
  std::vector<OperatorMatrix> sigma_z;
  std::vector<OperatorMatrix> sigma_x;
  std::vector<OperatorMatrix> position;
  std::vector<OperatorMatrix> derivative;

  ModelOperators(ModelParams p, TruncatedBasis b)
      : params(std::move(p)), basis(std::move(b)), h0(build_h0(params, basis)) {
    for (int n = 0; n < params.n_spins; ++n) {
      sigma_z.push_back(build_spin(SpinAxis::kZ, n, basis));
      sigma_x.push_back(build_spin(SpinAxis::kX, n, basis));
    }
    for (int m = 0; m < params.n_modes; ++m) {
      position.push_back(build_position(m, basis));
      derivative.push_back(build_derivative(m, basis));
    }
  }

  ModelOperators(const ModelParams& p, int cutoff,
                 std::size_t cap = kDefaultDimensionCap)
      : ModelOperators(p, build_basis(p, Truncation{cutoff}, cap)) {}

  std::size_t dimension() const { return basis.dimension(); }

  OperatorMatrix hamiltonian(const Potentials& pots) const {
    pots.validate(params);
    SparseMatrix h = h0.sparse();
    bool any = false;
    for (int n = 0; n < params.n_spins; ++n) {
      if (pots.v(n) == 0.0) continue;
      h += pots.v(n) * sigma_z[static_cast<std::size_t>(n)].sparse();
      any = true;
    }
    for (int m = 0; m < params.n_modes; ++m) {
      if (pots.j(m) == 0.0) continue;
      h += pots.j(m) * position[static_cast<std::size_t>(m)].sparse();
      any = true;
    }
    if (!any) return h0;
    return OperatorMatrix(std::move(h), Structure::kGeneral);
  }

  /// Σ_{m,n} Λ_{mn} x_m σ_z^n applied to psi.
  Vector coupling_apply(const Vector& psi) const {
    Vector out = Vector::Zero(psi.size());
    for (int m = 0; m < params.n_modes; ++m) {
      Vector field = Vector::Zero(psi.size());
      for (int n = 0; n < params.n_spins; ++n) {
        const double c = params.coupling(m, n);
        if (c == 0.0) continue;
        field += c * sigma_z[static_cast<std::size_t>(n)].apply(psi);
      }
      out += position[static_cast<std::size_t>(m)].apply(field);
    }
    return out;
  }
};

}  // namespace dickedft
