#pragma once

// Dense Fock-space primitives: Jordan-Wigner Majorana matrices, density
// operators, and spectral helpers. Mode 0 is the most significant qubit and
// |1> is the occupied state, so d = |0><1|, c_{2j} = Z..Z X, c_{2j+1} = Z..Z Y.

#include "mml/core.hpp"
#include "mml/fgs.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <vector>

namespace mml::dense {

inline constexpr Eigen::Index max_modes = 12;

inline void require_cap(Eigen::Index modes) {
  if (modes > max_modes) throw ConfigError("dense oracle: mode count exceeds cap of 12");
}

/// Majorana operators c_0 .. c_{2M-1} as dense 2^M x 2^M matrices.
class MajoranaRep {
 public:
  explicit MajoranaRep(Eigen::Index modes) : modes_(modes) {
    require_cap(modes);
    const Eigen::Index dim = Eigen::Index{1} << modes;
    ops_.reserve(static_cast<std::size_t>(2 * modes));
    for (Eigen::Index j = 0; j < modes; ++j) {
      CMatrix x = CMatrix::Zero(dim, dim);
      CMatrix y = CMatrix::Zero(dim, dim);
      const Eigen::Index bit = Eigen::Index{1} << (modes - 1 - j);
      for (Eigen::Index s = 0; s < dim; ++s) {
        // Jordan-Wigner sign from modes before j.
        int parity = 0;
        for (Eigen::Index m = 0; m < j; ++m)
          if (s & (Eigen::Index{1} << (modes - 1 - m))) parity ^= 1;
        const double sign = parity ? -1.0 : 1.0;
        const Eigen::Index flipped = s ^ bit;
        const bool occupied = (s & bit) != 0;
        x(flipped, s) = sign;
        // Y|0> = i|1>, Y|1> = -i|0>.
        y(flipped, s) = sign * (occupied ? Complex(0, -1) : Complex(0, 1));
      }
      ops_.push_back(std::move(x));
      ops_.push_back(std::move(y));
    }
    verify();
  }

  Eigen::Index modes() const { return modes_; }
  Eigen::Index dim() const { return Eigen::Index{1} << modes_; }
  const CMatrix& operator[](Eigen::Index a) const { return ops_[static_cast<std::size_t>(a)]; }

  /// Annihilator d_j = (c_{2j} + i c_{2j+1}) / 2.
  CMatrix annihilator(Eigen::Index j) const { return 0.5 * (ops_[2 * j] + Complex(0, 1) * ops_[2 * j + 1]); }

  /// Linear combination sum_a v_a c_a.
  CMatrix combine(const CVector& v) const {
    CMatrix out = CMatrix::Zero(dim(), dim());
    for (Eigen::Index a = 0; a < v.size(); ++a)
      if (v(a) != Complex(0)) out += v(a) * ops_[a];
    return out;
  }
  CMatrix combine(const Vector& v) const { return combine(CVector(v.cast<Complex>())); }

  /// P = i^M c_0 c_1 ... c_{2M-1}.
  CMatrix parity() const {
    CMatrix p = CMatrix::Identity(dim(), dim());
    for (const auto& c : ops_) p = p * c;
    Complex phase(1, 0);
    for (Eigen::Index k = 0; k < modes_; ++k) phase *= Complex(0, 1);
    return phase * p;
  }

 private:
  void verify() const {
    const CMatrix id = CMatrix::Identity(dim(), dim());
    for (std::size_t a = 0; a < ops_.size(); ++a)
      for (std::size_t b = a; b < ops_.size(); ++b) {
        const CMatrix ac = ops_[a] * ops_[b] + ops_[b] * ops_[a];
        const double err = max_abs(CMatrix(ac - (a == b ? CMatrix(2.0 * id) : CMatrix::Zero(dim(), dim()))));
        if (err > 1e-12) throw NumericalError("MajoranaRep: anticommutation violated");
      }
  }

  Eigen::Index modes_;
  std::vector<CMatrix> ops_;
};

/// Density operator with validated invariants.
class DenseState {
 public:
  DenseState() = default;
  explicit DenseState(CMatrix rho) : rho_(std::move(rho)) {
    if (rho_.rows() != rho_.cols()) throw NumericalError("DenseState: not square");
    if (max_abs(CMatrix(rho_ - rho_.adjoint())) > 1e-10) throw NumericalError("DenseState: not Hermitian");
    if (std::abs(rho_.trace() - Complex(1.0)) > 1e-10) throw NumericalError("DenseState: trace is not 1");
    Eigen::SelfAdjointEigenSolver<CMatrix> es(rho_, Eigen::EigenvaluesOnly);
    if (es.eigenvalues()(0) < -1e-10) throw NumericalError("DenseState: not positive semidefinite");
  }
  static DenseState pure(const CVector& psi) {
    const CVector v = psi / psi.norm();
    return DenseState(v * v.adjoint());
  }
  const CMatrix& matrix() const { return rho_; }
  Eigen::Index dim() const { return rho_.rows(); }

 private:
  CMatrix rho_;
};

/// H = (i/4) sum_ab T_ab c_a c_b.
inline CMatrix hamiltonian(const MajoranaRep& rep, const Matrix& t) {
  CMatrix h = CMatrix::Zero(rep.dim(), rep.dim());
  for (Eigen::Index a = 0; a < t.rows(); ++a)
    for (Eigen::Index b = a + 1; b < t.cols(); ++b)
      if (t(a, b) != 0.0) h += Complex(0, 0.5 * t(a, b)) * (rep[a] * rep[b]);
  return 0.5 * (h + h.adjoint());
}

/// e^{-i H t} for Hermitian H.
inline CMatrix propagator(const CMatrix& h, double t) {
  Eigen::SelfAdjointEigenSolver<CMatrix> es(h);
  CVector phases(h.rows());
  for (Eigen::Index i = 0; i < h.rows(); ++i) phases(i) = std::exp(Complex(0, -es.eigenvalues()(i) * t));
  return es.eigenvectors() * phases.asDiagonal() * es.eigenvectors().adjoint();
}

/// Gamma_ab = i Tr[rho c_a c_b] (a != b).
inline Matrix covariance(const MajoranaRep& rep, const CMatrix& rho) {
  const Eigen::Index n = 2 * rep.modes();
  Matrix g = Matrix::Zero(n, n);
  for (Eigen::Index a = 0; a < n; ++a)
    for (Eigen::Index b = a + 1; b < n; ++b) {
      const Complex v = Complex(0, 1) * (rho * rep[a] * rep[b]).trace();
      g(a, b) = v.real();
      g(b, a) = -v.real();
    }
  return g;
}

/// Dense Gaussian state prod_k (1 - l_k i c'_{2k} c'_{2k+1}) / 2 in the canonical frame of Gamma.
inline CMatrix gaussian_state(const MajoranaRep& rep, const CovarianceMatrix& gamma) {
  const auto cf = canonical_form(gamma);
  CMatrix rho = CMatrix::Identity(rep.dim(), rep.dim());
  for (Eigen::Index k = 0; k < cf.lambda.size(); ++k) {
    const CMatrix c1 = rep.combine(Vector(cf.transform.row(2 * k).transpose()));
    const CMatrix c2 = rep.combine(Vector(cf.transform.row(2 * k + 1).transpose()));
    const CMatrix factor = 0.5 * (CMatrix::Identity(rep.dim(), rep.dim()) - cf.lambda(k) * Complex(0, 1) * (c1 * c2));
    rho = rho * factor;
  }
  return 0.5 * (rho + rho.adjoint());
}

/// Gibbs state e^{-beta H} / Z (beta may be +inf: projector onto the ground space, normalized).
inline CMatrix gibbs_state(const CMatrix& h, double beta) {
  Eigen::SelfAdjointEigenSolver<CMatrix> es(h);
  const Vector& e = es.eigenvalues();
  Vector w(e.size());
  for (Eigen::Index i = 0; i < e.size(); ++i)
    w(i) = std::isinf(beta) ? (e(i) - e(0) < 1e-9 ? 1.0 : 0.0) : std::exp(-beta * (e(i) - e(0)));
  w /= w.sum();
  return es.eigenvectors() * w.cast<Complex>().asDiagonal() * es.eigenvectors().adjoint();
}

/// Matrix square root of a PSD Hermitian matrix.
inline CMatrix sqrt_psd(const CMatrix& a) {
  Eigen::SelfAdjointEigenSolver<CMatrix> es(0.5 * (a + a.adjoint()));
  Vector s = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * s.cast<Complex>().asDiagonal() * es.eigenvectors().adjoint();
}

inline double trace_norm(const CMatrix& a) {
  Eigen::SelfAdjointEigenSolver<CMatrix> es(0.5 * (a + a.adjoint()), Eigen::EigenvaluesOnly);
  return es.eigenvalues().cwiseAbs().sum();
}

inline double operator_norm(const CMatrix& a) {
  Eigen::SelfAdjointEigenSolver<CMatrix> es(0.5 * (a + a.adjoint()), Eigen::EigenvaluesOnly);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

inline double uhlmann_fidelity(const CMatrix& rho, const CMatrix& sigma) {
  const CMatrix s = sqrt_psd(rho);
  const CMatrix inner = s * sigma * s;
  Eigen::SelfAdjointEigenSolver<CMatrix> es(0.5 * (inner + inner.adjoint()), Eigen::EigenvaluesOnly);
  return es.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();
}

/// 2/3 + (1/6) || rho_+ - rho_- ||_tr.
inline double optimal_fidelity(const CMatrix& plus, const CMatrix& minus) {
  return 2.0 / 3.0 + trace_norm(plus - minus) / 6.0;
}

}  // namespace mml::dense
