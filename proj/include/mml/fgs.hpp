#pragma once

// Fermionic Gaussian state calculus on covariance matrices.
//
// A state with M Dirac modes is represented by its 2M x 2M real
// antisymmetric covariance matrix Gamma_{ab} = (i/2) Tr[rho [c_a, c_b]].
// A quadratic Hamiltonian H = (i/4) sum_{ab} T_{ab} c_a c_b is represented by
// the real antisymmetric generator T. Under e^{-iHt} the Majoranas evolve as
// c(t) = e^{Tt} c, so Gamma(t) = e^{Tt} Gamma e^{Tt}^T.

#include "mml/core.hpp"
#include "mml/pfaffian.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <span>
#include <utility>
#include <vector>

namespace mml {

/// Real antisymmetric matrix of Majorana second moments.
class CovarianceMatrix {
 public:
  CovarianceMatrix() = default;

  /// Checks antisymmetry only; physicality is checked on demand.
  explicit CovarianceMatrix(Matrix data) : data_(std::move(data)) {
    require_square_even(data_, "CovarianceMatrix");
    if (antisymmetry_defect(data_) > tol::antisymmetry)
      throw NumericalError("CovarianceMatrix: not antisymmetric");
  }

  static CovarianceMatrix zero(Eigen::Index modes) { return CovarianceMatrix(Matrix::Zero(2 * modes, 2 * modes)); }

  /// All modes empty in the computational frame: Gamma_{2j,2j+1} = -1.
  static CovarianceMatrix vacuum(Eigen::Index modes) {
    Matrix g = Matrix::Zero(2 * modes, 2 * modes);
    for (Eigen::Index j = 0; j < modes; ++j) {
      g(2 * j, 2 * j + 1) = -1.0;
      g(2 * j + 1, 2 * j) = 1.0;
    }
    return CovarianceMatrix(std::move(g));
  }

  const Matrix& matrix() const { return data_; }
  Eigen::Index modes() const { return data_.rows() / 2; }
  Eigen::Index dim() const { return data_.rows(); }

  double max_singular_value() const {
    if (dim() == 0) return 0.0;
    return Eigen::JacobiSVD<Matrix>(data_).singularValues()(0);
  }
  bool is_physical(double slack = tol::physical) const { return max_singular_value() <= 1.0 + slack; }
  bool is_pure(double slack = tol::purity) const {
    return max_abs(data_ * data_.transpose() - Matrix::Identity(dim(), dim())) <= slack;
  }

  void require_physical(const char* what) const {
    if (!is_physical()) throw NumericalError(std::string(what) + ": covariance matrix is not physical");
  }

 private:
  Matrix data_;
};

/// Real antisymmetric generator of a quadratic Hamiltonian (units of J).
class QuadraticGenerator {
 public:
  QuadraticGenerator() = default;
  explicit QuadraticGenerator(Matrix data) : data_(std::move(data)) {
    require_square_even(data_, "QuadraticGenerator");
    const double scale = std::max(1.0, max_abs(data_));
    if (antisymmetry_defect(data_) > tol::generator_antisymmetry * scale)
      throw NumericalError("QuadraticGenerator: not antisymmetric");
  }
  static QuadraticGenerator zero(Eigen::Index modes) { return QuadraticGenerator(Matrix::Zero(2 * modes, 2 * modes)); }

  const Matrix& matrix() const { return data_; }
  Eigen::Index modes() const { return data_.rows() / 2; }
  Eigen::Index dim() const { return data_.rows(); }

  /// Embeds this generator after `lead` decoupled Dirac modes.
  QuadraticGenerator embedded(Eigen::Index lead) const {
    Matrix m = Matrix::Zero(dim() + 2 * lead, dim() + 2 * lead);
    m.bottomRightCorner(dim(), dim()) = data_;
    return QuadraticGenerator(std::move(m));
  }

  friend bool operator==(const QuadraticGenerator& a, const QuadraticGenerator& b) { return a.data_ == b.data_; }

 private:
  Matrix data_;
};

/// Block decomposition of a real antisymmetric matrix:
/// basis * A * basis^T = diag(v_k [[0, 1], [-1, 0]]), v_k >= 0 ascending.
/// Rows of `basis` are orthonormal.
struct AntisymmetricDecomposition {
  Matrix basis;
  Vector values;
};

namespace detail {

inline void orient_pair(Matrix& basis, Eigen::Index k, const Matrix& a, Vector& values) {
  const double v = basis.row(2 * k).dot(a * basis.row(2 * k + 1).transpose());
  if (v < 0.0) {
    Eigen::RowVectorXd tmp = basis.row(2 * k);
    basis.row(2 * k) = basis.row(2 * k + 1);
    basis.row(2 * k + 1) = tmp;
  }
  values(k) = std::abs(v);
}

// Decomposes `a` and writes pairs into `basis` (rows) and `values`.
// Eigenvalues of the Hermitian matrix i*a come in pairs +-v; well separated
// pairs are read from complex eigenvectors, the near-zero cluster is
// resolved recursively on its (real) invariant subspace after rescaling.
inline void decompose_antisymmetric(const Matrix& a, Matrix& basis, Vector& values, int depth) {
  const Eigen::Index n = a.rows();
  basis.resize(n, n);
  values.resize(n / 2);
  if (n == 0) return;
  const double norm = max_abs(a);
  if (norm == 0.0 || depth > 8) {
    basis.setIdentity();
    for (Eigen::Index k = 0; k < n / 2; ++k) orient_pair(basis, k, a, values);
    return;
  }

  const CMatrix h = Complex(0.0, 1.0) * a.cast<Complex>();
  Eigen::SelfAdjointEigenSolver<CMatrix> es(h);
  const Vector& ev = es.eigenvalues();
  const double scale = std::abs(ev(0)) > std::abs(ev(n - 1)) ? std::abs(ev(0)) : std::abs(ev(n - 1));
  const double cluster = 1e-6 * scale;

  std::vector<Eigen::Index> zero_cluster;
  Eigen::Index row = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (std::abs(ev(i)) <= cluster) {
      zero_cluster.push_back(i);
      continue;
    }
    if (ev(i) < 0.0) continue;
    // i a v = e v  =>  a x = e y, a y = -e x  for v = (x + i y) / sqrt(2).
    const CVector v = es.eigenvectors().col(i);
    const Vector x = std::sqrt(2.0) * v.real();
    const Vector y = std::sqrt(2.0) * v.imag();
    basis.row(row) = y.transpose();
    basis.row(row + 1) = x.transpose();
    row += 2;
  }

  if (!zero_cluster.empty()) {
    const Eigen::Index k = static_cast<Eigen::Index>(zero_cluster.size());
    Matrix span(n, 2 * k);
    for (Eigen::Index c = 0; c < k; ++c) {
      span.col(2 * c) = es.eigenvectors().col(zero_cluster[c]).real();
      span.col(2 * c + 1) = es.eigenvectors().col(zero_cluster[c]).imag();
    }
    Eigen::JacobiSVD<Matrix> svd(span, Eigen::ComputeThinU);
    const Matrix sub_basis = svd.matrixU().leftCols(k);  // n x k, real orthonormal
    const Matrix sub = sub_basis.transpose() * a * sub_basis;
    const double sub_norm = max_abs(sub);
    Matrix inner;
    Vector inner_values;
    if (sub_norm > 0.0) {
      decompose_antisymmetric(sub / sub_norm, inner, inner_values, depth + 1);
    } else {
      decompose_antisymmetric(sub, inner, inner_values, depth + 1);
    }
    basis.middleRows(row, k) = inner * sub_basis.transpose();
    row += k;
  }

  // Re-orthonormalize (Gram-Schmidt on rows) and recompute values exactly.
  Eigen::HouseholderQR<Matrix> qr(basis.transpose());
  Matrix q = qr.householderQ() * Matrix::Identity(n, n);
  const Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Eigen::Index i = 0; i < n; ++i)
    if (r(i, i) < 0.0) q.col(i) = -q.col(i);
  basis = q.transpose();
  for (Eigen::Index p = 0; p < n / 2; ++p) orient_pair(basis, p, a, values);
}

}  // namespace detail

inline AntisymmetricDecomposition decompose_antisymmetric(const Matrix& a) {
  require_square_even(a, "decompose_antisymmetric");
  AntisymmetricDecomposition out;
  detail::decompose_antisymmetric(a, out.basis, out.values, 0);
  // Sort pairs ascending by value.
  const Eigen::Index m = out.values.size();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(m));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](auto i, auto j) { return out.values(i) < out.values(j); });
  Matrix sorted(out.basis.rows(), out.basis.cols());
  Vector vals(m);
  for (Eigen::Index k = 0; k < m; ++k) {
    sorted.row(2 * k) = out.basis.row(2 * order[k]);
    sorted.row(2 * k + 1) = out.basis.row(2 * order[k] + 1);
    vals(k) = out.values(order[k]);
  }
  out.basis = std::move(sorted);
  out.values = std::move(vals);
  return out;
}

/// Canonical (Williamson) form of a covariance matrix:
/// O Gamma O^T = diag([[0, -l_k], [l_k, 0]]), l sorted descending, det O = +1.
/// Only the last l may be negative (it absorbs the orientation).
struct CanonicalForm {
  Matrix transform;
  Vector lambda;
};

inline CanonicalForm canonical_form(const CovarianceMatrix& gamma) {
  const auto dec = decompose_antisymmetric(gamma.matrix());
  const Eigen::Index m = dec.values.size();
  CanonicalForm out;
  out.transform.resize(gamma.dim(), gamma.dim());
  out.lambda.resize(m);
  // Block v [[0,1],[-1,0]] becomes [[0,-v],[v,0]] after swapping the pair;
  // reversing the order gives descending lambda.
  for (Eigen::Index k = 0; k < m; ++k) {
    const Eigen::Index src = m - 1 - k;
    out.transform.row(2 * k) = dec.basis.row(2 * src + 1);
    out.transform.row(2 * k + 1) = dec.basis.row(2 * src);
    out.lambda(k) = std::min(dec.values(src), 1.0);
  }
  if (m > 0 && out.transform.determinant() < 0.0) {
    const Eigen::Index last = m - 1;
    if (out.lambda(last) == 0.0) {
      out.transform.row(2 * last) *= -1.0;
    } else {
      Eigen::RowVectorXd tmp = out.transform.row(2 * last);
      out.transform.row(2 * last) = out.transform.row(2 * last + 1);
      out.transform.row(2 * last + 1) = tmp;
      out.lambda(last) = -out.lambda(last);
    }
  }
  return out;
}

/// Builds diag([[0, -l], [l, 0]]) for the given lambdas.
inline Matrix canonical_blocks(const Vector& lambda) {
  const Eigen::Index m = lambda.size();
  Matrix b = Matrix::Zero(2 * m, 2 * m);
  for (Eigen::Index k = 0; k < m; ++k) {
    b(2 * k, 2 * k + 1) = -lambda(k);
    b(2 * k + 1, 2 * k) = lambda(k);
  }
  return b;
}

/// Quasiparticle energies (ascending, >= 0) and the orthogonal transform whose
/// rows are the mode Majoranas: transform * T * transform^T = diag(e_k [[0,1],[-1,0]]).
/// A block e [[0,1],[-1,0]] means H contains e (n_k - 1/2).
struct ModeSpectrum {
  Vector energies;
  Matrix transform;
};

inline ModeSpectrum mode_spectrum(const QuadraticGenerator& t) {
  auto dec = decompose_antisymmetric(t.matrix());
  return ModeSpectrum{std::move(dec.values), std::move(dec.basis)};
}

/// i^{-p} Pf(Gamma restricted to the given ordered indices) = Tr[rho c_{a1} ... c_{a2p}].
inline Complex wick_expectation(const CovarianceMatrix& gamma, std::span<const Eigen::Index> indices) {
  const auto n = static_cast<Eigen::Index>(indices.size());
  if (n % 2 != 0) throw NumericalError("wick_expectation: odd number of Majorana operators");
  for (Eigen::Index i = 0; i < n; ++i) {
    if (indices[i] < 0 || indices[i] >= gamma.dim()) throw NumericalError("wick_expectation: index out of range");
    for (Eigen::Index j = i + 1; j < n; ++j)
      if (indices[i] == indices[j]) throw NumericalError("wick_expectation: repeated index");
  }
  Matrix sub(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) sub(i, j) = gamma.matrix()(indices[i], indices[j]);
  const double pf = pfaffian(sub);
  // i^{-p} for p = n/2.
  static const Complex phases[4] = {{1, 0}, {0, -1}, {-1, 0}, {0, 1}};
  return phases[(n / 2) % 4] * pf;
}

/// Tr[rho sigma] = sqrt(det[(1 - Gamma_rho Gamma_sigma) / 2]).
inline double overlap_trace(const CovarianceMatrix& rho, const CovarianceMatrix& sigma) {
  if (rho.dim() != sigma.dim()) throw NumericalError("overlap_trace: dimension mismatch");
  const Eigen::Index n = rho.dim();
  if (n == 0) return 1.0;
  const Matrix m = 0.5 * (Matrix::Identity(n, n) - rho.matrix() * sigma.matrix());
  const double det = m.partialPivLu().determinant();
  if (det < -tol::overlap_clamp) throw NumericalError("overlap_trace: negative determinant (unphysical input)");
  return std::sqrt(std::max(det, 0.0));
}

/// Cached spectral decomposition of a generator for repeated exponentials.
class Evolver {
 public:
  Evolver() = default;
  explicit Evolver(const QuadraticGenerator& t) : spectrum_(mode_spectrum(t)) {}

  Eigen::Index dim() const { return spectrum_.transform.rows(); }
  const ModeSpectrum& spectrum() const { return spectrum_; }

  /// e^{T t}.
  Matrix orthogonal(double t) const {
    const Matrix& o = spectrum_.transform;
    Matrix rotated = o;  // block(t) * O
    for (Eigen::Index k = 0; k < spectrum_.energies.size(); ++k) {
      const double c = std::cos(spectrum_.energies(k) * t);
      const double s = std::sin(spectrum_.energies(k) * t);
      rotated.row(2 * k) = c * o.row(2 * k) + s * o.row(2 * k + 1);
      rotated.row(2 * k + 1) = -s * o.row(2 * k) + c * o.row(2 * k + 1);
    }
    return o.transpose() * rotated;
  }

  CovarianceMatrix evolve(const CovarianceMatrix& gamma, double t) const {
    const Matrix r = orthogonal(t);
    Matrix g = r * gamma.matrix() * r.transpose();
    g = 0.5 * (g - g.transpose());
    return CovarianceMatrix(std::move(g));
  }

 private:
  ModeSpectrum spectrum_;
};

inline CovarianceMatrix evolve_cm(const CovarianceMatrix& gamma, const QuadraticGenerator& t, double time) {
  if (gamma.dim() != t.dim()) throw NumericalError("evolve_cm: dimension mismatch");
  return Evolver(t).evolve(gamma, time);
}

/// Thermal state e^{-beta H}/Z. beta = +inf gives the ground state, with
/// zero-energy modes taken empty.
inline CovarianceMatrix thermal_cm(const QuadraticGenerator& t, double beta) {
  if (!(beta > 0.0)) throw ConfigError("thermal_cm: beta must be positive");
  const auto spec = mode_spectrum(t);
  const Eigen::Index m = spec.energies.size();
  Vector lambda(m);
  for (Eigen::Index k = 0; k < m; ++k)
    lambda(k) = std::isinf(beta) ? 1.0 : std::tanh(0.5 * beta * spec.energies(k));
  // Energy block e [[0,1],[-1,0]] pairs with Gamma block [[0,-l],[l,0]].
  Matrix g = spec.transform.transpose() * canonical_blocks(lambda) * spec.transform;
  g = 0.5 * (g - g.transpose());
  return CovarianceMatrix(std::move(g));
}

namespace detail {

// Normalized Gaussian-operator product: if X, Y are Gaussian operators with
// (possibly complex) covariance matrices gx, gy then XY / Tr[XY] has
// covariance 1 - (1 + i gy)(1 - gx gy)^{-1}(1 + i gx), returned in the
// Gamma convention (Gamma = i * <[c,c]>/2).
inline CMatrix gaussian_product(const CMatrix& gx, const CMatrix& gy) {
  const Eigen::Index n = gx.rows();
  const CMatrix id = CMatrix::Identity(n, n);
  const Complex i(0.0, 1.0);
  // In the Hermitian convention G = -i Gamma: G = 1 - (1 - Gy)(1 + Gx Gy)^{-1}(1 - Gx).
  const CMatrix gxh = -i * gx;
  const CMatrix gyh = -i * gy;
  const CMatrix inner = (id + gxh * gyh).partialPivLu().solve(id - gxh);
  const CMatrix g = id - (id - gyh) * inner;
  return i * g;
}

}  // namespace detail

struct UhlmannResult {
  double fidelity = 0.0;
  bool support_mismatch = false;
};

/// Uhlmann fidelity Tr sqrt(sqrt(rho) sigma sqrt(rho)) of two Gaussian states.
///
/// sqrt(rho) is Gaussian with l' = l / (1 + sqrt(1 - l^2)) in the canonical
/// frame of rho; sqrt(rho) sigma sqrt(rho) = Tr[rho sigma] * X with X a
/// normalized Gaussian state, and Tr sqrt(X) = prod (sqrt((1+n)/2) + sqrt((1-n)/2))
/// over the canonical values n of X.
inline UhlmannResult uhlmann_fidelity_ex(const CovarianceMatrix& rho, const CovarianceMatrix& sigma) {
  if (rho.dim() != sigma.dim()) throw NumericalError("uhlmann_fidelity: dimension mismatch");
  const double overlap = overlap_trace(rho, sigma);
  if (rho.is_pure() || sigma.is_pure()) {
    UhlmannResult r{std::sqrt(overlap), false};
    if (overlap <= tol::overlap_clamp) r.support_mismatch = true;
    return r;
  }
  if (overlap <= 1e-300) return UhlmannResult{0.0, true};

  const auto cf = canonical_form(rho);
  Vector half(cf.lambda.size());
  for (Eigen::Index k = 0; k < half.size(); ++k) {
    const double l = std::clamp(cf.lambda(k), -1.0, 1.0);
    half(k) = l / (1.0 + std::sqrt(std::max(0.0, 1.0 - l * l)));
  }
  const Matrix sqrt_rho = cf.transform.transpose() * canonical_blocks(half) * cf.transform;
  const CMatrix s = sqrt_rho.cast<Complex>();
  const CMatrix sig = sigma.matrix().cast<Complex>();

  const Eigen::Index n = rho.dim();
  const CMatrix id = CMatrix::Identity(n, n);
  const double cond = (id + (Complex(0, -1) * s) * (Complex(0, -1) * sig)).partialPivLu().determinant().real();
  if (std::abs(cond) < 1e-300) return UhlmannResult{0.0, true};

  const CMatrix right = detail::gaussian_product(sig, s);
  const CMatrix both = detail::gaussian_product(s, right);
  Matrix x = both.real();
  x = 0.5 * (x - x.transpose());
  const auto dec = decompose_antisymmetric(x);
  double prod = 1.0;
  for (Eigen::Index k = 0; k < dec.values.size(); ++k) {
    const double nu = std::min(dec.values(k), 1.0);
    prod *= std::sqrt(0.5 * (1.0 + nu)) + std::sqrt(std::max(0.0, 0.5 * (1.0 - nu)));
  }
  UhlmannResult r{std::clamp(std::sqrt(overlap) * prod, 0.0, 1.0), false};
  return r;
}

inline double uhlmann_fidelity(const CovarianceMatrix& rho, const CovarianceMatrix& sigma) {
  return uhlmann_fidelity_ex(rho, sigma).fidelity;
}

/// Expectation value <H> = (1/4) sum T_ab Gamma_ab.
inline double energy_expectation(const QuadraticGenerator& t, const CovarianceMatrix& gamma) {
  return 0.25 * (t.matrix().cwiseProduct(gamma.matrix())).sum();
}

}  // namespace mml
