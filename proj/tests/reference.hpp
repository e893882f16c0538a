#pragma once

// Small dense reference used only by the tests. It is built differently from
// mml/dense.hpp on purpose: Majoranas from Kronecker products of Paulis,
// propagators from the matrix exponential, norms from SVDs and Lindblad
// dynamics from the exponential of the Liouvillian superoperator.

#include <Eigen/Dense>
#include <unsupported/Eigen/KroneckerProduct>
#include <unsupported/Eigen/MatrixFunctions>

#include <complex>
#include <random>
#include <vector>

namespace ref {

using C = std::complex<double>;
using CM = Eigen::MatrixXcd;
using RM = Eigen::MatrixXd;

inline CM kron_chain(const std::vector<CM>& factors) {
  CM out = CM::Identity(1, 1);
  for (const auto& f : factors) out = Eigen::kroneckerProduct(out, f).eval();
  return out;
}

/// c_{2j} = Z^{(j)} X_j, c_{2j+1} = Z^{(j)} Y_j with mode 0 leftmost and |1> occupied.
inline std::vector<CM> majoranas(int modes) {
  CM x(2, 2), y(2, 2), z(2, 2), id = CM::Identity(2, 2);
  x << 0, 1, 1, 0;
  y << 0, C(0, -1), C(0, 1), 0;
  z << 1, 0, 0, -1;
  // With |0> = e_0 and |1> = e_1, d = |0><1| = (X + iY)/2 and the parity
  // string uses (-1)^n = Z.
  std::vector<CM> out;
  for (int j = 0; j < modes; ++j)
    for (const CM* p : {&x, &y}) {
      std::vector<CM> f;
      for (int k = 0; k < modes; ++k) f.push_back(k < j ? z : (k == j ? *p : id));
      out.push_back(kron_chain(f));
    }
  return out;
}

inline CM hamiltonian(const std::vector<CM>& c, const RM& t) {
  const auto dim = c[0].rows();
  CM h = CM::Zero(dim, dim);
  for (Eigen::Index a = 0; a < t.rows(); ++a)
    for (Eigen::Index b = 0; b < t.cols(); ++b)
      if (t(a, b) != 0.0) h += C(0, 0.25 * t(a, b)) * c[static_cast<std::size_t>(a)] * c[static_cast<std::size_t>(b)];
  return h;
}

inline CM expm(const CM& a) { return a.exp(); }

inline CM propagator(const CM& h, double t) { return expm(CM(C(0, -t) * h)); }

inline RM covariance(const std::vector<CM>& c, const CM& rho) {
  const auto n = static_cast<Eigen::Index>(c.size());
  RM g = RM::Zero(n, n);
  for (Eigen::Index a = 0; a < n; ++a)
    for (Eigen::Index b = 0; b < n; ++b)
      if (a != b) g(a, b) = (C(0, 1) * (rho * c[static_cast<std::size_t>(a)] * c[static_cast<std::size_t>(b)]).trace()).real();
  return g;
}

/// Normalized exp(-H) for a Hermitian H.
inline CM gibbs(const CM& h) {
  CM r = expm(CM(-h));
  return r / r.trace();
}

inline double trace_norm(const CM& a) { return Eigen::JacobiSVD<CM>(a).singularValues().sum(); }
inline double op_norm(const CM& a) { return Eigen::JacobiSVD<CM>(a).singularValues()(0); }

inline CM psd_sqrt(const CM& a) {
  Eigen::JacobiSVD<CM> svd(a, Eigen::ComputeFullU | Eigen::ComputeFullV);
  return svd.matrixU() * svd.singularValues().cwiseSqrt().cast<C>().asDiagonal() * svd.matrixU().adjoint();
}

/// F = || sqrt(rho) sqrt(sigma) ||_1.
inline double fidelity(const CM& rho, const CM& sigma) { return trace_norm(CM(psd_sqrt(rho) * psd_sqrt(sigma))); }

/// Random real antisymmetric matrix with entries in [-scale, scale].
inline RM random_antisymmetric(std::mt19937_64& rng, Eigen::Index n, double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  RM a(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) a(i, j) = u(rng);
  return a - a.transpose();
}

/// Gibbs state of a random quadratic Hamiltonian (a mixed Gaussian state).
inline CM random_gaussian_state(std::mt19937_64& rng, const std::vector<CM>& c, double scale) {
  const RM t = random_antisymmetric(rng, static_cast<Eigen::Index>(c.size()), scale);
  return gibbs(hamiltonian(c, t));
}

/// Time-local Liouvillian superoperator on column-stacked rho.
inline CM liouvillian(const CM& h, const std::vector<CM>& jumps) {
  const auto d = h.rows();
  const CM id = CM::Identity(d, d);
  CM l = Eigen::kroneckerProduct(id, CM(C(0, -1) * h)).eval() + Eigen::kroneckerProduct(CM(C(0, 1) * h.transpose()), id).eval();
  for (const auto& j : jumps) {
    const CM jj = j.adjoint() * j;
    l += Eigen::kroneckerProduct(j.conjugate(), j).eval();
    l -= 0.5 * Eigen::kroneckerProduct(id, jj).eval();
    l -= 0.5 * Eigen::kroneckerProduct(jj.transpose(), id).eval();
  }
  return l;
}

inline CM evolve_lindblad(const CM& liou, const CM& rho, double t) {
  const auto d = rho.rows();
  const Eigen::VectorXcd v = Eigen::Map<const Eigen::VectorXcd>(rho.data(), d * d);
  const Eigen::VectorXcd w = expm(CM(t * liou)) * v;
  return Eigen::Map<const CM>(w.data(), d, d);
}

}  // namespace ref
