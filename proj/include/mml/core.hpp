#pragma once

// Shared types, tolerances and error classes.
//
// Index convention used throughout the library: Dirac mode j (0-based here)
// owns the Majorana pair (2j, 2j+1), with c_{2j} = d_j + d_j^+ and
// c_{2j+1} = -i (d_j - d_j^+). With this choice i c_{2j} c_{2j+1} = 2 n_j - 1,
// so the empty mode has Gamma_{2j,2j+1} = -1.

#include <Eigen/Dense>

#include <complex>
#include <cstddef>
#include <stdexcept>
#include <string>

namespace mml {

using Real = double;
using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;

namespace tol {
inline constexpr double antisymmetry = 1e-10;
inline constexpr double generator_antisymmetry = 1e-12;
inline constexpr double physical = 1e-9;
inline constexpr double purity = 1e-8;
inline constexpr double orthogonal = 1e-10;
inline constexpr double overlap_clamp = 1e-12;
}  // namespace tol

/// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid user-facing input (bad configuration, out-of-range parameters).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A numerical precondition or postcondition failed.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Largest absolute entry of any dense expression (0 for empty input).
template <typename Derived>
double max_abs(const Eigen::MatrixBase<Derived>& m) {
  return m.size() == 0 ? 0.0 : static_cast<double>(m.cwiseAbs().maxCoeff());
}

inline double antisymmetry_defect(const Matrix& m) { return max_abs(m + m.transpose()); }

inline void require_square_even(const Matrix& m, const char* what) {
  if (m.rows() != m.cols()) throw NumericalError(std::string(what) + ": matrix is not square");
  if (m.rows() % 2 != 0) throw NumericalError(std::string(what) + ": odd dimension");
}

/// The 2x2 block [[0, 1], [-1, 0]].
inline Eigen::Matrix2d symplectic_unit() {
  Eigen::Matrix2d j;
  j << 0.0, 1.0, -1.0, 0.0;
  return j;
}

}  // namespace mml
