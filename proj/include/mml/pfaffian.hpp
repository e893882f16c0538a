#pragma once

// Pfaffian of a skew-symmetric matrix by Parlett-Reid tridiagonalization
// with full (symmetric) pivoting.

#include "mml/core.hpp"

#include <cmath>
#include <type_traits>
#include <utility>

namespace mml {

namespace detail {
template <typename T>
double magnitude(const T& x) {
  return std::abs(x);
}
}  // namespace detail

/// Pfaffian of an even-dimensional skew-symmetric matrix (real or complex).
///
/// At every step the largest entry of the trailing block is moved into the
/// (k, k+1) position by a symmetric swap of rows/columns; each swap flips
/// the sign of the Pfaffian. Elimination then proceeds with Gauss
/// transformations that preserve the Pfaffian.
template <typename Derived>
typename Derived::Scalar pfaffian(const Eigen::MatrixBase<Derived>& input) {
  using Scalar = typename Derived::Scalar;
  using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

  if (input.rows() != input.cols()) throw NumericalError("pfaffian: matrix is not square");
  const Eigen::Index n = input.rows();
  if (n % 2 != 0) throw NumericalError("odd-dimensional Pfaffian");
  if (n == 0) return Scalar(1);

  Mat a = input;
  const double scale = std::max(1.0, static_cast<double>(a.cwiseAbs().maxCoeff()));
  const double defect = static_cast<double>((a + a.transpose()).cwiseAbs().maxCoeff());
  if (defect > tol::antisymmetry * scale) throw NumericalError("pfaffian: matrix is not antisymmetric");

  Scalar result(1);
  for (Eigen::Index k = 0; k + 1 < n; k += 2) {
    // Full pivot over the trailing block (upper triangle suffices).
    Eigen::Index pr = k, pc = k + 1;
    double best = -1.0;
    for (Eigen::Index i = k; i < n; ++i)
      for (Eigen::Index j = i + 1; j < n; ++j) {
        const double m = detail::magnitude(a(i, j));
        if (m > best) {
          best = m;
          pr = i;
          pc = j;
        }
      }
    if (best == 0.0) return Scalar(0);

    // Bring pivot row to k and pivot column to k+1.
    if (pr != k) {
      a.row(k).swap(a.row(pr));
      a.col(k).swap(a.col(pr));
      result = -result;
      if (pc == k) pc = pr;
    }
    if (pc != k + 1) {
      a.row(k + 1).swap(a.row(pc));
      a.col(k + 1).swap(a.col(pc));
      result = -result;
    }

    const Scalar pivot = a(k, k + 1);
    result *= pivot;
    if (k + 2 >= n) break;

    // Eliminate entries (k, j>k+1) and (k+1, j>k+1) using the pivot pair.
    const Eigen::Index rest = n - k - 2;
    const auto u = a.row(k).tail(rest).transpose().eval();      // a(k, j)
    const auto v = a.row(k + 1).tail(rest).transpose().eval();  // a(k+1, j)
    // Trailing block update: A' = A + (v u^T - u v^T) / pivot.
    a.bottomRightCorner(rest, rest) += (v * u.transpose() - u * v.transpose()) / pivot;
  }
  return result;
}

}  // namespace mml
