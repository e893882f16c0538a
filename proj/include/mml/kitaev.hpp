#pragma once

// Kitaev chain generators, spectra and the qubit encoding.
//
// Total system layout: Majoranas 0,1 are m1, m2 (mode a of the idle first
// chain, never evolved); Majoranas 2 .. 2N+1 are the stored chain. In the
// chain's mode frame m3, m4 are the zero-mode pair, so the qubit lives on
// {m1, m2, m3, m4} with a = (m1 + i m2)/2 and b = (m3 + i m4)/2.

#include "mml/core.hpp"
#include "mml/fgs.hpp"

#include <cmath>
#include <optional>
#include <string>
#include <vector>

namespace mml {

struct ChainParams {
  int N = 2;
  double mu = 0.0;
  double delta = 1.0;
  double J = 1.0;
  std::vector<double> site_mu;  // per-site offsets added to mu; empty = none

  void validate() const {
    if (N < 2) throw ConfigError("ChainParams: N must be at least 2");
    if (!(J > 0.0)) throw ConfigError("ChainParams: J must be positive");
    if (!site_mu.empty() && static_cast<int>(site_mu.size()) != N)
      throw ConfigError("ChainParams: site_mu must have N entries");
  }
};

/// Chain generator (2N x 2N).
///
/// Couplings in 0-based Majorana indices, site s:
///   (2s, 2s+1):   -(mu + mu_s)
///   (2s+1, 2s+2): J + |delta|
///   (2s, 2s+3):   |delta| - J
/// In Dirac language this is the chain with hopping J and pairing |delta|,
/// so mu = 0, delta = J leaves c_0 and c_{2N-1} uncoupled.
inline QuadraticGenerator build_generator(const ChainParams& p) {
  p.validate();
  const Eigen::Index n = 2 * p.N;
  Matrix t = Matrix::Zero(n, n);
  auto set = [&t](Eigen::Index a, Eigen::Index b, double v) {
    t(a, b) += v;
    t(b, a) -= v;
  };
  const double d = std::abs(p.delta);
  for (int s = 0; s < p.N; ++s) {
    const double mu_s = p.mu + (p.site_mu.empty() ? 0.0 : p.site_mu[static_cast<std::size_t>(s)]);
    if (mu_s != 0.0) set(2 * s, 2 * s + 1, -mu_s);
    if (s + 1 < p.N) {
      if (p.J + d != 0.0) set(2 * s + 1, 2 * s + 2, p.J + d);
      if (d - p.J != 0.0) set(2 * s, 2 * s + 3, d - p.J);
    }
  }
  return QuadraticGenerator(std::move(t));
}

inline bool is_topological(const ChainParams& p) { return std::abs(p.mu / p.J) < 2.0 && p.delta != 0.0; }

/// Spectrum with the lowest pair phase-fixed: row 0 (m3) has maximal weight
/// on the left half of the chain and its largest entry positive; row 1 (m4)
/// follows from the block orientation, or, when the zero mode is exactly
/// degenerate, also gets its largest entry positive.
inline ModeSpectrum diagonalize(const QuadraticGenerator& t) {
  ModeSpectrum spec = mode_spectrum(t);
  const Eigen::Index n = t.dim();
  if (n < 2) return spec;
  const Eigen::Index half = n / 2;
  const Eigen::RowVectorXd e1 = spec.transform.row(0);
  const Eigen::RowVectorXd e2 = spec.transform.row(1);
  Eigen::Matrix2d s;
  s(0, 0) = e1.head(half).squaredNorm();
  s(1, 1) = e2.head(half).squaredNorm();
  s(0, 1) = s(1, 0) = e1.head(half).dot(e2.head(half));
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(s);
  const Eigen::Vector2d ab = es.eigenvectors().col(1);
  // Rotation within the pair keeps the energy block.
  Eigen::RowVectorXd m3 = ab(0) * e1 + ab(1) * e2;
  Eigen::RowVectorXd m4 = -ab(1) * e1 + ab(0) * e2;
  Eigen::Index idx = 0;
  m3.cwiseAbs().maxCoeff(&idx);
  if (m3(idx) < 0.0) {
    m3 = -m3;
    m4 = -m4;
  }
  const double scale = std::max(1.0, max_abs(t.matrix()));
  if (spec.energies(0) <= 1e-14 * scale) {
    m4.cwiseAbs().maxCoeff(&idx);
    if (m4(idx) < 0.0) m4 = -m4;
  }
  spec.transform.row(0) = m3;
  spec.transform.row(1) = m4;
  return spec;
}

enum class Axis { x, y, z };

inline const char* axis_name(Axis a) {
  switch (a) {
    case Axis::x: return "x";
    case Axis::y: return "y";
    case Axis::z: return "z";
  }
  return "?";
}

inline Axis parse_axis(const std::string& s) {
  if (s == "x") return Axis::x;
  if (s == "y") return Axis::y;
  if (s == "z") return Axis::z;
  throw ConfigError("unknown Bloch axis: " + s);
}

/// Orthogonal frame for the total system: I_2 (+) chain mode transform.
/// Rows: m1, m2, m3, m4, then the remaining chain mode Majoranas.
inline Matrix total_frame(const ModeSpectrum& chain) {
  const Eigen::Index n = chain.transform.rows();
  Matrix f = Matrix::Zero(n + 2, n + 2);
  f(0, 0) = 1.0;
  f(1, 1) = 1.0;
  f.bottomRightCorner(n, n) = chain.transform;
  return f;
}

/// Qubit block (4x4, frame m1..m4) of the pure encoded state Psi_{axis, sign}.
/// Logical Paulis: X = i m3 m2, Y = i m3 m1, Z = i m1 m2; the state has even
/// total parity on the four Majoranas.
inline Eigen::Matrix4d qubit_block(Axis axis, int sign) {
  const double s = sign >= 0 ? 1.0 : -1.0;
  Eigen::Matrix4d g = Eigen::Matrix4d::Zero();
  auto set = [&g](int a, int b, double v) {
    g(a, b) = v;
    g(b, a) = -v;
  };
  switch (axis) {
    case Axis::z:  // <i m1 m2> = s, <i m3 m4> = s
      set(0, 1, s);
      set(2, 3, s);
      break;
    case Axis::x:  // <i m3 m2> = s, <i m1 m4> = -s
      set(2, 1, s);
      set(0, 3, -s);
      break;
    case Axis::y:  // <i m3 m1> = s, <i m2 m4> = s
      set(2, 0, s);
      set(1, 3, s);
      break;
  }
  return g;
}

struct EncodedPair {
  CovarianceMatrix gamma_plus;
  CovarianceMatrix gamma_minus;
  Axis axis = Axis::z;
  double beta = std::numeric_limits<double>::infinity();
};

/// Covariance matrix (total system) with the given qubit block and the other
/// chain modes at lambda = tanh(beta e / 2) in the chain frame.
inline CovarianceMatrix encoded_cm(const ModeSpectrum& chain, const Eigen::Matrix4d& block, double beta) {
  const Eigen::Index m = chain.energies.size();
  Vector lambda(m - 1);
  for (Eigen::Index k = 1; k < m; ++k)
    lambda(k - 1) = std::isinf(beta) ? 1.0 : std::tanh(0.5 * beta * chain.energies(k));
  Matrix g = Matrix::Zero(2 * m + 2, 2 * m + 2);
  g.topLeftCorner<4, 4>() = block;
  g.bottomRightCorner(2 * m - 2, 2 * m - 2) = canonical_blocks(lambda);
  const Matrix f = total_frame(chain);
  Matrix out = f.transpose() * g * f;
  out = 0.5 * (out - out.transpose());
  return CovarianceMatrix(std::move(out));
}

inline EncodedPair encode_pair(const ChainParams& p, Axis axis, double beta) {
  if (!(beta > 0.0)) throw ConfigError("encode_pair: beta must be positive");
  const ModeSpectrum spec = diagonalize(build_generator(p));
  return EncodedPair{encoded_cm(spec, qubit_block(axis, +1), beta), encoded_cm(spec, qubit_block(axis, -1), beta), axis,
                     beta};
}

/// Logical basis states |0> (a, b empty) and |1> = a^+ b^+ |0> at beta = inf.
struct LogicalBasis {
  CovarianceMatrix zero;
  CovarianceMatrix one;
};

inline LogicalBasis logical_basis(const ChainParams& p) {
  const ModeSpectrum spec = diagonalize(build_generator(p));
  const double inf = std::numeric_limits<double>::infinity();
  return LogicalBasis{encoded_cm(spec, qubit_block(Axis::z, -1), inf), encoded_cm(spec, qubit_block(Axis::z, +1), inf)};
}

/// Fraction of the zero-mode weight (m3 and m4) on the outer quarter of the chain at each edge.
inline double edge_weight(const ModeSpectrum& spec, int n_sites) {
  const Eigen::Index edge = std::max<Eigen::Index>(2, 2 * (n_sites / 4));
  double w = 0.0;
  for (int r = 0; r < 2; ++r) {
    const Eigen::RowVectorXd v = spec.transform.row(r);
    w += v.head(edge).squaredNorm() + v.tail(edge).squaredNorm();
  }
  return 0.5 * w;
}

}  // namespace mml
