#pragma once

// Dense Fock-space reference computations for the whole pipeline. Total
// system layout as in kitaev.hpp: mode 0 is the idle mode a, modes 1..N the
// chain. Everything here is exponential in N and meant for N <= 11.

#include "mml/channels.hpp"
#include "mml/core.hpp"
#include "mml/dense.hpp"
#include "mml/kitaev.hpp"
#include "mml/recovery.hpp"

#include <unsupported/Eigen/KroneckerProduct>

#include <array>
#include <cmath>
#include <random>
#include <string>
#include <vector>

namespace mml::oracle {

using dense::DenseState;
using dense::MajoranaRep;

inline CMatrix dense_hamiltonian(const QuadraticGenerator& t) {
  const MajoranaRep rep(t.modes());
  return dense::hamiltonian(rep, t.matrix());
}

/// Time-ordered dense propagator of a schedule at time t.
inline CMatrix schedule_unitary(const MajoranaRep& rep, const GeneratorSchedule& s, double t) {
  std::vector<CMatrix> hs;
  for (const auto& seg : s.segments()) hs.push_back(dense::hamiltonian(rep, seg.generator.matrix()));
  CMatrix u = CMatrix::Identity(rep.dim(), rep.dim());
  double left = t;
  if (s.is_periodic()) {
    CMatrix per = CMatrix::Identity(rep.dim(), rep.dim());
    for (std::size_t i = 0; i < hs.size(); ++i) per = dense::propagator(hs[i], s.segments()[i].duration) * per;
    const double cycles = std::floor(t / s.period());
    for (int c = 0; c < static_cast<int>(cycles); ++c) u = per * u;
    left = t - cycles * s.period();
  }
  for (std::size_t i = 0; i < hs.size() && left > 0.0; ++i) {
    const double tau = std::min(left, s.segments()[i].duration);
    u = dense::propagator(hs[i], tau) * u;
    left -= tau;
  }
  return u;
}

/// Frame operators of the total system built from the base chain.
struct DenseFrame {
  MajoranaRep rep;
  CMatrix a, b;
  std::vector<CMatrix> f;             // other chain modes (annihilators)
  std::vector<CMatrix> majorana;      // m1, m2, m3, m4, ... in the frame
  Vector energies;                    // chain energies, first is the zero mode
  CVector zero, one;                  // logical |0>, |1> = a^+ b^+ |0>

  explicit DenseFrame(const ChainParams& p) : rep(p.N + 1) {
    const ModeSpectrum spec = diagonalize(build_generator(p));
    energies = spec.energies;
    const Matrix frame = total_frame(spec);
    for (Eigen::Index r = 0; r < frame.rows(); ++r) majorana.push_back(rep.combine(Vector(frame.row(r).transpose())));
    const Complex i(0, 1);
    a = 0.5 * (majorana[0] + i * majorana[1]);
    b = 0.5 * (majorana[2] + i * majorana[3]);
    for (std::size_t k = 2; 2 * k + 1 < majorana.size(); ++k) f.push_back(0.5 * (majorana[2 * k] + i * majorana[2 * k + 1]));
    // |0>: annihilated by every frame mode.
    CMatrix number = a.adjoint() * a + b.adjoint() * b;
    for (const auto& x : f) number += x.adjoint() * x;
    Eigen::SelfAdjointEigenSolver<CMatrix> es(0.5 * (number + number.adjoint()));
    zero = es.eigenvectors().col(0);
    one = a.adjoint() * b.adjoint() * zero;
  }

  /// Logical Pauli operator on the frame Majoranas.
  CMatrix pauli(Axis axis) const {
    const Complex i(0, 1);
    switch (axis) {
      case Axis::x: return i * majorana[2] * majorana[1];
      case Axis::y: return i * majorana[2] * majorana[0];
      case Axis::z: return i * majorana[0] * majorana[1];
    }
    return {};
  }

  /// Projector on the even sector of {m1..m4}.
  CMatrix even_sector() const {
    const CMatrix id = CMatrix::Identity(rep.dim(), rep.dim());
    return 0.5 * (id - majorana[0] * majorana[1] * majorana[2] * majorana[3]);
  }

  /// Encoded state (1 + s sigma_axis)/2 with other chain modes thermal at beta.
  CMatrix encoded(Axis axis, int sign, double beta) const {
    const CMatrix id = CMatrix::Identity(rep.dim(), rep.dim());
    CMatrix rho = 0.5 * (id + (sign >= 0 ? 1.0 : -1.0) * pauli(axis)) * even_sector();
    for (std::size_t k = 0; k < f.size(); ++k) {
      const double l = std::isinf(beta) ? 1.0 : std::tanh(0.5 * beta * energies(static_cast<Eigen::Index>(k + 1)));
      // (1 - l i m m') / 2 = (1 - l (2n - 1)) / 2
      const CMatrix n = f[k].adjoint() * f[k];
      rho = rho * (0.5 * (id - l * (2.0 * n - id)));
    }
    return 0.5 * (rho + rho.adjoint());
  }

  /// Encoded pure state alpha|0> + beta|1>.
  CMatrix encoded_pure(Complex alpha, Complex beta_) const {
    CVector psi = alpha * zero + beta_ * one;
    psi.normalize();
    return psi * psi.adjoint();
  }
};

/// (1/Nd) sum_j U_j rho U_j^dagger.
inline CMatrix dense_decohere(const MajoranaRep& rep, const PerturbationEnsemble& e, const CMatrix& rho0, double t) {
  CMatrix out = CMatrix::Zero(rho0.rows(), rho0.cols());
  for (const auto& m : e.members) {
    const CMatrix u = schedule_unitary(rep, m, t);
    out += u * rho0 * u.adjoint();
  }
  return out / static_cast<double>(e.members.size());
}

inline double dense_optimal_fidelity(const CMatrix& plus, const CMatrix& minus) {
  return dense::optimal_fidelity(plus, minus);
}

/// Gram matrices from dense amplitudes <tau| U_j^dagger U_k |tau>.
inline GramPair dense_gram(const DenseFrame& fr, const PerturbationEnsemble& e, double t) {
  const auto nd = static_cast<Eigen::Index>(e.members.size());
  std::vector<CVector> s0, s1;
  for (const auto& m : e.members) {
    const CMatrix u = schedule_unitary(fr.rep, m, t);
    s0.push_back(u * fr.zero);
    s1.push_back(u * fr.one);
  }
  GramPair g{CMatrix(nd, nd), CMatrix(nd, nd), t};
  for (Eigen::Index j = 0; j < nd; ++j)
    for (Eigen::Index k = 0; k < nd; ++k) {
      g.g0(j, k) = s0[static_cast<std::size_t>(j)].dot(s0[static_cast<std::size_t>(k)]);
      g.g1(j, k) = s1[static_cast<std::size_t>(j)].dot(s1[static_cast<std::size_t>(k)]);
    }
  return g;
}

/// Optimal recovery built explicitly from the channel outputs.
struct OptimalRecovery {
  std::array<CMatrix, 3> h;  // H_x, H_y, H_z
  CMatrix w;                 // on register (x) Fock space, register is the most significant qubit
  double fidelity = 0.0;
  double unitarity_defect = 0.0;
};

/// Register state tr_Fock[W (1/2 (x) rho) W^dagger].
inline Eigen::Matrix2cd register_state(const CMatrix& w, const CMatrix& rho) {
  const Eigen::Index dim = rho.rows();
  const CMatrix in = Eigen::kroneckerProduct(Eigen::Matrix2cd(0.5 * Eigen::Matrix2cd::Identity()), rho).eval();
  const CMatrix o = w * in * w.adjoint();
  Eigen::Matrix2cd q;
  for (int x = 0; x < 2; ++x)
    for (int y = 0; y < 2; ++y) q(x, y) = o.block(x * dim, y * dim, dim, dim).trace();
  return q;
}

/// Builds the observables H_alpha of the optimal recovery and the unitary W.
///
/// The x-difference of the channel outputs has the form a R + R^dagger a^dagger
/// with R odd in mode a; with the polar decomposition R = P U,
/// H_x = a U + U^dagger a^dagger, H_y = i a U - i U^dagger a^dagger and
/// H_z = a^dagger a - a a^dagger (the logical Z of this encoding). Then
/// W = (1 + sum sigma_alpha H_alpha)/2 acts on a register qubit (x) Fock space
/// and the recovered qubit is read from the register, prepared maximally mixed.
inline OptimalRecovery dense_optimal_recovery(const DenseFrame& fr, const std::array<std::array<CMatrix, 2>, 3>& outputs) {
  const Eigen::Index dim = fr.rep.dim();
  const Eigen::Index half = dim / 2;
  // Mode a is the most significant qubit and chain operators carry Z on it,
  // so R = diag(R_c, -R_c) and a R = -|0><1| (x) R_c.
  const CMatrix delta = outputs[0][0] - outputs[0][1];
  const CMatrix rc = -delta.topRightCorner(half, half);
  CMatrix r = CMatrix::Zero(dim, dim);
  r.topLeftCorner(half, half) = rc;
  r.bottomRightCorner(half, half) = -rc;
  const CMatrix rebuilt = fr.a * r + r.adjoint() * fr.a.adjoint();
  if (max_abs(CMatrix(rebuilt - delta)) > 1e-10) throw NumericalError("dense_optimal_recovery: channel acts on mode a");
  Eigen::JacobiSVD<CMatrix> svd(rc, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const CMatrix uc = svd.matrixU() * svd.matrixV().adjoint();
  CMatrix u = CMatrix::Zero(dim, dim);
  u.topLeftCorner(half, half) = uc;
  u.bottomRightCorner(half, half) = -uc;

  const Complex i(0, 1);
  const CMatrix& a = fr.a;
  OptimalRecovery out;
  out.h[0] = a * u + u.adjoint() * a.adjoint();
  out.h[1] = i * a * u - i * u.adjoint() * a.adjoint();
  out.h[2] = a.adjoint() * a - a * a.adjoint();

  Eigen::Matrix2cd sig[3];
  sig[0] << 0, 1, 1, 0;
  sig[1] << 0, -i, i, 0;
  sig[2] << 1, 0, 0, -1;
  out.w = CMatrix::Identity(2 * dim, 2 * dim);
  for (int k = 0; k < 3; ++k) out.w += Eigen::kroneckerProduct(sig[k], out.h[static_cast<std::size_t>(k)]).eval();
  out.w *= 0.5;
  out.unitarity_defect = max_abs(CMatrix(out.w * out.w.adjoint() - CMatrix::Identity(2 * dim, 2 * dim)));
  if (out.unitarity_defect > 1e-8) throw NumericalError("dense_optimal_recovery: W is not unitary");

  double acc = 0.0;
  for (int k = 0; k < 3; ++k) {
    const auto& pm = outputs[static_cast<std::size_t>(k)];
    acc += (sig[k] * (register_state(out.w, pm[0]) - register_state(out.w, pm[1]))).trace().real();
  }
  out.fidelity = 0.5 + acc / 12.0;
  return out;
}

/// Applies the recovery to a Fock-space state, returning the 2x2 register state.
inline Eigen::Matrix2cd apply_recovery(const OptimalRecovery& r, const CMatrix& rho) { return register_state(r.w, rho); }

/// Channel outputs rho_{alpha,pm}(t) for the three axes.
inline std::array<std::array<CMatrix, 2>, 3> dense_outputs(const DenseFrame& fr, const PerturbationEnsemble& e, double t,
                                                           double beta = std::numeric_limits<double>::infinity()) {
  std::array<std::array<CMatrix, 2>, 3> out;
  const Axis axes[3] = {Axis::x, Axis::y, Axis::z};
  for (int k = 0; k < 3; ++k)
    for (int s = 0; s < 2; ++s)
      out[static_cast<std::size_t>(k)][static_cast<std::size_t>(s)] =
          dense_decohere(fr.rep, e, fr.encoded(axes[k], s == 0 ? 1 : -1, beta), t);
  return out;
}

/// Lindblad right-hand side with jumps sqrt(rate) d_n on lossy modes.
struct DenseLindblad {
  CMatrix h;
  std::vector<CMatrix> jumps;
  CMatrix drift;  // -i H - 1/2 sum L^dagger L

  DenseLindblad(const MajoranaRep& rep, const LindbladSpec& s) {
    s.validate();
    h = dense::hamiltonian(rep, s.h0.matrix());
    drift = Complex(0, -1) * h;
    for (Eigen::Index n = s.lossless_modes; n < s.h0.modes(); ++n) {
      jumps.push_back(std::sqrt(s.loss_rate) * rep.annihilator(n));
      drift -= 0.5 * jumps.back().adjoint() * jumps.back();
    }
  }

  CMatrix rhs(const CMatrix& rho) const {
    CMatrix out = drift * rho + rho * drift.adjoint();
    for (const auto& l : jumps) out += l * rho * l.adjoint();
    return out;
  }
};

/// Dormand-Prince 5(4) integration of the master equation.
inline DenseState dense_lindblad(const MajoranaRep& rep, const CMatrix& rho0, const LindbladSpec& s, double t,
                                 double rtol = 1e-11) {
  const DenseLindblad L(rep, s);
  static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
  static constexpr double a21 = 1.0 / 5;
  static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
  static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                          a65 = -5103.0 / 18656;
  static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784, b6 = 11.0 / 84;
  static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                          e6 = 22.0 / 525, e7 = -1.0 / 40;
  (void)c2, (void)c3, (void)c4, (void)c5;
  CMatrix y = rho0;
  double tc = 0.0;
  double hstep = std::min(0.01, t > 0 ? t : 0.01);
  CMatrix k1 = L.rhs(y);
  while (tc < t) {
    if (tc + hstep > t) hstep = t - tc;
    const CMatrix k2 = L.rhs(y + hstep * a21 * k1);
    const CMatrix k3 = L.rhs(y + hstep * (a31 * k1 + a32 * k2));
    const CMatrix k4 = L.rhs(y + hstep * (a41 * k1 + a42 * k2 + a43 * k3));
    const CMatrix k5 = L.rhs(y + hstep * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
    const CMatrix k6 = L.rhs(y + hstep * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
    const CMatrix y5 = y + hstep * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
    const CMatrix k7 = L.rhs(y5);
    const CMatrix err = hstep * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
    const double en = max_abs(err) / (rtol * std::max(1.0, max_abs(y5)));
    if (en <= 1.0) {
      tc += hstep;
      y = y5;
      k1 = k7;
    }
    const double factor = en == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(en, -0.2), 0.2, 5.0);
    hstep *= factor;
  }
  y = 0.5 * (y + y.adjoint());
  if (std::abs(y.trace() - Complex(1.0)) > 1e-8) throw NumericalError("dense_lindblad: trace drift");
  return DenseState(y);
}

/// Steady state from the null vector of the vectorized Liouvillian.
inline CMatrix dense_lindblad_steady_state(const MajoranaRep& rep, const LindbladSpec& s) {
  const DenseLindblad L(rep, s);
  const Eigen::Index d = rep.dim();
  CMatrix sup(d * d, d * d);
  for (Eigen::Index col = 0; col < d * d; ++col) {
    CMatrix e = CMatrix::Zero(d, d);
    e(col % d, col / d) = 1.0;
    const CMatrix r = L.rhs(e);
    sup.col(col) = Eigen::Map<const CVector>(r.data(), d * d);
  }
  Eigen::JacobiSVD<CMatrix> svd(sup, Eigen::ComputeFullV);
  const CVector v = svd.matrixV().col(d * d - 1);
  CMatrix rho = Eigen::Map<const CMatrix>(v.data(), d, d);
  rho /= rho.trace();
  return 0.5 * (rho + rho.adjoint());
}

/// Dense version of the operator covariance i Tr[U c_a c_b] / Tr[U] for the chain.
inline CMatrix dense_operator_cm(const MajoranaRep& rep, const CMatrix& u) {
  const Eigen::Index n = 2 * rep.modes();
  const Complex tr = u.trace();
  CMatrix out = CMatrix::Zero(n, n);
  for (Eigen::Index a = 0; a < n; ++a)
    for (Eigen::Index b = 0; b < n; ++b)
      if (a != b) out(a, b) = Complex(0, 1) * (u * rep[a] * rep[b]).trace() / tr;
  return out;
}

// ---------------------------------------------------------------------------
// Prior-knowledge experiment

struct PriorKnowledgeReport {
  double epsilon = 0.0;  // ||R(rho_1) - rho_q||_op
  double p = 0.0;        // weight of D2 inside D1
  double lhs = 0.0;      // ||R(rho_2) - rho_q||_tr
  double bound = 0.0;    // 2 sqrt(epsilon / p)
  bool holds = false;
  int n1 = 0, n2 = 0;
};

/// Recovery optimal for D1 (grid of n1 points on I1) applied to D2, whose
/// members are the grid points of D1 lying in I2 (so rho_1 = p rho_2 + (1-p) rho_3
/// holds exactly with p = n2 / n1).
inline PriorKnowledgeReport prior_knowledge_experiment(const ChainParams& base, double i1_lo, double i1_hi, double i2_lo,
                                                       double i2_hi, double t, int n1, Complex alpha, Complex beta) {
  if (!(i1_lo <= i2_lo && i2_hi <= i1_hi && i2_lo <= i2_hi)) throw ConfigError("prior_knowledge: I2 must lie inside I1");
  const DenseFrame fr(base);
  const PerturbationEnsemble d1 = quench_ensemble(base, i1_lo, i1_hi, n1);
  PerturbationEnsemble d2;
  d2.descriptor = "quench-subset";
  const auto grid = uniform_grid(i1_lo, i1_hi, n1);
  for (std::size_t j = 0; j < grid.size(); ++j)
    if (grid[j] >= i2_lo - 1e-12 && grid[j] <= i2_hi + 1e-12) d2.members.push_back(d1.members[j]);
  if (d2.members.empty()) throw ConfigError("prior_knowledge: no grid point of I1 inside I2");

  const auto outputs = dense_outputs(fr, d1, t);
  const OptimalRecovery rec = dense_optimal_recovery(fr, outputs);

  CVector q(2);
  q << beta, alpha;  // register basis: |0>_reg is sigma_z = +1, i.e. logical |1>
  q.normalize();
  const Eigen::Matrix2cd rho_q = q * q.adjoint();
  const CMatrix in = fr.encoded_pure(alpha, beta);
  const Eigen::Matrix2cd r1 = apply_recovery(rec, dense_decohere(fr.rep, d1, in, t));
  const Eigen::Matrix2cd r2 = apply_recovery(rec, dense_decohere(fr.rep, d2, in, t));

  PriorKnowledgeReport rep;
  rep.n1 = n1;
  rep.n2 = static_cast<int>(d2.members.size());
  rep.p = static_cast<double>(rep.n2) / n1;
  rep.epsilon = dense::operator_norm(CMatrix(r1 - rho_q));
  rep.lhs = dense::trace_norm(CMatrix(r2 - rho_q));
  rep.bound = 2.0 * std::sqrt(rep.epsilon / rep.p);
  rep.holds = rep.lhs <= rep.bound + 1e-12;
  return rep;
}

}  // namespace mml::oracle
