#pragma once

// Recovery fidelities: Gram matrices with phase tracking, optimal and
// Gaussian-restricted fidelities, the explicit Gaussian recovery, thermal
// upper bounds via optimal assignment, Uhlmann bounds, and the singular
// value diagnostic for X = G0 - G1.

#include "mml/channels.hpp"
#include "mml/core.hpp"
#include "mml/fgs.hpp"
#include "mml/kitaev.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace mml {

// ---------------------------------------------------------------------------
// Ensemble evolution

/// Spectral caches for all members of an ensemble.
class EnsembleEvolver {
 public:
  explicit EnsembleEvolver(const PerturbationEnsemble& e) {
    if (e.members.empty()) throw ConfigError("ensemble has no members");
    members_.reserve(e.members.size());
    for (const auto& s : e.members) members_.emplace_back(s);
  }
  std::size_t size() const { return members_.size(); }
  Matrix orthogonal(std::size_t j, double t) const { return members_[j].orthogonal(t); }

 private:
  std::vector<ScheduleEvolver> members_;
};

struct CmPair {
  CovarianceMatrix plus;
  CovarianceMatrix minus;
};

/// Gamma_pm(t) = (1/Nd) sum_j O_j(t) Gamma_pm(0) O_j(t)^T.
inline CmPair ensemble_average_cm(const EnsembleEvolver& ev, const CovarianceMatrix& plus, const CovarianceMatrix& minus,
                                  double t) {
  const Eigen::Index n = plus.dim();
  Matrix gp = Matrix::Zero(n, n);
  Matrix gm = Matrix::Zero(n, n);
  for (std::size_t j = 0; j < ev.size(); ++j) {
    const Matrix o = ev.orthogonal(j, t);
    if (o.rows() != n) throw NumericalError("ensemble_average_cm: dimension mismatch");
    gp.noalias() += o * plus.matrix() * o.transpose();
    gm.noalias() += o * minus.matrix() * o.transpose();
  }
  const double w = 1.0 / static_cast<double>(ev.size());
  gp *= w;
  gm *= w;
  return CmPair{CovarianceMatrix(0.5 * (gp - gp.transpose())), CovarianceMatrix(0.5 * (gm - gm.transpose()))};
}

inline CmPair ensemble_average_cm(const PerturbationEnsemble& e, const EncodedPair& pair, double t) {
  return ensemble_average_cm(EnsembleEvolver(e), pair.gamma_plus, pair.gamma_minus, t);
}

// ---------------------------------------------------------------------------
// Gram matrices

struct GramPair {
  CMatrix g0;
  CMatrix g1;
  double t = 0.0;
};

struct GramOptions {
  double max_step = 0.1;     // accepted prediction error per step, relative to the amplitude
  int max_refinement = 40;   // bisection levels per grid interval
  double zero_floor = 1e-8;  // amplitudes below this cannot be continued
};

/// Tracks [G_tau]_{jk} = <tau| U_j^dagger U_k |tau> along a time grid.
///
/// |tau> are the logical states |0>, |1> of the base chain (mode a is idle and
/// drops out). With annihilator coefficient vectors Q (columns, u^H u = 1/2)
/// of |tau>, the squared amplitude is det(2 (R_j Q)^H (R_k Q)) where R_j is the
/// Heisenberg orthogonal of member j on the chain. The square-root branch is
/// carried along in t (bisecting until the squared amplitude changes by a
/// small ratio per step) after removing the fast common phase
/// exp(i (phi_j - phi_k)), phi_j = integral of the sector-averaged <H_j>.
class GramTracker {
 public:
  GramTracker(const PerturbationEnsemble& e, const ModeSpectrum& chain_frame, GramOptions opt = {})
      : ev_(e), opt_(opt) {
    const Eigen::Index n = chain_frame.transform.rows();
    modes_ = n / 2;
    if (e.members.front().dim() != n + 2) throw NumericalError("gram_matrices: ensemble and chain dimensions differ");
    // Columns: b (sector 0), b^dagger (sector 1), then the other chain modes.
    basis_.resize(n, modes_ + 1);
    const Complex i(0, 1);
    const auto& f = chain_frame.transform;
    basis_.col(0) = 0.5 * (f.row(0).transpose().cast<Complex>() + i * f.row(1).transpose().cast<Complex>());
    basis_.col(1) = basis_.col(0).conjugate();
    for (Eigen::Index k = 1; k < modes_; ++k)
      basis_.col(k + 1) =
          0.5 * (f.row(2 * k).transpose().cast<Complex>() + i * f.row(2 * k + 1).transpose().cast<Complex>());

    // Sector-averaged energies for the demodulation phase.
    Matrix g0 = Matrix::Zero(n, n), g1 = Matrix::Zero(n, n);
    Vector lambda = Vector::Ones(modes_);
    Matrix blocks = canonical_blocks(lambda);
    g0 = f.transpose() * blocks * f;
    blocks(0, 1) = 1.0;
    blocks(1, 0) = -1.0;
    g1 = f.transpose() * blocks * f;
    const Matrix gavg = 0.5 * (g0 + g1);
    seg_energy_.resize(e.members.size());
    chain_gen_.resize(e.members.size());
    for (std::size_t j = 0; j < e.members.size(); ++j) {
      for (const auto& seg : e.members[j].segments()) {
        const Matrix tc = seg.generator.matrix().bottomRightCorner(n, n);
        seg_energy_[j].push_back(0.25 * tc.cwiseProduct(gavg).sum());
        chain_gen_[j].push_back(tc);
      }
    }
    schedules_ = e.members;
  }

  std::size_t members() const { return ev_.size(); }

  /// Runs the tracker over the grid (ascending, starting at 0).
  std::vector<GramPair> run(const std::vector<double>& t_grid) {
    if (t_grid.empty() || t_grid.front() != 0.0) throw ConfigError("gram_matrices: time grid must start at 0");
    std::vector<GramPair> out;
    out.reserve(t_grid.size());
    out.push_back(reset());
    for (std::size_t s = 1; s < t_grid.size(); ++s) out.push_back(step_to(t_grid[s]));
    return out;
  }

  /// Restarts all tracks at t = 0.
  GramPair reset() {
    tracks_.assign(members() * members() * 2, Track{});
    now_ = 0.0;
    const auto ids = all_tracks();
    for (const auto& [id, sm] : sample(0.0, ids)) tracks_[id].dz = 0.5 * sm.dright;
    return emit(0.0);
  }

  /// Advances every track from the current time to t (> current time).
  GramPair step_to(double t) {
    if (tracks_.empty()) reset();
    if (!(t > now_)) throw ConfigError("gram_matrices: time grid must be strictly ascending");
    advance(now_, t, all_tracks(), 0);
    now_ = t;
    return emit(t);
  }

  double now() const { return now_; }

  /// Demodulation phase phi_j(t).
  double phase(std::size_t j, double t) const {
    const auto& segs = schedules_[j].segments();
    const auto& en = seg_energy_[j];
    double acc = 0.0;
    double left = t;
    if (schedules_[j].is_periodic()) {
      double per = 0.0;
      for (std::size_t s = 0; s < segs.size(); ++s) per += en[s] * segs[s].duration;
      const double cycles = std::floor(t / schedules_[j].period());
      acc += cycles * per;
      left = t - cycles * schedules_[j].period();
    }
    for (std::size_t s = 0; s < segs.size() && left > 0.0; ++s) {
      const double tau = std::min(left, segs[s].duration);
      acc += en[s] * tau;
      left -= tau;
    }
    return acc;
  }

 private:
  struct Track {
    Complex z{1.0, 0.0};  // demodulated amplitude at now_
    Complex dz{0.0, 0.0};  // its time derivative from the right
  };

  std::size_t index(std::size_t j, std::size_t k, std::size_t tau) const { return (j * members() + k) * 2 + tau; }

  std::vector<std::size_t> all_tracks() const {
    std::vector<std::size_t> all;
    for (std::size_t j = 0; j < members(); ++j)
      for (std::size_t k = j + 1; k < members(); ++k)
        for (std::size_t tau = 0; tau < 2; ++tau) all.push_back(index(j, k, tau));
    return all;
  }

  // Segment of member j active just before (right = false) or just after t.
  std::size_t active_segment(std::size_t j, double t, bool right) const {
    const auto& sch = schedules_[j];
    const auto& segs = sch.segments();
    double tau = t;
    if (sch.is_periodic()) {
      tau = t - std::floor(t / sch.period()) * sch.period();
      if (!right && tau == 0.0 && t > 0.0) tau = sch.period();
    }
    double end = 0.0;
    for (std::size_t s = 0; s + 1 < segs.size(); ++s) {
      end += segs[s].duration;
      if (right ? tau < end : tau <= end) return s;
    }
    return segs.size() - 1;
  }

  struct Sample {
    Complex d;       // demodulated squared amplitude
    Complex dleft;   // its derivative from the left of t
    Complex dright;  // and from the right
  };

  static CMatrix sector_block(const CMatrix& c, std::size_t tau, Eigen::Index m) {
    // Sector tau keeps column tau of the first two and drops the other.
    CMatrix sub(m, m);
    const auto keep = static_cast<Eigen::Index>(tau);
    sub(0, 0) = c(keep, keep);
    sub.block(0, 1, 1, m - 1) = c.block(keep, 2, 1, m - 1);
    sub.block(1, 0, m - 1, 1) = c.block(2, keep, m - 1, 1);
    sub.bottomRightCorner(m - 1, m - 1) = c.bottomRightCorner(m - 1, m - 1);
    return sub;
  }

  // Squared amplitudes det(S) of the requested tracks at t with their time
  // derivatives det(S) tr(S^{-1} S'), where S' = 2 Y_j^H (T_k - T_j) Y_k
  // follows from Y_j' = T_j Y_j. Both are demodulated.
  std::map<std::size_t, Sample> sample(double t, const std::vector<std::size_t>& tracks) const {
    const std::size_t nd = members();
    std::vector<char> need(nd, 0);
    for (auto id : tracks) {
      need[id / 2 / nd] = 1;
      need[(id / 2) % nd] = 1;
    }
    const Eigen::Index n = basis_.rows();
    std::vector<CMatrix> y(nd), ty_left(nd), ty_right(nd);
    std::vector<std::size_t> seg_left(nd), seg_right(nd);
    for (std::size_t j = 0; j < nd; ++j)
      if (need[j]) {
        const Matrix r = ev_.orthogonal(j, t).bottomRightCorner(n, n);
        y[j] = r.cast<Complex>() * basis_;
        seg_left[j] = active_segment(j, t, false);
        seg_right[j] = active_segment(j, t, true);
        ty_left[j] = chain_gen_[j][seg_left[j]].cast<Complex>() * y[j];
        ty_right[j] = seg_right[j] == seg_left[j] ? ty_left[j]
                                                  : CMatrix(chain_gen_[j][seg_right[j]].cast<Complex>() * y[j]);
      }
    std::map<std::size_t, Sample> out;
    struct PairData {
      CMatrix c, cl, cr;
      bool kink = false;  // a segment boundary of j or k sits at t
    };
    std::map<std::pair<std::size_t, std::size_t>, PairData> cache;
    const Eigen::Index m = modes_;
    for (auto id : tracks) {
      const std::size_t tau = id % 2;
      const std::size_t j = id / 2 / nd;
      const std::size_t k = (id / 2) % nd;
      auto it = cache.find({j, k});
      if (it == cache.end()) {
        PairData pd;
        pd.c = 2.0 * y[j].adjoint() * y[k];
        pd.cl = 2.0 * (y[j].adjoint() * ty_left[k] + ty_left[j].adjoint() * y[k]);
        pd.kink = seg_left[j] != seg_right[j] || seg_left[k] != seg_right[k];
        if (pd.kink) pd.cr = 2.0 * (y[j].adjoint() * ty_right[k] + ty_right[j].adjoint() * y[k]);
        it = cache.emplace(std::make_pair(j, k), std::move(pd)).first;
      }
      const PairData& pd = it->second;
      const Eigen::PartialPivLU<CMatrix> lu(sector_block(pd.c, tau, m));
      const Complex det = lu.determinant();
      const Complex gl = lu.solve(sector_block(pd.cl, tau, m)).trace();
      const Complex gr = pd.kink ? Complex(lu.solve(sector_block(pd.cr, tau, m)).trace()) : gl;
      const double ph = phase(j, t) - phase(k, t);
      const double wl = seg_energy_[j][seg_left[j]] - seg_energy_[k][seg_left[k]];
      const double wr = seg_energy_[j][seg_right[j]] - seg_energy_[k][seg_right[k]];
      const Complex rot = std::exp(Complex(0, -2.0 * ph));
      out[id] = Sample{det * rot, det * (gl - Complex(0, 2.0 * wl)) * rot, det * (gr - Complex(0, 2.0 * wr)) * rot};
    }
    return out;
  }

  // Carries each track's branch of sqrt(d) from ta to tb. A branch is taken
  // only when forward and backward Euler steps built from z' = d'/(2 z) both
  // land within max_step * |z| of it, which holds on straight passes close to
  // zero where d alone shows no sign of the branch change.
  void advance(double ta, double tb, const std::vector<std::size_t>& ids, int depth) {
    if (ids.empty()) return;
    const auto smp = sample(tb, ids);
    const double h = tb - ta;
    std::vector<std::size_t> failed;
    std::vector<std::pair<std::size_t, Track>> accepted;
    for (auto id : ids) {
      const Track& tr = tracks_[id];
      const Sample& sm = smp.at(id);
      const Complex w = std::sqrt(sm.d);
      const double aw = std::abs(w);
      bool ok = false;
      Track next;
      if (aw >= opt_.zero_floor) {
        const Complex wl = sm.dleft / (2.0 * w);
        double err[2];
        for (int s = 0; s < 2; ++s) {
          const double sign = s == 0 ? 1.0 : -1.0;
          err[s] = std::abs(sign * w - (tr.z + h * tr.dz)) + std::abs(tr.z - sign * (w - h * wl));
        }
        const int best = err[0] <= err[1] ? 0 : 1;
        const double sign = best == 0 ? 1.0 : -1.0;
        next = Track{sign * w, sign * sm.dright / (2.0 * w)};
        ok = err[best] <= opt_.max_step * aw ||
             (depth >= opt_.max_refinement && err[best] <= 0.5 * err[1 - best]);
      }
      if (ok) {
        accepted.emplace_back(id, next);
      } else if (depth >= opt_.max_refinement) {
        const std::size_t nd = members();
        std::ostringstream msg;
        msg << "phase tracking lost at (j=" << id / 2 / nd << ", k=" << (id / 2) % nd << ", t=" << tb << ")";
        throw NumericalError(msg.str());
      } else {
        failed.push_back(id);
      }
    }
    for (const auto& [id, tr] : accepted) tracks_[id] = tr;
    if (!failed.empty()) {
      const double mid = 0.5 * (ta + tb);
      advance(ta, mid, failed, depth + 1);
      advance(mid, tb, failed, depth + 1);
    }
  }

  GramPair emit(double t) const {
    const std::size_t nd = members();
    const auto n = static_cast<Eigen::Index>(nd);
    GramPair g{CMatrix::Identity(n, n), CMatrix::Identity(n, n), t};
    for (std::size_t j = 0; j < nd; ++j)
      for (std::size_t k = j + 1; k < nd; ++k) {
        const Complex rot = std::exp(Complex(0, phase(j, t) - phase(k, t)));
        for (std::size_t tau = 0; tau < 2; ++tau) {
          const Complex v = t == 0.0 ? Complex(1.0) : tracks_[index(j, k, tau)].z * rot;
          CMatrix& m = tau == 0 ? g.g0 : g.g1;
          m(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k)) = v;
          m(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j)) = std::conj(v);
        }
      }
    return g;
  }

  EnsembleEvolver ev_;
  GramOptions opt_;
  Eigen::Index modes_ = 0;
  CMatrix basis_;
  std::vector<std::vector<double>> seg_energy_;
  std::vector<GeneratorSchedule> schedules_;
  std::vector<Track> tracks_;
  std::vector<std::vector<Matrix>> chain_gen_;  // per member and segment
  double now_ = 0.0;
};

inline std::vector<GramPair> gram_matrices(const PerturbationEnsemble& e, const ChainParams& base,
                                           const std::vector<double>& t_grid, GramOptions opt = {}) {
  GramTracker tracker(e, diagonalize(build_generator(base)), opt);
  return tracker.run(t_grid);
}

// ---------------------------------------------------------------------------
// Fidelities

struct OptimalFidelityReport {
  double value = 0.0;
  double cross_check = 0.0;  // 2/3 + (1/3) <sqrt(G0/Nd), sqrt(G1/Nd)>_HS-derived value
  double discrepancy = 0.0;
};

namespace detail {

inline CMatrix sqrt_hermitian_psd(const CMatrix& a) {
  Eigen::SelfAdjointEigenSolver<CMatrix> es(0.5 * (a + a.adjoint()));
  const Vector s = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * s.cast<Complex>().asDiagonal() * es.eigenvectors().adjoint();
}

}  // namespace detail

/// F = 2/3 + (1/3) (1/(2 Nd)) || Y^H (I (+) -I) Y ||_tr with M = Y Y^H built
/// from the Gram matrices of the x-encoding.
inline OptimalFidelityReport optimal_fidelity_report(const GramPair& g) {
  const Eigen::Index nd = g.g0.rows();
  if (g.g1.rows() != nd) throw NumericalError("optimal_fidelity: G0 and G1 sizes differ");
  for (const CMatrix* m : {&g.g0, &g.g1}) {
    if (max_abs(CMatrix(*m - m->adjoint())) > 1e-9) throw NumericalError("optimal_fidelity: Gram matrix not Hermitian");
    for (Eigen::Index i = 0; i < nd; ++i)
      if (std::abs((*m)(i, i) - Complex(1.0)) > 1e-9) throw NumericalError("optimal_fidelity: Gram diagonal is not 1");
  }
  CMatrix m(2 * nd, 2 * nd);
  m.topLeftCorner(nd, nd) = 0.5 * (g.g0 + g.g1);
  m.bottomRightCorner(nd, nd) = 0.5 * (g.g0 + g.g1);
  m.topRightCorner(nd, nd) = 0.5 * (g.g0 - g.g1);
  m.bottomLeftCorner(nd, nd) = 0.5 * (g.g0 - g.g1);
  Eigen::SelfAdjointEigenSolver<CMatrix> es(0.5 * (m + m.adjoint()));
  Vector d = es.eigenvalues();
  for (Eigen::Index i = 0; i < d.size(); ++i) {
    if (d(i) < -1e-9) throw NumericalError("Gram matrix not PSD");
    if (d(i) < 0.0) d(i) = 0.0;
  }
  const CMatrix y = es.eigenvectors() * d.cwiseSqrt().cast<Complex>().asDiagonal();
  CMatrix zy = y;
  zy.bottomRows(nd) *= -1.0;
  const CMatrix k = y.adjoint() * zy;
  Eigen::SelfAdjointEigenSolver<CMatrix> ks(0.5 * (k + k.adjoint()), Eigen::EigenvaluesOnly);
  const double tn = ks.eigenvalues().cwiseAbs().sum();

  OptimalFidelityReport r;
  r.value = std::clamp(2.0 / 3.0 + tn / (6.0 * static_cast<double>(nd)), 0.0, 1.0 + 1e-12);

  // Inner-product form: 1/2||rho+ - rho-|| = sqrt(1 - |<sqrt(G0/Nd), sqrt(G1/Nd)>|^2) for
  // commuting square roots; reported, not used.
  const double w = 1.0 / static_cast<double>(nd);
  const CMatrix s0 = detail::sqrt_hermitian_psd(w * g.g0);
  const CMatrix s1 = detail::sqrt_hermitian_psd(w * g.g1);
  const double ip = std::abs((s0.adjoint() * s1).trace());
  r.cross_check = 2.0 / 3.0 + std::sqrt(std::max(0.0, 1.0 - ip * ip)) / 3.0;
  r.discrepancy = std::abs(r.cross_check - r.value);
  return r;
}

inline double optimal_fidelity(const GramPair& g) { return optimal_fidelity_report(g).value; }

/// 2/3 + (1/6) ||Gamma_+ - Gamma_-||_op.
inline double gaussian_fidelity(const CovarianceMatrix& plus, const CovarianceMatrix& minus) {
  if (plus.dim() != minus.dim()) throw NumericalError("gaussian_fidelity: dimension mismatch");
  const Matrix d = plus.matrix() - minus.matrix();
  if (d.size() == 0) return 2.0 / 3.0;
  return 2.0 / 3.0 + Eigen::JacobiSVD<Matrix>(d).singularValues()(0) / 6.0;
}

/// Difference Gamma_+ - Gamma_- in the encoding frame, split into blocks:
/// K' on {m1, m2}, L between the rest and {m1, m2}, K'' on the rest.
struct DeltaBlocks {
  Eigen::Matrix2d k1;
  Matrix l;
  Matrix k2;

  Matrix full() const {
    const Eigen::Index n = l.rows() + 2;
    Matrix d(n, n);
    d.topLeftCorner<2, 2>() = k1;
    d.bottomLeftCorner(n - 2, 2) = l;
    d.topRightCorner(2, n - 2) = -l.transpose();
    d.bottomRightCorner(n - 2, n - 2) = k2;
    return d;
  }
};

inline DeltaBlocks delta_blocks(const CmPair& p, const Matrix& frame) {
  const Matrix d = frame * (p.plus.matrix() - p.minus.matrix()) * frame.transpose();
  const Eigen::Index n = d.rows();
  return DeltaBlocks{d.topLeftCorner<2, 2>(), d.bottomLeftCorner(n - 2, 2), d.bottomRightCorner(n - 2, n - 2)};
}

struct DeltaSet {
  DeltaBlocks x, y, z;
};

struct GaussianRecovery {
  Matrix rotation;  // W = V' (+) U', acting as c -> W c in the encoding frame
  double achieved = 0.0;
};

/// Explicit Gaussian recovery from the SVD L_x = U S V^T: U' = U^T (last row
/// flipped if needed for det +1), V' = (V X)^T with X = [[0,1],[s,0]] and
/// s = -det V. Reading the qubit from the first four Majoranas of the
/// rotated state gives F = 1/2 + (1/12)[(D_x)_{32} + (D_y)_{31} + (D_z)_{12}].
inline GaussianRecovery build_gaussian_recovery(const DeltaSet& d) {
  const Matrix& lx = d.x.l;
  if (lx.cols() != 2 || lx.rows() < 2 || lx.rows() % 2 != 0)
    throw NumericalError("build_gaussian_recovery: L_x must have shape 2(M-1) x 2");
  const Eigen::Index r = lx.rows();
  Eigen::JacobiSVD<Matrix> svd(lx, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Matrix up = svd.matrixU().transpose();
  if (up.determinant() < 0.0) up.row(r - 1) *= -1.0;
  const Eigen::Matrix2d v = svd.matrixV();
  Eigen::Matrix2d x;
  x << 0.0, 1.0, -v.determinant(), 0.0;
  const Eigen::Matrix2d vp = (v * x).transpose();
  GaussianRecovery out;
  out.rotation = Matrix::Zero(r + 2, r + 2);
  out.rotation.topLeftCorner<2, 2>() = vp;
  out.rotation.bottomRightCorner(r, r) = up;
  auto rotated = [&out](const DeltaBlocks& b) { return Matrix(out.rotation * b.full() * out.rotation.transpose()); };
  const Matrix dx = rotated(d.x), dy = rotated(d.y), dz = rotated(d.z);
  out.achieved = 0.5 + (dx(2, 1) + dy(2, 0) + dz(0, 1)) / 12.0;
  return out;
}

// ---------------------------------------------------------------------------
// Assignment and thermal bound

/// Minimum-cost perfect matching (Kuhn-Munkres with potentials, O(n^3)).
/// Returns the assignment row -> column and its total cost.
struct Assignment {
  std::vector<int> column_of_row;
  double cost = 0.0;
};

inline Assignment hungarian(const Matrix& cost) {
  const auto n = static_cast<int>(cost.rows());
  if (cost.cols() != cost.rows()) throw NumericalError("hungarian: cost matrix must be square");
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  std::vector<char> used(n + 1);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j)
        if (!used[j]) {
          const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
          if (cur < minv[j]) {
            minv[j] = cur;
            way[j] = j0;
          }
          if (minv[j] < delta) {
            delta = minv[j];
            j1 = j;
          }
        }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  Assignment a;
  a.column_of_row.assign(static_cast<std::size_t>(n), -1);
  for (int j = 1; j <= n; ++j)
    if (p[j] > 0) a.column_of_row[static_cast<std::size_t>(p[j] - 1)] = j - 1;
  for (int i = 0; i < n; ++i) a.cost += cost(i, a.column_of_row[static_cast<std::size_t>(i)]);
  return a;
}

/// Upper bound on F_opt for mixed encodings: trace distances of member pairs
/// bounded by 2 sqrt(1 - F_U^2), minimized over pairings.
inline double thermal_upper_bound(const EnsembleEvolver& ev, const EncodedPair& pair, double t) {
  const std::size_t nd = ev.size();
  std::vector<CovarianceMatrix> plus, minus;
  plus.reserve(nd);
  minus.reserve(nd);
  for (std::size_t j = 0; j < nd; ++j) {
    const Matrix o = ev.orthogonal(j, t);
    plus.emplace_back(Matrix(o * pair.gamma_plus.matrix() * o.transpose()));
    minus.emplace_back(Matrix(o * pair.gamma_minus.matrix() * o.transpose()));
  }
  const auto n = static_cast<Eigen::Index>(nd);
  Matrix cost(n, n);
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index k = 0; k < n; ++k) {
      const double f = uhlmann_fidelity(plus[static_cast<std::size_t>(j)], minus[static_cast<std::size_t>(k)]);
      cost(j, k) = 2.0 * std::sqrt(std::max(0.0, 1.0 - f * f));
    }
  const Assignment a = hungarian(cost);
  return std::min(1.0, 2.0 / 3.0 + a.cost / (6.0 * static_cast<double>(nd)));
}

inline double thermal_upper_bound(const PerturbationEnsemble& e, const EncodedPair& pair, double t) {
  return thermal_upper_bound(EnsembleEvolver(e), pair, t);
}

struct FidelityBounds {
  double lower = 2.0 / 3.0;
  double upper = 1.0;
};

/// Fuchs-van de Graaf bounds on the optimal fidelity.
inline FidelityBounds lindblad_bounds(const CovarianceMatrix& plus, const CovarianceMatrix& minus) {
  const double f = std::clamp(uhlmann_fidelity(plus, minus), 0.0, 1.0);
  const auto clamp = [](double v) { return std::clamp(v, 2.0 / 3.0, 1.0); };
  return FidelityBounds{clamp(2.0 / 3.0 + (1.0 - f) / 3.0), clamp(2.0 / 3.0 + std::sqrt(1.0 - f * f) / 3.0)};
}

// ---------------------------------------------------------------------------
// Diagnostic for X = G0 - G1

struct ConditionDiagnostic {
  double abs_x = 0.0;
  Vector singular_values;  // ascending; empty when flagged
  bool flagged = false;
  CMatrix matrix;  // 1/2 (Gamma0 + Gamma1) + Upsilon / tr U on the chain
};

/// Normalized operator covariance i Tr[U c_a c_b] / Tr[U] of the Gaussian
/// unitary with Heisenberg orthogonal O: -i (O - 1)(O + 1)^{-1}. Returns false
/// when Tr U is numerically zero (det((1 + O)/2) tiny).
inline bool normalized_operator_cm(const Matrix& o, CMatrix& out) {
  const Eigen::Index n = o.rows();
  const Matrix id = Matrix::Identity(n, n);
  const Matrix plus = id + o;
  const double det = (0.5 * plus).partialPivLu().determinant();
  if (std::abs(det) < 1e-20) return false;
  const Matrix cay = (o - id) * plus.inverse();
  out = Complex(0, -1) * cay.cast<Complex>();
  return true;
}

inline ConditionDiagnostic condition_diagnostic(const PerturbationEnsemble& e, const ChainParams& base, double t,
                                                std::size_t j, std::size_t k, double track_step = 0.05) {
  if (j >= e.members.size() || k >= e.members.size()) throw ConfigError("condition_diagnostic: member index out of range");
  ConditionDiagnostic out;
  const ModeSpectrum frame = diagonalize(build_generator(base));
  const Eigen::Index n = frame.transform.rows();

  PerturbationEnsemble two;
  two.members = {e.members[j], e.members[k]};
  two.descriptor = e.descriptor;
  std::vector<double> grid{0.0};
  if (t > 0.0) {
    const int steps = std::max(1, static_cast<int>(std::ceil(t / track_step)));
    for (int s = 1; s <= steps; ++s) grid.push_back(t * s / steps);
  }
  GramTracker tracker(two, frame);
  const auto gram = tracker.run(grid).back();
  out.abs_x = std::abs(gram.g0(0, 1) - gram.g1(0, 1));

  const Matrix rj = ScheduleEvolver(e.members[j]).orthogonal(t).bottomRightCorner(n, n);
  const Matrix rk = ScheduleEvolver(e.members[k]).orthogonal(t).bottomRightCorner(n, n);
  CMatrix ups;
  if (!normalized_operator_cm(rj.transpose() * rk, ups)) {
    out.flagged = true;
    return out;
  }
  Vector ones = Vector::Ones(n / 2);
  Matrix b0 = canonical_blocks(ones);
  Matrix b1 = b0;
  b1(0, 1) = 1.0;
  b1(1, 0) = -1.0;
  const Matrix gsum = frame.transform.transpose() * (0.5 * (b0 + b1)) * frame.transform;
  out.matrix = gsum.cast<Complex>() + ups;
  Eigen::JacobiSVD<CMatrix> svd(out.matrix);
  out.singular_values = svd.singularValues().reverse();
  return out;
}

}  // namespace mml
