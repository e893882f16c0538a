#pragma once

// Noise models: piecewise-constant generator schedules, quench and
// square-wave ensembles, and Lindblad particle loss on covariance matrices.

#include "mml/core.hpp"
#include "mml/fgs.hpp"
#include "mml/kitaev.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <string>
#include <vector>

namespace mml {

struct Segment {
  QuadraticGenerator generator;
  double duration = std::numeric_limits<double>::infinity();
};

/// Piecewise-constant schedule. A non-periodic schedule holds its last
/// segment forever; a periodic one repeats its segments with the given period.
class GeneratorSchedule {
 public:
  GeneratorSchedule() = default;

  static GeneratorSchedule constant(QuadraticGenerator g) {
    GeneratorSchedule s;
    s.segments_.push_back(Segment{std::move(g), std::numeric_limits<double>::infinity()});
    return s;
  }

  static GeneratorSchedule periodic(std::vector<Segment> segments) {
    if (segments.empty()) throw ConfigError("GeneratorSchedule: no segments");
    GeneratorSchedule s;
    s.periodic_ = true;
    s.period_ = 0.0;
    for (const auto& seg : segments) {
      if (!(seg.duration > 0.0) || std::isinf(seg.duration))
        throw ConfigError("GeneratorSchedule: periodic segment durations must be positive and finite");
      s.period_ += seg.duration;
    }
    s.segments_ = std::move(segments);
    s.check_dims();
    return s;
  }

  /// Segments in order; the last one lasts forever.
  static GeneratorSchedule sequence(std::vector<Segment> segments) {
    if (segments.empty()) throw ConfigError("GeneratorSchedule: no segments");
    for (std::size_t i = 0; i + 1 < segments.size(); ++i)
      if (!(segments[i].duration > 0.0)) throw ConfigError("GeneratorSchedule: durations must be positive");
    segments.back().duration = std::numeric_limits<double>::infinity();
    GeneratorSchedule s;
    s.segments_ = std::move(segments);
    s.check_dims();
    return s;
  }

  const std::vector<Segment>& segments() const { return segments_; }
  bool is_periodic() const { return periodic_; }
  double period() const { return period_; }
  Eigen::Index dim() const { return segments_.empty() ? 0 : segments_.front().generator.dim(); }

 private:
  void check_dims() const {
    for (const auto& seg : segments_)
      if (seg.generator.dim() != segments_.front().generator.dim())
        throw ConfigError("GeneratorSchedule: segment dimensions differ");
  }

  std::vector<Segment> segments_;
  bool periodic_ = false;
  double period_ = 0.0;
};

/// Evaluates the time-ordered orthogonal O(t) = e^{T_k tau_k} ... e^{T_1 tau_1}
/// of a schedule, with per-segment spectral caches and the period propagator
/// raised to integer powers by repeated squaring.
class ScheduleEvolver {
 public:
  ScheduleEvolver() = default;
  explicit ScheduleEvolver(const GeneratorSchedule& s) : schedule_(s) {
    evolvers_.reserve(s.segments().size());
    for (const auto& seg : s.segments()) evolvers_.emplace_back(seg.generator);
    if (s.is_periodic()) {
      one_period_ = partial(s.period());
    }
  }

  Eigen::Index dim() const { return schedule_.dim(); }

  Matrix orthogonal(double t) const {
    if (t < 0.0) throw NumericalError("schedule_orthogonal: negative time");
    if (!schedule_.is_periodic()) return partial(t);
    const double cycles = std::floor(t / schedule_.period());
    double rem = t - cycles * schedule_.period();
    if (rem < 0.0) rem = 0.0;
    const Matrix head = partial(rem);
    auto n = static_cast<std::uint64_t>(cycles);
    if (n == 0) return head;
    Matrix result = Matrix::Identity(dim(), dim());
    Matrix base = one_period_;
    while (n > 0) {
      if (n & 1U) result = base * result;
      n >>= 1U;
      if (n > 0) base = base * base;
    }
    return head * result;
  }

 private:
  // Product over the segment walk for 0 <= t (within one period if periodic).
  Matrix partial(double t) const {
    Matrix o = Matrix::Identity(dim(), dim());
    double left = t;
    const auto& segs = schedule_.segments();
    for (std::size_t i = 0; i < segs.size() && left > 0.0; ++i) {
      const double tau = std::min(left, segs[i].duration);
      o = evolvers_[i].orthogonal(tau) * o;
      left -= tau;
    }
    return o;
  }

  GeneratorSchedule schedule_;
  std::vector<Evolver> evolvers_;
  Matrix one_period_;
};

inline Matrix schedule_orthogonal(const GeneratorSchedule& s, double t) { return ScheduleEvolver(s).orthogonal(t); }

struct PerturbationEnsemble {
  std::vector<GeneratorSchedule> members;
  std::uint64_t seed = 0;
  std::string descriptor;

  std::size_t size() const { return members.size(); }
  double weight() const { return 1.0 / static_cast<double>(members.size()); }
};

/// Uniform closed grid of n points on [lo, hi].
inline std::vector<double> uniform_grid(double lo, double hi, int n) {
  if (n < 1) throw ConfigError("uniform_grid: need at least one point");
  std::vector<double> g(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) g[static_cast<std::size_t>(i)] = n == 1 ? lo : lo + (hi - lo) * i / (n - 1);
  return g;
}

/// Members H(mu_j) with mu_j on the uniform closed grid [mu_minus, mu_plus];
/// generators act on the total system (mode a decoupled).
inline PerturbationEnsemble quench_ensemble(const ChainParams& p0, double mu_minus, double mu_plus, int nd) {
  if (nd < 1) throw ConfigError("quench_ensemble: Nd must be at least 1");
  if (mu_minus > mu_plus) throw ConfigError("quench_ensemble: mu_minus > mu_plus");
  PerturbationEnsemble e;
  e.descriptor = "quench";
  for (double mu : uniform_grid(mu_minus, mu_plus, nd)) {
    ChainParams p = p0;
    p.mu = mu;
    e.members.push_back(GeneratorSchedule::constant(build_generator(p).embedded(1)));
  }
  return e;
}

/// Counter-based uniform draws: SplitMix64 finalizer applied to a key built
/// from (seed, member, site, stream). Independent of evaluation order.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

inline double counter_uniform(std::uint64_t seed, std::uint64_t member, std::uint64_t site, std::uint64_t stream) {
  std::uint64_t h = splitmix64(seed);
  h = splitmix64(h ^ member);
  h = splitmix64(h ^ (site << 1U) ^ stream);
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

struct DriveSpec {
  int N = 2;
  double J = 1.0;
  double mu_bar = 0.0;
  double delta_bar = 1.0;
  double omega = 1.0;
  double dmu_min = 0.0, dmu_max = 0.0;
  int n_dmu = 1;
  double ddelta_min = 0.0, ddelta_max = 0.0;
  int n_ddelta = 1;
  double disorder_min = 0.0, disorder_max = 0.0;  // equal bounds = no disorder
  int phase_offsets = 1;                          // uniformly spaced start phases per member
  std::uint64_t seed = 0;
};

namespace detail {

// Periodic schedule A (half), B (half), started at phase `offset` in [0, period).
inline GeneratorSchedule square_schedule(const QuadraticGenerator& a, const QuadraticGenerator& b, double half,
                                         double offset) {
  if (a == b) return GeneratorSchedule::constant(a);
  std::vector<Segment> segs;
  const double period = 2.0 * half;
  offset = std::fmod(offset, period);
  if (offset < half) {
    if (half - offset > 0.0) segs.push_back({a, half - offset});
    segs.push_back({b, half});
    if (offset > 0.0) segs.push_back({a, offset});
  } else {
    const double into = offset - half;
    if (half - into > 0.0) segs.push_back({b, half - into});
    segs.push_back({a, half});
    if (into > 0.0) segs.push_back({b, into});
  }
  return GeneratorSchedule::periodic(std::move(segs));
}

}  // namespace detail

/// Square-wave ensemble: alternates H(mu+dmu, D+dD) and H(mu-dmu, D-dD) with
/// half-period 1/(2 omega). Members run over the (dmu, dD) grid, then over
/// start phases. With disorder, site offsets mu'_i (first half) and mu''_i
/// (second half) are drawn once per member.
inline PerturbationEnsemble square_wave_drive(const DriveSpec& d) {
  if (!(d.omega > 0.0)) throw ConfigError("square_wave_drive: omega must be positive");
  if (d.n_dmu < 1 || d.n_ddelta < 1 || d.phase_offsets < 1) throw ConfigError("square_wave_drive: grid sizes must be >= 1");
  const double half = 0.5 / d.omega;
  const bool disorder = d.disorder_max > d.disorder_min;
  PerturbationEnsemble e;
  e.seed = d.seed;
  e.descriptor = "square-wave";
  std::uint64_t member = 0;
  for (double dmu : uniform_grid(d.dmu_min, d.dmu_max, d.n_dmu))
    for (double dd : uniform_grid(d.ddelta_min, d.ddelta_max, d.n_ddelta))
      for (int ph = 0; ph < d.phase_offsets; ++ph, ++member) {
        ChainParams pa{d.N, d.mu_bar + dmu, d.delta_bar + dd, d.J, {}};
        ChainParams pb{d.N, d.mu_bar - dmu, d.delta_bar - dd, d.J, {}};
        if (disorder) {
          pa.site_mu.resize(static_cast<std::size_t>(d.N));
          pb.site_mu.resize(static_cast<std::size_t>(d.N));
          const double w = d.disorder_max - d.disorder_min;
          for (int s = 0; s < d.N; ++s) {
            pa.site_mu[static_cast<std::size_t>(s)] = d.disorder_min + w * counter_uniform(d.seed, member, s, 0);
            pb.site_mu[static_cast<std::size_t>(s)] = d.disorder_min + w * counter_uniform(d.seed, member, s, 1);
          }
        }
        const double offset = 2.0 * half * ph / d.phase_offsets;
        e.members.push_back(
            detail::square_schedule(build_generator(pa).embedded(1), build_generator(pb).embedded(1), half, offset));
      }
  return e;
}

/// Swap drive: alternates H(mu_minus) and H(mu_plus) every `dwell`; members
/// differ by their start phase, uniformly spaced over one period.
inline PerturbationEnsemble swap_drive(const ChainParams& p0, double mu_minus, double mu_plus, double dwell, int nd) {
  if (!(dwell > 0.0)) throw ConfigError("swap_drive: dwell time must be positive");
  DriveSpec d;
  d.N = p0.N;
  d.J = p0.J;
  d.mu_bar = 0.5 * (mu_minus + mu_plus);
  d.delta_bar = p0.delta;
  d.omega = 0.5 / dwell;
  d.dmu_min = d.dmu_max = 0.5 * (mu_plus - mu_minus);
  d.phase_offsets = nd;
  auto e = square_wave_drive(d);
  e.descriptor = "swap-drive";
  return e;
}

/// Hamiltonian part plus uniform loss on chain modes lossless_modes .. M-1
/// with jump operators sqrt(rate) d_n.
struct LindbladSpec {
  QuadraticGenerator h0;
  double loss_rate = 0.0;
  Eigen::Index lossless_modes = 0;

  void validate() const {
    if (loss_rate < 0.0) throw ConfigError("LindbladSpec: loss rate must be non-negative");
    if (lossless_modes < 0 || lossless_modes > h0.modes()) throw ConfigError("LindbladSpec: bad lossless mode count");
  }
};

/// Affine flow dGamma/dt = A Gamma + Gamma A^T + B.
///
/// For jumps L_mu = l_mu . c, with M = sum_mu l_mu l_mu^dagger = M_R + i M_I,
/// A = T - 2 M_R and B = 4 M_I. A loss jump sqrt(g) d_n gives per site
/// M_R = (g/4) I and M_I = (g/4) [[0,-1],[1,0]].
struct LindbladFlow {
  Matrix A;
  Matrix B;
};

inline LindbladFlow lindblad_flow(const LindbladSpec& s) {
  s.validate();
  LindbladFlow f{s.h0.matrix(), Matrix::Zero(s.h0.dim(), s.h0.dim())};
  const double g = s.loss_rate;
  for (Eigen::Index n = s.lossless_modes; n < s.h0.modes(); ++n) {
    f.A(2 * n, 2 * n) -= 0.5 * g;
    f.A(2 * n + 1, 2 * n + 1) -= 0.5 * g;
    f.B(2 * n, 2 * n + 1) = -g;
    f.B(2 * n + 1, 2 * n) = g;
  }
  return f;
}

/// Exact step map Gamma -> E Gamma E^T + Q with E = e^{A dt} and
/// Q = int_0^dt e^{A s} B e^{A^T s} ds from a Van Loan block exponential.
struct AffineStep {
  Matrix E;
  Matrix Q;
};

inline AffineStep lindblad_step(const LindbladFlow& f, double dt) {
  const Eigen::Index n = f.A.rows();
  Matrix c = Matrix::Zero(2 * n, 2 * n);
  c.topLeftCorner(n, n) = -f.A * dt;
  c.topRightCorner(n, n) = f.B * dt;
  c.bottomRightCorner(n, n) = f.A.transpose() * dt;
  const Matrix ec = c.exp();
  const Matrix f3t = ec.bottomRightCorner(n, n).transpose();
  Matrix q = f3t * ec.topRightCorner(n, n);
  q = 0.5 * (q - q.transpose());
  return AffineStep{f3t, q};
}

inline CovarianceMatrix checked_cm(Matrix g, const char* what) {
  g = 0.5 * (g - g.transpose());
  if (Eigen::JacobiSVD<Matrix>(g).singularValues()(0) > 1.0 + 1e-6)
    throw NumericalError(std::string(what) + ": integration instability");
  return CovarianceMatrix(std::move(g));
}

/// Gamma(t) at every grid time (ascending, starting at 0). Uniform grids reuse
/// a single step map.
inline std::vector<CovarianceMatrix> lindblad_evolve(const CovarianceMatrix& g0, const LindbladSpec& spec,
                                                     const std::vector<double>& t_grid) {
  if (g0.dim() != spec.h0.dim()) throw NumericalError("lindblad_evolve: dimension mismatch");
  g0.require_physical("lindblad_evolve");
  const LindbladFlow flow = lindblad_flow(spec);
  std::vector<CovarianceMatrix> out;
  out.reserve(t_grid.size());
  Matrix g = g0.matrix();
  double t_prev = 0.0;
  double cached_dt = -1.0;
  AffineStep step;
  for (double t : t_grid) {
    if (t < t_prev) throw NumericalError("lindblad_evolve: time grid must be ascending");
    const double dt = t - t_prev;
    if (dt > 0.0) {
      if (std::abs(dt - cached_dt) > 1e-12 * std::max(1.0, dt)) {
        step = lindblad_step(flow, dt);
        cached_dt = dt;
      }
      g = step.E * g * step.E.transpose() + step.Q;
    }
    out.push_back(checked_cm(g, "lindblad_evolve"));
    g = out.back().matrix();
    t_prev = t;
  }
  return out;
}

/// Solves A X + X A^T = C by Bartels-Stewart on the complex Schur form of A.
inline Matrix solve_lyapunov(const Matrix& a, const Matrix& c) {
  const Eigen::Index n = a.rows();
  Eigen::ComplexSchur<CMatrix> schur(a.cast<Complex>());
  const CMatrix& u = schur.matrixU();
  const CMatrix& s = schur.matrixT();
  // A = U S U^H is real, so A^T = conj(U) S^T U^T and X = U Y U^T turns the
  // equation into S Y + Y S^T = U^H C conj(U).
  const CMatrix rhs = u.adjoint() * c.cast<Complex>() * u.conjugate();
  CMatrix y = CMatrix::Zero(n, n);
  for (Eigen::Index j = n - 1; j >= 0; --j)
    for (Eigen::Index i = n - 1; i >= 0; --i) {
      Complex acc = rhs(i, j);
      for (Eigen::Index k = i + 1; k < n; ++k) acc -= s(i, k) * y(k, j);
      for (Eigen::Index k = j + 1; k < n; ++k) acc -= y(i, k) * s(j, k);
      const Complex denom = s(i, i) + s(j, j);
      if (std::abs(denom) < 1e-14) throw NumericalError("solve_lyapunov: singular Lyapunov operator");
      y(i, j) = acc / denom;
    }
  const CMatrix x = u * y * u.transpose();
  return x.real();
}

inline CovarianceMatrix lindblad_fixed_point(const LindbladSpec& spec) {
  if (!(spec.loss_rate > 0.0)) throw ConfigError("lindblad_fixed_point: loss rate must be positive");
  if (spec.lossless_modes != 0) throw ConfigError("lindblad_fixed_point: all modes must be lossy");
  const LindbladFlow flow = lindblad_flow(spec);
  Matrix x = solve_lyapunov(flow.A, -flow.B);
  x = 0.5 * (x - x.transpose());
  const double residual = max_abs(Matrix(flow.A * x + x * flow.A.transpose() + flow.B));
  if (residual > 1e-10) throw NumericalError("lindblad_fixed_point: Lyapunov residual too large");
  return CovarianceMatrix(std::move(x));
}

}  // namespace mml
