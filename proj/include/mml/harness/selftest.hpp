#pragma once

// Oracle gates: the Gaussian pipeline against dense Fock-space computations
// on small chains (N <= 4, N_d <= 3).

#include "mml/channels.hpp"
#include "mml/dense.hpp"
#include "mml/kitaev.hpp"
#include "mml/oracle.hpp"
#include "mml/recovery.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace mml {

struct GateResult {
  std::string name;
  double error = 0.0;
  double tolerance = 0.0;
  bool pass() const { return error <= tolerance; }
};

namespace detail {

inline void gate_unitary(const ChainParams& p, const PerturbationEnsemble& e, const std::vector<double>& times,
                         double& gram_err, double& fopt_err, double& sat_err) {
  const oracle::DenseFrame fr(p);
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> grid{0.0};
  for (int i = 1; i <= 400; ++i) grid.push_back(times.back() * i / 400.0);
  for (double t : times) grid.push_back(t);
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  const auto gram = gram_matrices(e, p, grid);
  const EnsembleEvolver ev(e);
  const Matrix frame = total_frame(diagonalize(build_generator(p)));
  for (double t : times) {
    const auto it = std::find(grid.begin(), grid.end(), t);
    const GramPair& g = gram[static_cast<std::size_t>(it - grid.begin())];
    const GramPair dg = oracle::dense_gram(fr, e, t);
    gram_err = std::max({gram_err, max_abs(CMatrix(g.g0 - dg.g0)), max_abs(CMatrix(g.g1 - dg.g1))});
    const auto outputs = oracle::dense_outputs(fr, e, t);
    fopt_err = std::max(fopt_err, std::abs(optimal_fidelity(g) - oracle::dense_optimal_fidelity(outputs[0][0], outputs[0][1])));

    DeltaSet ds;
    CmPair x;
    const Axis axes[3] = {Axis::x, Axis::y, Axis::z};
    DeltaBlocks* dst[3] = {&ds.x, &ds.y, &ds.z};
    for (int k = 0; k < 3; ++k) {
      const EncodedPair pair = encode_pair(p, axes[k], inf);
      const CmPair cm = ensemble_average_cm(ev, pair.gamma_plus, pair.gamma_minus, t);
      if (k == 0) x = cm;
      *dst[k] = delta_blocks(cm, frame);
    }
    sat_err = std::max(sat_err, std::abs(build_gaussian_recovery(ds).achieved - gaussian_fidelity(x.plus, x.minus)));
  }
}

}  // namespace detail

inline std::vector<GateResult> run_oracle_gates() {
  const double inf = std::numeric_limits<double>::infinity();
  double gram_err = 0.0, fopt_err = 0.0, sat_err = 0.0;
  for (int n : {3, 4}) {
    const ChainParams p{n, 0.0, 1.0, 1.0, {}};
    detail::gate_unitary(p, quench_ensemble(p, 1.0, 1.5, 3), {0.5, 2.0, 5.0}, gram_err, fopt_err, sat_err);
    detail::gate_unitary(p, swap_drive(p, 1.0, 1.5, 0.25, 3), {0.7, 3.0}, gram_err, fopt_err, sat_err);
  }
  {
    const ChainParams p{3, 2.5, 1.0, 1.0, {}};
    detail::gate_unitary(p, quench_ensemble(p, 2.5, 3.0, 2), {1.0, 4.0}, gram_err, fopt_err, sat_err);
  }

  // Lindblad covariance matrices and Uhlmann fidelities.
  double lind_err = 0.0, uhl_err = 0.0;
  {
    const ChainParams p{3, 0.0, 1.0, 1.0, {}};
    const oracle::DenseFrame fr(p);
    const LindbladSpec spec{build_generator(p).embedded(1), 1.0, 1};
    const EncodedPair pair = encode_pair(p, Axis::x, inf);
    const std::vector<double> grid{0.0, 0.5, 1.0, 1.7};
    const auto plus = lindblad_evolve(pair.gamma_plus, spec, grid);
    const auto minus = lindblad_evolve(pair.gamma_minus, spec, grid);
    for (std::size_t i = 1; i < grid.size(); ++i) {
      const auto dp = oracle::dense_lindblad(fr.rep, fr.encoded(Axis::x, 1, inf), spec, grid[i]);
      const auto dm = oracle::dense_lindblad(fr.rep, fr.encoded(Axis::x, -1, inf), spec, grid[i]);
      lind_err = std::max({lind_err, max_abs(Matrix(dense::covariance(fr.rep, dp.matrix()) - plus[i].matrix())),
                           max_abs(Matrix(dense::covariance(fr.rep, dm.matrix()) - minus[i].matrix()))});
      uhl_err = std::max(uhl_err, std::abs(uhlmann_fidelity(plus[i], minus[i]) -
                                           dense::uhlmann_fidelity(dp.matrix(), dm.matrix())));
    }
    // Thermal encodings evolved by different ensemble members.
    const EncodedPair th = encode_pair(p, Axis::z, 1.0);
    const auto e = quench_ensemble(p, 1.0, 1.5, 2);
    for (double t : {0.8, 2.5}) {
      const Matrix o0 = schedule_orthogonal(e.members[0], t);
      const Matrix o1 = schedule_orthogonal(e.members[1], t);
      const CovarianceMatrix a(o0 * th.gamma_plus.matrix() * o0.transpose());
      const CovarianceMatrix b(o1 * th.gamma_minus.matrix() * o1.transpose());
      const CMatrix u0 = oracle::schedule_unitary(fr.rep, e.members[0], t);
      const CMatrix u1 = oracle::schedule_unitary(fr.rep, e.members[1], t);
      const CMatrix ra = u0 * fr.encoded(Axis::z, 1, 1.0) * u0.adjoint();
      const CMatrix rb = u1 * fr.encoded(Axis::z, -1, 1.0) * u1.adjoint();
      uhl_err = std::max(uhl_err, std::abs(uhlmann_fidelity(a, b) - dense::uhlmann_fidelity(ra, rb)));
    }
  }

  // Operator covariance diagnostic.
  double c5_err = 0.0;
  for (int n : {3, 4}) {
    const ChainParams p{n, 0.0, 1.0, 1.0, {}};
    const oracle::DenseFrame fr(p);
    const auto e = quench_ensemble(p, 1.0, 1.5, 3);
    const auto lb = logical_basis(p);
    const Eigen::Index m = 2 * n;
    for (double t : {0.6, 1.3}) {
      const ConditionDiagnostic d = condition_diagnostic(e, p, t, 0, 2);
      if (d.flagged) {
        c5_err = inf;
        continue;
      }
      const CMatrix uj = oracle::schedule_unitary(fr.rep, e.members[0], t);
      const CMatrix uk = oracle::schedule_unitary(fr.rep, e.members[2], t);
      const CMatrix ups = oracle::dense_operator_cm(fr.rep, uj.adjoint() * uk);
      const CMatrix ref = (0.5 * (lb.zero.matrix() + lb.one.matrix())).cast<Complex>() + ups;
      const GramPair dg = oracle::dense_gram(fr, e, t);
      c5_err = std::max({c5_err, max_abs(CMatrix(ref.bottomRightCorner(m, m) - d.matrix)),
                         std::abs(d.abs_x - std::abs(dg.g0(0, 2) - dg.g1(0, 2)))});
    }
  }

  return {
      {"gram matrices vs dense amplitudes", gram_err, 1e-7},
      {"optimal fidelity vs dense trace norm", fopt_err, 1e-7},
      {"gaussian recovery saturates gaussian fidelity", sat_err, 1e-9},
      {"lindblad covariance vs dense master equation", lind_err, 1e-6},
      {"uhlmann fidelity vs dense", uhl_err, 1e-8},
      {"operator covariance diagnostic vs dense", c5_err, 1e-7},
  };
}

}  // namespace mml
