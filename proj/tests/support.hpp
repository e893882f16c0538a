#pragma once

// Bridges between library covariance matrices and the dense reference.

#include "mml/channels.hpp"
#include "mml/fgs.hpp"
#include "mml/kitaev.hpp"
#include "reference.hpp"

#include <vector>

namespace support {

/// Dense Gaussian state with covariance g, built as the product of
/// (1 - l_k i c'_{2k} c'_{2k+1}) / 2 in the canonical frame.
inline ref::CM dense_state(const std::vector<ref::CM>& c, const mml::CovarianceMatrix& g) {
  const auto cf = mml::canonical_form(g);
  const auto dim = c[0].rows();
  ref::CM rho = ref::CM::Identity(dim, dim);
  for (Eigen::Index k = 0; k < cf.lambda.size(); ++k) {
    ref::CM a = ref::CM::Zero(dim, dim), b = ref::CM::Zero(dim, dim);
    for (Eigen::Index j = 0; j < g.dim(); ++j) {
      a += cf.transform(2 * k, j) * c[static_cast<std::size_t>(j)];
      b += cf.transform(2 * k + 1, j) * c[static_cast<std::size_t>(j)];
    }
    rho = rho * (0.5 * (ref::CM::Identity(dim, dim) - cf.lambda(k) * ref::C(0, 1) * a * b));
  }
  return 0.5 * (rho + rho.adjoint());
}

/// Unit vector spanning a pure dense state.
inline Eigen::VectorXcd pure_vector(const ref::CM& rho) {
  Eigen::SelfAdjointEigenSolver<ref::CM> es(rho);
  return es.eigenvectors().col(rho.rows() - 1);
}

/// Dense unitary of a schedule built from exponentials of each segment.
inline ref::CM schedule_unitary(const std::vector<ref::CM>& c, const mml::GeneratorSchedule& s, double t) {
  const auto dim = c[0].rows();
  ref::CM u = ref::CM::Identity(dim, dim);
  double left = t;
  while (left > 0.0) {
    for (const auto& seg : s.segments()) {
      if (left <= 0.0) break;
      const double tau = std::min(left, seg.duration);
      u = ref::propagator(ref::hamiltonian(c, seg.generator.matrix()), tau) * u;
      left -= tau;
    }
    if (!s.is_periodic()) break;
  }
  return u;
}

/// Channel output (1/Nd) sum_j U_j rho U_j^dagger.
inline ref::CM decohere(const std::vector<ref::CM>& c, const mml::PerturbationEnsemble& e, const ref::CM& rho, double t) {
  ref::CM out = ref::CM::Zero(rho.rows(), rho.cols());
  for (const auto& m : e.members) {
    const ref::CM u = schedule_unitary(c, m, t);
    out += u * rho * u.adjoint();
  }
  return out / static_cast<double>(e.members.size());
}

inline double optimal_fidelity(const ref::CM& plus, const ref::CM& minus) {
  return 2.0 / 3.0 + ref::trace_norm(ref::CM(plus - minus)) / 6.0;
}

}  // namespace support
