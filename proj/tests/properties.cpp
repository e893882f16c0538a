// Randomized invariants of the Gaussian core. Runs standalone in well under
// two minutes.

#include "mml/harness/curve.hpp"
#include "mml/mml.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>
#include <sstream>

using namespace mml;

namespace {

Matrix random_antisymmetric(std::mt19937_64& rng, Eigen::Index n, double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  Matrix a(n, n);
  for (Eigen::Index i = 0; i < n * n; ++i) a(i) = u(rng);
  return a - a.transpose();
}

/// Random mixed Gaussian state: thermal state of a random generator.
CovarianceMatrix random_state(std::mt19937_64& rng, Eigen::Index modes) {
  std::uniform_real_distribution<double> beta(0.2, 3.0);
  return thermal_cm(QuadraticGenerator(random_antisymmetric(rng, 2 * modes)), beta(rng));
}

CovarianceMatrix random_pure(std::mt19937_64& rng, Eigen::Index modes) {
  return thermal_cm(QuadraticGenerator(random_antisymmetric(rng, 2 * modes)), std::numeric_limits<double>::infinity());
}

}  // namespace

TEST(PfaffianProperty, SquareEqualsDeterminant) {
  std::mt19937_64 rng(20240611);
  std::uniform_int_distribution<int> half(1, 32);
  double worst = 0.0;
  for (int rep = 0; rep < 10000; ++rep) {
    const Eigen::Index n = 2 * half(rng);
    const Matrix a = random_antisymmetric(rng, n);
    const double pf = pfaffian(a);
    // A double LU determinant of an ill-conditioned draw is itself off by
    // more than the tolerance, so the reference runs in extended precision.
    using LongMatrix = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;
    const long double det = LongMatrix(a.cast<long double>()).partialPivLu().determinant();
    const auto rel = static_cast<double>(std::abs(static_cast<long double>(pf) * pf - det) / std::abs(det));
    worst = std::max(worst, rel);
    ASSERT_LE(rel, 1e-10) << "dimension " << n << " repetition " << rep;
  }
  RecordProperty("worst_relative_error", std::to_string(worst));
}

TEST(PfaffianProperty, CongruenceScalesByDeterminant) {
  // Pf(B A B^T) = det(B) Pf(A).
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g;
  for (int rep = 0; rep < 500; ++rep) {
    const Eigen::Index n = 2 + 2 * (rep % 10);
    const Matrix a = random_antisymmetric(rng, n);
    Matrix b(n, n);
    for (Eigen::Index i = 0; i < n * n; ++i) b(i) = g(rng);
    const double lhs = pfaffian(Matrix(b * a * b.transpose()));
    const double rhs = b.determinant() * pfaffian(a);
    ASSERT_LE(std::abs(lhs - rhs), 1e-9 * std::max(1.0, std::abs(rhs)));
  }
}

TEST(OverlapProperty, Symmetric) {
  std::mt19937_64 rng(7);
  for (int rep = 0; rep < 300; ++rep) {
    const Eigen::Index m = 1 + rep % 12;
    const auto a = random_state(rng, m), b = random_state(rng, m);
    const double ab = overlap_trace(a, b), ba = overlap_trace(b, a);
    ASSERT_NEAR(ab, ba, 1e-12 * std::max(1.0, std::abs(ab)));
    ASSERT_GE(ab, -1e-14);
  }
}

TEST(OverlapProperty, PureStatesBoundedByOne) {
  std::mt19937_64 rng(8);
  for (int rep = 0; rep < 200; ++rep) {
    const Eigen::Index m = 1 + rep % 10;
    const auto a = random_pure(rng, m), b = random_pure(rng, m);
    ASSERT_LE(overlap_trace(a, b), 1.0 + 1e-12);
    ASSERT_NEAR(overlap_trace(a, a), 1.0, 1e-10);
  }
}

TEST(UhlmannProperty, SymmetricAndBounded) {
  std::mt19937_64 rng(9);
  for (int rep = 0; rep < 200; ++rep) {
    const Eigen::Index m = 1 + rep % 8;
    const auto a = random_state(rng, m), b = random_state(rng, m);
    const double ab = uhlmann_fidelity(a, b), ba = uhlmann_fidelity(b, a);
    ASSERT_NEAR(ab, ba, 1e-8);
    ASSERT_GE(ab, 0.0);
    ASSERT_LE(ab, 1.0 + 1e-10);
  }
}

TEST(EvolutionProperty, GroupLaw) {
  std::mt19937_64 rng(10);
  std::uniform_real_distribution<double> time(0.0, 20.0);
  for (int rep = 0; rep < 300; ++rep) {
    const Eigen::Index m = 1 + rep % 16;
    const QuadraticGenerator t(random_antisymmetric(rng, 2 * m));
    const Evolver ev(t);
    const double s = time(rng), u = time(rng);
    const Matrix lhs = ev.orthogonal(s + u);
    const Matrix rhs = ev.orthogonal(u) * ev.orthogonal(s);
    ASSERT_LE(max_abs(Matrix(lhs - rhs)), 1e-10);
    const auto g = random_state(rng, m);
    ASSERT_LE(max_abs(Matrix(evolve_cm(evolve_cm(g, t, s), t, u).matrix() - evolve_cm(g, t, s + u).matrix())), 1e-10);
  }
}

TEST(EvolutionProperty, PreservesPhysicalityAndOverlaps) {
  std::mt19937_64 rng(11);
  for (int rep = 0; rep < 200; ++rep) {
    const Eigen::Index m = 1 + rep % 10;
    const QuadraticGenerator t(random_antisymmetric(rng, 2 * m, 2.0));
    const auto a = random_state(rng, m), b = random_state(rng, m);
    const auto at = evolve_cm(a, t, 3.7), bt = evolve_cm(b, t, 3.7);
    ASSERT_TRUE(at.is_physical());
    ASSERT_NEAR(overlap_trace(at, bt), overlap_trace(a, b), 1e-10);
  }
}

TEST(EvolutionProperty, LindbladStaysPhysical) {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> rate(0.0, 2.0);
  for (int rep = 0; rep < 50; ++rep) {
    const Eigen::Index m = 2 + rep % 6;
    const LindbladSpec spec{QuadraticGenerator(random_antisymmetric(rng, 2 * m)), rate(rng), rep % 2};
    const auto out = lindblad_evolve(random_pure(rng, m), spec, {0.0, 0.5, 1.0, 5.0, 20.0});
    for (const auto& g : out) ASSERT_TRUE(g.is_physical());
  }
}

TEST(CovarianceRoundTrip, CanonicalForm) {
  std::mt19937_64 rng(13);
  for (int rep = 0; rep < 300; ++rep) {
    const Eigen::Index m = 1 + rep % 16;
    const auto g = random_state(rng, m);
    const auto cf = canonical_form(g);
    ASSERT_LE(max_abs(Matrix(cf.transform * cf.transform.transpose() - Matrix::Identity(2 * m, 2 * m))), 1e-10);
    const Matrix back = cf.transform.transpose() * canonical_blocks(cf.lambda) * cf.transform;
    ASSERT_LE(max_abs(Matrix(back - g.matrix())), 1e-10);
    for (Eigen::Index k = 0; k + 1 < m; ++k) ASSERT_GE(cf.lambda(k), cf.lambda(k + 1) - 1e-14);
  }
}

TEST(CovarianceRoundTrip, ThermalStateFromModeSpectrum) {
  std::mt19937_64 rng(14);
  for (int rep = 0; rep < 200; ++rep) {
    const Eigen::Index m = 1 + rep % 12;
    const QuadraticGenerator t(random_antisymmetric(rng, 2 * m));
    const auto spec = mode_spectrum(t);
    const Matrix back = spec.transform.transpose() * canonical_blocks(spec.energies) * spec.transform;
    // Energy blocks use the opposite orientation to covariance blocks.
    ASSERT_LE(max_abs(Matrix(back + t.matrix())), 1e-10);
    const auto g = thermal_cm(t, 1.3);
    const auto cf = canonical_form(g);
    std::vector<double> expect;
    for (Eigen::Index k = 0; k < m; ++k) expect.push_back(std::tanh(0.65 * spec.energies(k)));
    std::sort(expect.rbegin(), expect.rend());
    for (Eigen::Index k = 0; k < m; ++k)
      ASSERT_NEAR(std::abs(cf.lambda(k)), expect[static_cast<std::size_t>(k)], 1e-10);
  }
}

TEST(CovarianceRoundTrip, CurveCsv) {
  std::mt19937_64 rng(15);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int rep = 0; rep < 100; ++rep) {
    FidelityCurve c;
    c.N = 2 + rep;
    c.Nd = 1 + rep % 31;
    c.seed = rng();
    c.scenario_id = "p" + std::to_string(rep);
    double t = 0.0;
    for (int i = 0; i < 20; ++i) {
      c.times.push_back(t);
      t += u(rng);
    }
    auto fill = [&]() {
      std::vector<double> v;
      for (int i = 0; i < 20; ++i) v.push_back(2.0 / 3.0 + u(rng) / 3.0);
      return v;
    };
    if (rep % 2 == 0) c.f_opt = fill();
    c.f_gauss = fill();
    if (rep % 3 == 0) c.f_upper = fill();
    std::stringstream ss;
    write_curve_csv(ss, c);
    ASSERT_EQ(read_curve_csv(ss), c);
  }
}
