#include "mml/fgs.hpp"
#include "mml/kitaev.hpp"
#include "mml/pfaffian.hpp"
#include "reference.hpp"

#include <gtest/gtest.h>

#include <array>
#include <cmath>
#include <limits>
#include <random>

using namespace mml;

namespace {

const double inf = std::numeric_limits<double>::infinity();

ChainParams chain(int n, double mu, double delta = 1.0) { return ChainParams{n, mu, delta, 1.0, {}}; }

}  // namespace

// ---------------------------------------------------------------------------
// Pfaffian

TEST(Pfaffian, TwoByTwoIsTheUpperEntry) {
  Matrix a(2, 2);
  a << 0, 2.5, -2.5, 0;
  EXPECT_DOUBLE_EQ(pfaffian(a), 2.5);
}

TEST(Pfaffian, StandardBlocksGiveOne) {
  Vector ones = Vector::Ones(5);
  Matrix b = -canonical_blocks(ones);  // blocks [[0,1],[-1,0]]
  EXPECT_NEAR(pfaffian(b), 1.0, 1e-15);
}

TEST(Pfaffian, SquareMatchesDeterminantOnRandom8x8) {
  std::mt19937_64 rng(11);
  for (int rep = 0; rep < 20; ++rep) {
    const Matrix a = ref::random_antisymmetric(rng, 8);
    const double pf = pfaffian(a);
    const double det = a.determinant();
    EXPECT_NEAR(pf * pf, det, 1e-10 * std::abs(det));
  }
}

TEST(Pfaffian, ComplexSquareMatchesDeterminant) {
  std::mt19937_64 rng(5);
  const Matrix re = ref::random_antisymmetric(rng, 10), im = ref::random_antisymmetric(rng, 10);
  CMatrix a = re.cast<Complex>() + Complex(0, 1) * im.cast<Complex>();
  const Complex pf = pfaffian(a);
  const Complex det = a.determinant();
  EXPECT_LE(std::abs(pf * pf - det), 1e-10 * std::abs(det));
}

TEST(Pfaffian, OddDimensionRejected) {
  Matrix a = Matrix::Zero(3, 3);
  EXPECT_THROW(pfaffian(a), NumericalError);
}

TEST(Pfaffian, AsymmetricInputRejected) {
  Matrix a = Matrix::Zero(4, 4);
  a(0, 1) = 1.0;
  EXPECT_THROW(pfaffian(a), NumericalError);
}

TEST(Pfaffian, SignFollowsRowSwap) {
  std::mt19937_64 rng(3);
  Matrix a = ref::random_antisymmetric(rng, 6);
  Eigen::PermutationMatrix<Eigen::Dynamic> p(6);
  p.setIdentity();
  p.applyTranspositionOnTheRight(1, 4);
  const Matrix b = p.transpose() * a * p;
  EXPECT_NEAR(pfaffian(b), -pfaffian(a), 1e-12);
}

// ---------------------------------------------------------------------------
// Covariance matrices, Wick, overlaps

TEST(CovarianceMatrix, RejectsNonAntisymmetric) {
  Matrix g = Matrix::Zero(4, 4);
  g(0, 1) = 1.0;
  EXPECT_THROW(CovarianceMatrix{g}, NumericalError);
}

TEST(CovarianceMatrix, VacuumIsPureAndPhysical) {
  const auto v = CovarianceMatrix::vacuum(4);
  EXPECT_TRUE(v.is_pure());
  EXPECT_TRUE(v.is_physical());
  EXPECT_FALSE(CovarianceMatrix(Matrix(2.0 * v.matrix())).is_physical());
}

TEST(CovarianceMatrix, VacuumMatchesDenseEmptyState) {
  const auto c = ref::majoranas(3);
  ref::CM rho = ref::CM::Zero(8, 8);
  rho(0, 0) = 1.0;
  EXPECT_LT(max_abs(Matrix(ref::covariance(c, rho) - CovarianceMatrix::vacuum(3).matrix())), 1e-14);
}

TEST(Wick, PairOnVacuumBlock) {
  const auto v = CovarianceMatrix::vacuum(2);
  const std::array<Eigen::Index, 2> idx{0, 1};
  const Complex w = wick_expectation(v, idx);
  EXPECT_NEAR(w.real(), 0.0, 1e-15);
  EXPECT_NEAR(w.imag(), 1.0, 1e-15);  // <c0 c1> = -i Gamma_01 = i
}

TEST(Wick, FourPointOnProductStateFactorizes) {
  const auto v = CovarianceMatrix::vacuum(4);
  const std::array<Eigen::Index, 4> idx{0, 1, 4, 5};
  const std::array<Eigen::Index, 2> p1{0, 1}, p2{4, 5};
  const Complex w = wick_expectation(v, idx);
  const Complex f = wick_expectation(v, p1) * wick_expectation(v, p2);
  EXPECT_LT(std::abs(w - f), 1e-14);
}

TEST(Wick, FourPointMatchesDenseTrace) {
  std::mt19937_64 rng(21);
  const auto c = ref::majoranas(6);
  const ref::CM rho = ref::random_gaussian_state(rng, c, 0.8);
  const CovarianceMatrix g(ref::covariance(c, rho));
  for (const auto& idx : {std::array<Eigen::Index, 4>{0, 3, 5, 10}, std::array<Eigen::Index, 4>{2, 1, 7, 11},
                          std::array<Eigen::Index, 4>{9, 4, 6, 8}}) {
    const ref::CM prod = c[idx[0]] * c[idx[1]] * c[idx[2]] * c[idx[3]];
    const Complex dense = (rho * prod).trace();
    EXPECT_LT(std::abs(wick_expectation(g, idx) - dense), 1e-10);
  }
}

TEST(Wick, RejectsOddAndRepeatedIndices) {
  const auto v = CovarianceMatrix::vacuum(2);
  const std::array<Eigen::Index, 3> odd{0, 1, 2};
  const std::array<Eigen::Index, 2> rep{1, 1};
  EXPECT_THROW(wick_expectation(v, odd), NumericalError);
  EXPECT_THROW(wick_expectation(v, rep), NumericalError);
}

TEST(Overlap, PureSelfOverlapIsOne) {
  const auto g = thermal_cm(build_generator(chain(4, 0.4)), inf);
  EXPECT_NEAR(overlap_trace(g, g), 1.0, 1e-12);
}

TEST(Overlap, OppositePureStatesAreOrthogonal) {
  const auto g = thermal_cm(build_generator(chain(4, 0.4)), inf);
  EXPECT_NEAR(overlap_trace(g, CovarianceMatrix(Matrix(-g.matrix()))), 0.0, 1e-12);
}

TEST(Overlap, RandomPairMatchesDenseTrace) {
  std::mt19937_64 rng(8);
  const auto c = ref::majoranas(6);
  for (int rep = 0; rep < 2; ++rep) {
    const ref::CM a = ref::random_gaussian_state(rng, c, 0.6);
    const ref::CM b = ref::random_gaussian_state(rng, c, 0.6);
    const double dense = (a * b).trace().real();
    const double v = overlap_trace(CovarianceMatrix(ref::covariance(c, a)), CovarianceMatrix(ref::covariance(c, b)));
    EXPECT_NEAR(v, dense, 1e-10);
  }
}

// ---------------------------------------------------------------------------
// Thermal states, evolution, canonical form

TEST(Thermal, InfiniteBetaIsPure) {
  EXPECT_TRUE(thermal_cm(build_generator(chain(6, 0.7, 0.6)), inf).is_pure());
}

TEST(Thermal, ZeroTemperatureLimitAndInfiniteTemperature) {
  const auto t = build_generator(chain(4, 0.3));
  EXPECT_LT(max_abs(thermal_cm(t, 1e-300).matrix()), 1e-12);
  EXPECT_THROW(thermal_cm(t, 0.0), ConfigError);
}

TEST(Thermal, SingleModeMatchesDenseGibbs) {
  const double eps = 1.3, beta = 0.9;
  Matrix t(2, 2);
  t << 0, eps, -eps, 0;
  const auto c = ref::majoranas(1);
  const ref::CM rho = ref::gibbs(ref::CM(beta * ref::hamiltonian(c, t)));
  EXPECT_LT(max_abs(Matrix(thermal_cm(QuadraticGenerator(t), beta).matrix() - ref::covariance(c, rho))), 1e-12);
  EXPECT_NEAR(std::abs(thermal_cm(QuadraticGenerator(t), beta).matrix()(0, 1)), std::tanh(0.5 * beta * eps), 1e-14);
}

TEST(Evolution, ZeroTimeIsIdentity) {
  const auto t = build_generator(chain(5, 0.4));
  const auto g = thermal_cm(build_generator(chain(5, 1.1)), 2.0);
  EXPECT_LT(max_abs(Matrix(evolve_cm(g, t, 0.0).matrix() - g.matrix())), 1e-14);
}

TEST(Evolution, PurityPreserved) {
  const auto t = build_generator(chain(6, 0.4));
  const auto g = thermal_cm(build_generator(chain(6, 1.7)), inf);
  for (double time : {0.3, 4.0, 31.0}) EXPECT_TRUE(evolve_cm(g, t, time).is_pure());
}

TEST(Evolution, ThreeSiteChainMatchesDenseHeisenberg) {
  const auto p = chain(3, 0.45, 0.8);
  const auto t = build_generator(p);
  const auto c = ref::majoranas(3);
  std::mt19937_64 rng(4);
  const ref::CM rho0 = ref::random_gaussian_state(rng, c, 0.9);
  const ref::CM h = ref::hamiltonian(c, t.matrix());
  for (double time : {0.37, 2.9}) {
    const ref::CM u = ref::propagator(h, time);
    const Matrix dense = ref::covariance(c, u * rho0 * u.adjoint());
    const auto g = evolve_cm(CovarianceMatrix(ref::covariance(c, rho0)), t, time);
    EXPECT_LT(max_abs(Matrix(g.matrix() - dense)), 1e-9);
  }
}

TEST(CanonicalForm, CanonicalInputRecoversLambdas) {
  Vector l(3);
  l << 0.9, 0.5, 0.2;
  const auto cf = canonical_form(CovarianceMatrix(canonical_blocks(l)));
  EXPECT_LT((cf.lambda - l).cwiseAbs().maxCoeff(), 1e-14);
  const Matrix back = cf.transform.transpose() * canonical_blocks(cf.lambda) * cf.transform;
  EXPECT_LT(max_abs(Matrix(back - canonical_blocks(l))), 1e-14);
}

TEST(CanonicalForm, PureStateHasUnitLambdas) {
  const auto g = thermal_cm(build_generator(chain(5, 0.8, 0.4)), inf);
  const auto cf = canonical_form(g);
  EXPECT_LT((cf.lambda.cwiseAbs() - Vector::Ones(5)).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(CanonicalForm, MixedLambdasMatchEigenvalues) {
  std::mt19937_64 rng(17);
  const auto c = ref::majoranas(4);
  const Matrix g = ref::covariance(c, ref::random_gaussian_state(rng, c, 1.2));
  const auto cf = canonical_form(CovarianceMatrix(g));
  Eigen::ComplexEigenSolver<CMatrix> es(g.cast<Complex>());
  std::vector<double> ev;
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i)
    if (es.eigenvalues()(i).imag() > 0) ev.push_back(es.eigenvalues()(i).imag());
  std::sort(ev.rbegin(), ev.rend());
  ASSERT_EQ(ev.size(), 4u);
  for (int k = 0; k < 4; ++k) EXPECT_NEAR(std::abs(cf.lambda(k)), ev[static_cast<std::size_t>(k)], 1e-10);
  EXPECT_GT(cf.transform.determinant(), 0.0);
}

// ---------------------------------------------------------------------------
// Uhlmann fidelity

TEST(Uhlmann, SelfFidelityIsOne) {
  std::mt19937_64 rng(2);
  const auto c = ref::majoranas(4);
  const CovarianceMatrix g(ref::covariance(c, ref::random_gaussian_state(rng, c, 0.7)));
  EXPECT_NEAR(uhlmann_fidelity(g, g), 1.0, 1e-10);
}

TEST(Uhlmann, PureReducesToOverlap) {
  const auto a = thermal_cm(build_generator(chain(4, 0.3)), inf);
  const auto b = thermal_cm(build_generator(chain(4, 1.4, 0.5)), inf);
  EXPECT_NEAR(uhlmann_fidelity(a, b), std::sqrt(overlap_trace(a, b)), 1e-10);
}

TEST(Uhlmann, MixedPairMatchesDense) {
  std::mt19937_64 rng(33);
  const auto c = ref::majoranas(5);
  for (int rep = 0; rep < 3; ++rep) {
    const ref::CM a = ref::random_gaussian_state(rng, c, 0.8);
    const ref::CM b = ref::random_gaussian_state(rng, c, 0.8);
    const double f = uhlmann_fidelity(CovarianceMatrix(ref::covariance(c, a)), CovarianceMatrix(ref::covariance(c, b)));
    EXPECT_NEAR(f, ref::fidelity(a, b), 1e-8);
  }
}

TEST(Uhlmann, FuchsVanDeGraafSandwich) {
  std::mt19937_64 rng(91);
  const auto c = ref::majoranas(4);
  for (int rep = 0; rep < 5; ++rep) {
    const ref::CM a = ref::random_gaussian_state(rng, c, 1.0);
    const ref::CM b = ref::random_gaussian_state(rng, c, 1.0);
    const double f = uhlmann_fidelity(CovarianceMatrix(ref::covariance(c, a)), CovarianceMatrix(ref::covariance(c, b)));
    const double d = 0.5 * ref::trace_norm(ref::CM(a - b));
    EXPECT_LE(1.0 - f, d + 1e-10);
    EXPECT_LE(d, std::sqrt(1.0 - f * f) + 1e-10);
  }
}

TEST(Uhlmann, UnchangedByCommonAncilla) {
  std::mt19937_64 rng(12);
  const auto c3 = ref::majoranas(3);
  const ref::CM a = ref::random_gaussian_state(rng, c3, 0.9);
  const ref::CM b = ref::random_gaussian_state(rng, c3, 0.9);
  const Matrix ga = ref::covariance(c3, a), gb = ref::covariance(c3, b);
  Matrix anc = thermal_cm(build_generator(chain(2, 0.6)), 1.5).matrix();
  auto sum = [&anc](const Matrix& g) {
    Matrix out = Matrix::Zero(g.rows() + anc.rows(), g.rows() + anc.rows());
    out.topLeftCorner(g.rows(), g.rows()) = g;
    out.bottomRightCorner(anc.rows(), anc.rows()) = anc;
    return CovarianceMatrix(out);
  };
  const double f = uhlmann_fidelity(CovarianceMatrix(ga), CovarianceMatrix(gb));
  EXPECT_NEAR(uhlmann_fidelity(sum(ga), sum(gb)), f, 1e-8);
  EXPECT_NEAR(f, ref::fidelity(a, b), 1e-8);
}

// ---------------------------------------------------------------------------
// Kitaev chain

TEST(Kitaev, SweetSpotDecouplesEdgeMajoranas) {
  const auto t = build_generator(chain(5, 0.0, 1.0)).matrix();
  EXPECT_EQ(t.row(0).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(t.col(0).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(t.row(9).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(t.col(9).cwiseAbs().maxCoeff(), 0.0);
  for (int s = 0; s < 5; ++s) EXPECT_EQ(t(2 * s, 2 * s + 1), 0.0);
  EXPECT_LE(antisymmetry_defect(t), 1e-15);
}

TEST(Kitaev, RejectsBadParameters) {
  EXPECT_THROW(build_generator(chain(1, 0.0)), ConfigError);
  EXPECT_THROW(build_generator(ChainParams{4, 0.0, 1.0, 0.0, {}}), ConfigError);
  EXPECT_THROW(build_generator(ChainParams{4, 0.0, 1.0, 1.0, {0.1, 0.2}}), ConfigError);
}

TEST(Kitaev, QuasiparticleEnergiesMatchDenseSpectrum) {
  const auto p = chain(4, 0.5, 1.0);
  const auto t = build_generator(p);
  const auto spec = diagonalize(t);
  const auto c = ref::majoranas(4);
  Eigen::SelfAdjointEigenSolver<ref::CM> es(ref::hamiltonian(c, t.matrix()));
  const Vector dense = es.eigenvalues();
  // Many-body levels are sum_k +-e_k/2; compare the full list.
  std::vector<double> levels;
  for (int mask = 0; mask < 16; ++mask) {
    double e = 0.0;
    for (int k = 0; k < 4; ++k) e += ((mask >> k) & 1 ? 0.5 : -0.5) * spec.energies(k);
    levels.push_back(e);
  }
  std::sort(levels.begin(), levels.end());
  for (int i = 0; i < 16; ++i) EXPECT_NEAR(levels[static_cast<std::size_t>(i)], dense(i), 1e-10);
}

TEST(Kitaev, SweetSpotHasExactZeroMode) {
  EXPECT_EQ(diagonalize(build_generator(chain(7, 0.0, 1.0))).energies(0), 0.0);
}

TEST(Kitaev, ZeroModeEnergyClosesExponentially) {
  std::vector<double> ns, logs;
  for (int n : {8, 12, 16, 20}) {
    ns.push_back(n);
    logs.push_back(std::log(diagonalize(build_generator(chain(n, 1.0, 1.0))).energies(0)));
  }
  for (std::size_t i = 1; i < logs.size(); ++i) EXPECT_LT(logs[i], logs[i - 1]);
  // Equal spacing in N: the decrements should be nearly constant.
  const double d1 = logs[1] - logs[0], d3 = logs[3] - logs[2];
  EXPECT_NEAR(d1, d3, 0.1 * std::abs(d1));
}

TEST(Kitaev, PhaseClassification) {
  EXPECT_TRUE(is_topological(chain(8, 1.5)));
  EXPECT_FALSE(is_topological(chain(8, 3.0)));
  EXPECT_FALSE(is_topological(chain(8, 2.0)));
}

TEST(Encoding, PauliExpectations) {
  const auto p = chain(4, 0.3);
  const Matrix f = total_frame(diagonalize(build_generator(p)));
  auto frame_cm = [&f](const CovarianceMatrix& g) { return Matrix(f * g.matrix() * f.transpose()); };
  const auto z = encode_pair(p, Axis::z, inf);
  EXPECT_NEAR(frame_cm(z.gamma_plus)(0, 1), 1.0, 1e-12);  // <i m1 m2> = 1
  const auto x = encode_pair(p, Axis::x, inf);
  EXPECT_NEAR(frame_cm(x.gamma_plus)(2, 1), 1.0, 1e-12);  // <i m3 m2> = 1
  EXPECT_TRUE(x.gamma_plus.is_pure());
}

TEST(Encoding, PairsDifferOnlyOnQubitBlock) {
  const auto p = chain(5, 0.6, 0.8);
  const Matrix f = total_frame(diagonalize(build_generator(p)));
  for (Axis a : {Axis::x, Axis::y, Axis::z}) {
    const auto e = encode_pair(p, a, inf);
    EXPECT_TRUE(e.gamma_plus.is_pure());
    EXPECT_TRUE(e.gamma_minus.is_pure());
    Matrix d = f * (e.gamma_plus.matrix() - e.gamma_minus.matrix()) * f.transpose();
    d.topLeftCorner(4, 4).setZero();
    EXPECT_LT(max_abs(d), 1e-12);
  }
}

TEST(Encoding, SuperpositionMatchesDenseConstruction) {
  // (|0> + |1>)/sqrt 2 with |1> = a^+ b^+ |0> is the +x encoding.
  const auto p = chain(3, 0.4);
  const auto spec = diagonalize(build_generator(p));
  const Matrix f = total_frame(spec);
  const auto c = ref::majoranas(4);
  std::vector<ref::CM> m;
  for (Eigen::Index r = 0; r < 8; ++r) {
    ref::CM op = ref::CM::Zero(16, 16);
    for (Eigen::Index k = 0; k < 8; ++k) op += f(r, k) * c[static_cast<std::size_t>(k)];
    m.push_back(op);
  }
  ref::CM number = ref::CM::Zero(16, 16);
  std::vector<ref::CM> d;
  for (int k = 0; k < 4; ++k) {
    d.push_back(0.5 * (m[2 * k] + ref::C(0, 1) * m[2 * k + 1]));
    number += d.back().adjoint() * d.back();
  }
  Eigen::SelfAdjointEigenSolver<ref::CM> es(number);
  const Eigen::VectorXcd zero = es.eigenvectors().col(0);
  const Eigen::VectorXcd one = d[0].adjoint() * d[1].adjoint() * zero;
  const Eigen::VectorXcd psi = (zero + one) / std::sqrt(2.0);
  const Matrix dense = ref::covariance(c, psi * psi.adjoint());
  EXPECT_LT(max_abs(Matrix(dense - encode_pair(p, Axis::x, inf).gamma_plus.matrix())), 1e-10);
}

TEST(Encoding, InitialTraceDistanceIsOne) {
  const auto p = chain(3, 0.0);
  const auto e = encode_pair(p, Axis::y, inf);
  const auto c = ref::majoranas(4);
  // Gaussian pure states from their covariance: projector on the +1 eigenspace
  // of all i c'_{2k} c'_{2k+1} in the canonical frame.
  auto state = [&c](const CovarianceMatrix& g) {
    const auto cf = canonical_form(g);
    ref::CM rho = ref::CM::Identity(16, 16);
    for (Eigen::Index k = 0; k < 4; ++k) {
      ref::CM a = ref::CM::Zero(16, 16), b = ref::CM::Zero(16, 16);
      for (Eigen::Index j = 0; j < 8; ++j) {
        a += cf.transform(2 * k, j) * c[static_cast<std::size_t>(j)];
        b += cf.transform(2 * k + 1, j) * c[static_cast<std::size_t>(j)];
      }
      rho = rho * (0.5 * (ref::CM::Identity(16, 16) - cf.lambda(k) * ref::C(0, 1) * a * b));
    }
    return rho;
  };
  const ref::CM rp = state(e.gamma_plus), rm = state(e.gamma_minus);
  EXPECT_LT(max_abs(Matrix(ref::covariance(c, rp) - e.gamma_plus.matrix())), 1e-10);
  EXPECT_NEAR(0.5 * ref::trace_norm(ref::CM(rp - rm)), 1.0, 1e-10);
}

TEST(Encoding, ZeroModeLocalizesWithSize) {
  std::vector<double> miss;
  for (int n : {8, 12, 16, 20}) miss.push_back(1.0 - edge_weight(diagonalize(build_generator(chain(n, 1.0))), n));
  for (std::size_t i = 1; i < miss.size(); ++i) EXPECT_LT(miss[i], miss[i - 1]);
  EXPECT_GT(std::log(miss[0]) - std::log(miss[3]), 0.0);
}

TEST(Encoding, BetaMustBePositive) {
  EXPECT_THROW(encode_pair(chain(3, 0.0), Axis::x, 0.0), ConfigError);
  EXPECT_EQ(parse_axis("y"), Axis::y);
  EXPECT_THROW(parse_axis("w"), ConfigError);
}
