#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "reltime/evolution.hpp"
#include "test_support.hpp"

using namespace reltime;
using namespace reltime::testing;

namespace {

DensityMatrix plus_state() {
  ComplexMatrix m(2, 2);
  m << 0.5, 0.5, 0.5, 0.5;
  return make_density(m);
}

std::vector<TimeKernel> kernels_at(double t_b) {
  return {make_delta_kernel(t_b), make_gaussian_kernel(0.3, t_b), make_uniform_kernel(0.9, t_b),
          make_tabulated_kernel({{t_b - 0.4, 1.0}, {t_b, 2.0}, {t_b + 1.1, 1.5}}, t_b)};
}

}  // namespace

TEST(EvolveUnitary, ZeroTimeIsIdentity) {
  std::mt19937_64 rng(1);
  const DensityMatrix rho = make_density(random_density_matrix(4, rng));
  const Hamiltonian h = spectral_decompose(random_hermitian_matrix(4, rng));
  const EvolutionResult r = evolve_unitary(rho, h, 0.0);
  EXPECT_LE(max_norm(r.state.matrix() - rho.matrix()), 1e-14);
  EXPECT_EQ(r.method, Method::Unitary);
  EXPECT_EQ(r.node_count, 0u);
}

TEST(EvolveUnitary, PiPhaseFlipsCoherence) {
  const EvolutionResult r = evolve_unitary(plus_state(), diagonal_hamiltonian({0.0, std::numbers::pi}), 1.0);
  ComplexMatrix expected(2, 2);
  expected << 0.5, -0.5, -0.5, 0.5;
  EXPECT_LE(max_norm(r.state.matrix() - expected), 1e-15);
}

TEST(EvolveUnitary, AgreesWithMatrixExponential) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 10; ++trial) {
    const ComplexMatrix hm = random_hermitian_matrix(5, rng);
    const DensityMatrix rho = make_density(random_density_matrix(5, rng));
    const double t = -3.0 + 0.7 * trial;
    const ComplexMatrix u = expm_propagator(hm, t);
    const ComplexMatrix oracle = u * rho.matrix() * u.adjoint();
    EXPECT_LE(max_norm(evolve_unitary(rho, spectral_decompose(hm), t).state.matrix() - oracle), 1e-12);
  }
}

TEST(EvolveUnitary, PreservesPurityTraceAndSpectrum) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 30; ++trial) {
    const Eigen::Index dim = 2 + trial % 15;
    const DensityMatrix rho = make_density(random_density_matrix(dim, rng, 1 + trial % 3));
    const Hamiltonian h = spectral_decompose(random_hermitian_matrix(dim, rng));
    const DensityMatrix out = evolve_unitary(rho, h, 0.37 * trial).state;
    EXPECT_NEAR(purity(out), purity(rho), 1e-10);
    EXPECT_NEAR(out.matrix().trace().real(), 1.0, 1e-12);
    Eigen::SelfAdjointEigenSolver<ComplexMatrix> before(rho.matrix()), after(out.matrix());
    EXPECT_LE((before.eigenvalues() - after.eigenvalues()).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(EvolveUnitary, DimensionMismatch) {
  EXPECT_THROW(evolve_unitary(plus_state(), diagonal_hamiltonian({0, 1, 2}), 1.0), Error);
}

TEST(RelationalQuadrature, DeltaKernelEqualsUnitary) {
  std::mt19937_64 rng(4);
  const DensityMatrix rho = make_density(random_density_matrix(6, rng));
  const Hamiltonian h = spectral_decompose(random_hermitian_matrix(6, rng));
  const auto a = evolve_unitary(rho, h, 2.5).state;
  const auto b = evolve_relational_quadrature(rho, h, make_delta_kernel(2.5)).state;
  EXPECT_LE(max_norm(a.matrix() - b.matrix()), 1e-12);
}

TEST(RelationalQuadrature, EnergyDiagonalStateUnchanged) {
  const Hamiltonian h = diagonal_hamiltonian({0.0, 0.7, 2.0});
  ComplexMatrix m = ComplexMatrix::Zero(3, 3);
  m.diagonal() << 0.2, 0.5, 0.3;
  const DensityMatrix rho = make_density(m);
  for (const auto& k : kernels_at(3.0)) {
    EXPECT_LE(max_norm(evolve_relational_quadrature(rho, h, k).state.matrix() - m), 1e-14);
  }
}

TEST(RelationalQuadrature, QubitGaussianCoherence) {
  const auto r = evolve_relational_quadrature(plus_state(), diagonal_hamiltonian({0.0, 1.0}),
                                              make_gaussian_kernel(0.1, 2.0), 64);
  // 0.5 * exp(-lambda t_B omega^2 / 2) with lambda t_B = 0.2, omega = 1
  EXPECT_NEAR(std::abs(r.state(0, 1)), 0.45241870901797976, 1e-12);
  EXPECT_EQ(r.node_count, 64u);
  EXPECT_EQ(r.method, Method::RelationalQuadrature);
  EXPECT_DOUBLE_EQ(r.time_label, 2.0);
}

TEST(RelationalQuadrature, TraceDriftFailsLoudly) {
  ComplexMatrix drifted = ComplexMatrix::Identity(2, 2) * 0.5;
  drifted(0, 0) += 2e-8;
  try {
    detail::check_trace_drift(drifted);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::QuadratureDrift);
  }
  drifted(0, 0) -= 1.5e-8;
  EXPECT_NO_THROW(detail::check_trace_drift(drifted));
}

TEST(RelationalDephasing, GaussianClosedForm) {
  std::mt19937_64 rng(5);
  const ComplexMatrix rho0 = random_pure_matrix(3, rng);
  const Hamiltonian h = diagonal_hamiltonian({-0.5, 0.25, 1.5});
  const double lambda = 0.4, t_b = 1.7;
  const auto rb = evolve_relational_dephasing(make_density(rho0), h, make_gaussian_kernel(lambda, t_b)).state;
  const RealVector& e = h.spectrum();
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      const double gap = e(j) - e(i);
      const complex expected = std::exp(complex(0.0, gap * t_b)) * std::exp(-lambda * t_b * gap * gap / 2.0) *
                               rho0(i, j);
      EXPECT_LE(std::abs(rb(i, j) - expected), 1e-14) << i << "," << j;
    }
  }
}

TEST(RelationalDephasing, DegeneratePairsKeepAliceValue) {
  // E = (1, 1, 3): the (0,1) block is energy-degenerate.
  std::mt19937_64 rng(6);
  const Hamiltonian h = diagonal_hamiltonian({1.0, 1.0, 3.0});
  const DensityMatrix rho = make_density(random_density_matrix(3, rng));
  const auto ra = evolve_unitary(rho, h, 4.0).state;
  const auto rb = evolve_relational_dephasing(rho, h, make_gaussian_kernel(2.0, 4.0)).state;
  EXPECT_LE(std::abs(ra(0, 1) - rb(0, 1)), 1e-12);
  EXPECT_LE(std::abs(ra(0, 0) - rb(0, 0)), 1e-12);
  EXPECT_LT(std::abs(rb(0, 2)), std::abs(ra(0, 2)));
}

TEST(RelationalDephasing, IdentityHamiltonianLeavesStateAlone) {
  std::mt19937_64 rng(7);
  const DensityMatrix rho = make_density(random_density_matrix(4, rng));
  const Hamiltonian h = spectral_decompose(ComplexMatrix::Identity(4, 4));
  for (const auto& k : kernels_at(2.0)) {
    EXPECT_LE(max_norm(evolve_relational_dephasing(rho, h, k).state.matrix() - rho.matrix()), 1e-14);
  }
}

TEST(RelationalDephasing, InvariantUnderDegenerateEigenbasisChoice) {
  std::mt19937_64 rng(8);
  // H = V diag(0, 0, 1, 1, 2) V^dagger for a random unitary V; any rotation
  // inside the degenerate eigenspaces must not change the result.
  const ComplexMatrix v = Eigen::HouseholderQR<ComplexMatrix>(random_matrix(5, 5, rng)).householderQ();
  Eigen::VectorXcd d(5);
  d << 0, 0, 1, 1, 2;
  const ComplexMatrix hm = v * d.asDiagonal() * v.adjoint();
  const Hamiltonian h1 = spectral_decompose(hm);
  const Hamiltonian h2 = spectral_decompose(ComplexMatrix(0.5 * (hm + hm.adjoint())) + 1e-14 * random_hermitian_matrix(5, rng));
  const DensityMatrix rho = make_density(random_density_matrix(5, rng));
  const TimeKernel k = make_gaussian_kernel(0.5, 3.0);
  const auto a = evolve_relational_dephasing(rho, h1, k).state;
  const auto b = evolve_relational_dephasing(rho, h2, k).state;
  EXPECT_LE(max_norm(a.matrix() - b.matrix()), 1e-9);
  EXPECT_EQ(coherence_report(rho, h1, make_gaussian_kernel(500.0, 3.0)).complete_decoherence,
            coherence_report(rho, h2, make_gaussian_kernel(500.0, 3.0)).complete_decoherence);
}

TEST(RelationalDephasing, MatchesQuadratureForGaussian) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> lam(0.01, 1.0), tb(0.0, 5.0);
  for (int trial = 0; trial < 40; ++trial) {
    const Eigen::Index dim = 2 + trial % 7;
    const DensityMatrix rho = make_density(random_density_matrix(dim, rng));
    const double lambda = lam(rng), t_b = tb(rng);
    // keep the widest gap times the kernel width inside the Gauss-Hermite range
    const double scale = 1.0 / std::max(1.0, std::sqrt(lambda * t_b) * std::sqrt(2.0 * dim));
    const Hamiltonian h = spectral_decompose(random_hermitian_matrix(dim, rng, scale));
    const TimeKernel k = make_gaussian_kernel(lambda, t_b);
    const auto a = evolve_relational_dephasing(rho, h, k).state;
    const auto b = evolve_relational_quadrature(rho, h, k, 64).state;
    EXPECT_LE(max_norm(a.matrix() - b.matrix()), 1e-8);
  }
}

TEST(RelationalDephasing, TabulatedMatchesQuadrature) {
  std::mt19937_64 rng(10);
  const DensityMatrix rho = make_density(random_density_matrix(4, rng));
  const Hamiltonian h = spectral_decompose(random_hermitian_matrix(4, rng));
  const TimeKernel k = make_tabulated_kernel({{0.1, 1.0}, {0.9, 2.0}, {2.3, 0.5}});
  const auto a = evolve_relational_dephasing(rho, h, k);
  const auto b = evolve_relational_quadrature(rho, h, k);
  EXPECT_LE(max_norm(a.state.matrix() - b.state.matrix()), 1e-13);
  EXPECT_EQ(a.node_count, 3u);
}

TEST(RelationalProperties, PurityNeverIncreases) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 40; ++trial) {
    const Eigen::Index dim = 2 + trial % 6;
    const DensityMatrix rho = make_density(random_density_matrix(dim, rng, 1 + trial % 2));
    const Hamiltonian h = spectral_decompose(random_hermitian_matrix(dim, rng));
    const double t_b = 0.5 + 0.1 * trial;
    const double pa = purity(evolve_unitary(rho, h, t_b).state);
    for (const auto& k : kernels_at(t_b)) {
      EXPECT_LE(purity(evolve_relational_dephasing(rho, h, k).state), pa + 1e-9);
      EXPECT_LE(purity(evolve_relational_quadrature(rho, h, k).state), pa + 1e-9);
    }
  }
}

TEST(RelationalProperties, EnergyDiagonalIndependentOfReading) {
  std::mt19937_64 rng(12);
  const DensityMatrix rho = make_density(random_density_matrix(4, rng));
  const Hamiltonian h = spectral_decompose(random_hermitian_matrix(4, rng));
  const ComplexMatrix reference = to_energy_basis(h, rho.matrix());
  for (double t_b : {0.5, 1.0, 2.0, 5.0}) {
    const ComplexMatrix rb = to_energy_basis(h, evolve_relational_dephasing(rho, h, make_gaussian_kernel(0.3, t_b)).state.matrix());
    EXPECT_LE((rb.diagonal() - reference.diagonal()).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(RelationalProperties, ProductFactorizesOnlyForAlice) {
  // Witness: qubit S with gap 1 and qubit C with gap 1.5, both in |+>.
  const Hamiltonian hs = diagonal_hamiltonian({0.0, 1.0});
  const Hamiltonian hc = diagonal_hamiltonian({0.0, 1.5});
  const Hamiltonian hq = kron_sum(hs, hc);
  const DensityMatrix rs = plus_state(), rc = plus_state();
  const DensityMatrix rq = tensor(rs, rc);

  const auto qa = evolve_unitary(rq, hq, 2.0).state;
  const ComplexMatrix product_a = tensor(evolve_unitary(rs, hs, 2.0).state.matrix(),
                                         evolve_unitary(rc, hc, 2.0).state.matrix());
  EXPECT_LE(max_norm(qa.matrix() - product_a), 1e-9);

  const auto qb = evolve_relational_dephasing(rq, hq, make_gaussian_kernel(0.5, 2.0)).state;
  const ComplexMatrix product_b =
      tensor(partial_trace(qb.matrix(), 2, 2, Keep::System), partial_trace(qb.matrix(), 2, 2, Keep::Clock));
  EXPECT_GT(max_norm(qb.matrix() - product_b), 1e-3);
}

TEST(RelationalProperties, SubsystemConsistency) {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 10; ++trial) {
    const Eigen::Index ds = 2 + trial % 2, dc = 2 + trial % 3;
    const Hamiltonian hs = spectral_decompose(random_hermitian_matrix(ds, rng));
    const Hamiltonian hc = spectral_decompose(random_hermitian_matrix(dc, rng));
    const DensityMatrix rs = make_density(random_density_matrix(ds, rng));
    const DensityMatrix rc = make_density(random_density_matrix(dc, rng));
    const TimeKernel k = make_gaussian_kernel(0.2, 1.0 + trial);
    const auto direct = evolve_relational_dephasing(rs, hs, k).state;
    const auto composite = evolve_relational_dephasing(tensor(rs, rc), kron_sum(hs, hc), k).state;
    EXPECT_LE(max_norm(partial_trace(composite, ds, dc, Keep::System).matrix() - direct.matrix()), 1e-9);
  }
}

TEST(EvolvePearle, ZeroTimeReturnsInitialState) {
  const auto r = evolve_pearle(plus_state(), diagonal_hamiltonian({0.0, 1.0}), 0.5, 0.0);
  EXPECT_EQ(max_norm(r.state.matrix() - plus_state().matrix()), 0.0);
}

TEST(EvolvePearle, Errors) {
  try {
    evolve_pearle(plus_state(), diagonal_hamiltonian({0.0, 1.0}), 0.0, 1.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NonPositiveLambda);
  }
  EXPECT_THROW(evolve_pearle(plus_state(), diagonal_hamiltonian({0.0, 1.0}), 1.0, -1.0), Error);
}

TEST(EvolvePearle, MatchesRelationalGaussian) {
  std::mt19937_64 rng(14);
  const Hamiltonian h = spectral_decompose(random_hermitian_matrix(3, rng, 0.5));
  const DensityMatrix rho = make_density(random_pure_matrix(3, rng));
  for (double t : {0.01, 0.5, 2.0, 7.5}) {
    const auto p = evolve_pearle(rho, h, 0.2, t).state;
    const auto r = evolve_relational_dephasing(rho, h, make_gaussian_kernel(0.2, t)).state;
    EXPECT_LE(max_norm(p.matrix() - r.matrix()), 1e-8) << t;
  }
}

TEST(EvolvePearle, WideSpectrumRaisesNodeCount) {
  // gap 8, width sqrt(3): beyond what 64 nodes resolve
  const Hamiltonian h = diagonal_hamiltonian({-4.0, 0.5, 4.0});
  std::mt19937_64 rng(17);
  const DensityMatrix rho = make_density(random_pure_matrix(3, rng));
  const auto p = evolve_pearle(rho, h, 1.0, 3.0);
  EXPECT_GT(p.node_count, 64u);
  const auto r = evolve_relational_dephasing(rho, h, make_gaussian_kernel(1.0, 3.0)).state;
  EXPECT_LE(max_norm(p.state.matrix() - r.matrix()), 1e-12);
  const auto q = evolve_relational_quadrature(rho, h, make_gaussian_kernel(1.0, 3.0));
  EXPECT_EQ(q.node_count, p.node_count);
  EXPECT_LE(max_norm(q.state.matrix() - r.matrix()), 1e-12);
}

TEST(EvolvePearle, UnresolvableWidthFailsLoudly) {
  const Hamiltonian h = diagonal_hamiltonian({0.0, 100.0});
  try {
    evolve_pearle(plus_state(), h, 1.0, 10.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::QuadratureDrift);
  }
  EXPECT_THROW(evolve_relational_quadrature(plus_state(), h, make_gaussian_kernel(1.0, 10.0)), Error);
  // the closed form has no such limit
  EXPECT_LT(std::abs(evolve_relational_dephasing(plus_state(), h, make_gaussian_kernel(1.0, 10.0)).state(0, 1)), 1e-300);
}

TEST(EvolvePearle, QubitPopulationsConstant) {
  const Hamiltonian h = diagonal_hamiltonian({0.0, 2.0});
  ComplexMatrix m(2, 2);
  m << 0.7, complex(0.1, 0.3), complex(0.1, -0.3), 0.3;
  const DensityMatrix rho = make_density(m);
  for (double t : {0.5, 1.0, 4.0}) {
    const auto p = evolve_pearle(rho, h, 0.3, t).state;
    EXPECT_NEAR(p(0, 0).real(), 0.7, 1e-12);
    EXPECT_NEAR(p(1, 1).real(), 0.3, 1e-12);
  }
}

TEST(CoherenceReport, DeltaKernelKeepsMagnitudes) {
  std::mt19937_64 rng(15);
  const DensityMatrix rho = make_density(random_density_matrix(4, rng));
  const Hamiltonian h = spectral_decompose(random_hermitian_matrix(4, rng));
  const CoherenceReport r = coherence_report(rho, h, make_delta_kernel(3.0));
  EXPECT_EQ(r.pairs.size(), 6u);
  for (const auto& p : r.pairs) EXPECT_NEAR(p.magnitude_a, p.magnitude_b, 1e-12);
  EXPECT_FALSE(r.complete_decoherence);
}

TEST(CoherenceReport, BroadGaussianFlagsCompleteDecoherence) {
  const Hamiltonian h = diagonal_hamiltonian({0.0, 1.0, 2.5});
  std::mt19937_64 rng(16);
  const DensityMatrix rho = make_density(random_pure_matrix(3, rng));
  // lambda t_B omega_min^2 = 100
  const CoherenceReport r = coherence_report(rho, h, make_gaussian_kernel(10.0, 10.0));
  EXPECT_TRUE(r.complete_decoherence);
  EXPECT_LT(r.max_offdiag_b, 1e-9);
  for (const auto& p : r.pairs) {
    EXPECT_TRUE(p.distinct_energy);
    EXPECT_LE(p.magnitude_b, p.magnitude_a + 1e-9);
  }
  // a narrow kernel does not
  EXPECT_FALSE(coherence_report(rho, h, make_gaussian_kernel(0.01, 1.0)).complete_decoherence);
}

TEST(CoherenceReport, IdentityHamiltonianIsVacuouslyDecohered) {
  const CoherenceReport r =
      coherence_report(plus_state(), spectral_decompose(ComplexMatrix::Identity(2, 2)), make_delta_kernel(1.0));
  ASSERT_EQ(r.pairs.size(), 1u);
  EXPECT_FALSE(r.pairs[0].distinct_energy);
  EXPECT_DOUBLE_EQ(r.pairs[0].magnitude_b, r.pairs[0].magnitude_a);
  EXPECT_TRUE(r.complete_decoherence);
  EXPECT_EQ(r.max_offdiag_b, 0.0);
}

TEST(EnergyGaps, MergesDegenerateGaps) {
  const auto gaps = energy_gaps(diagonal_hamiltonian({0.0, 1.0, 1.0, 2.0}));
  ASSERT_EQ(gaps.size(), 2u);
  EXPECT_DOUBLE_EQ(gaps[0], 1.0);
  EXPECT_DOUBLE_EQ(gaps[1], 2.0);
}
