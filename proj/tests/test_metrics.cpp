#include <gtest/gtest.h>

#include <chrono>
#include <cmath>
#include <random>

#include <unsupported/Eigen/KroneckerProduct>

#include "qnd/metrics.hpp"

using namespace qnd;

namespace {

CVector random_vector(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  CVector v(n);
  for (int i = 0; i < n; ++i) v(i) = cplx(g(rng), g(rng));
  return v.normalized();
}

CMatrix random_density(int n, int rank, std::mt19937_64& rng) {
  CMatrix v(n, rank);
  for (int k = 0; k < rank; ++k) v.col(k) = random_vector(n, rng);
  CMatrix rho = v * v.adjoint();
  return rho / rho.trace();
}

CMatrix random_unitary(int n, std::mt19937_64& rng) {
  CMatrix a(n, n);
  for (int k = 0; k < n; ++k) a.col(k) = random_vector(n, rng);
  Eigen::HouseholderQR<CMatrix> qr(a);
  return qr.householderQ();
}

Protocol small_protocol(double g_mhz) {
  Protocol pr;
  pr.params.omega_c = units::from_ghz(8.128);
  pr.params.omega_q = units::from_ghz(6.998);
  pr.params.g_max = units::from_mhz(g_mhz);
  pr.cavity = {2.0, 0.0, 0.0};
  pr.params.dims = {2, default_cavity_cutoff(pr.cavity)};
  pr.schedule.envelope = {EnvelopeShape::erfc, 2.0, 0.8, 2.2};
  pr.tau = 3.0;
  return pr;
}

// Fock-space Uhlmann value for a Gaussian mode, built as S then D on a
// large cutoff. Only pure Gaussian modes are representable this way.
CMatrix fock_density(const CavityStateSpec& s, int cutoff) {
  const CVector v = squeezed_coherent_state(s, cutoff);
  return v * v.adjoint();
}

GaussianMode gaussian_of(const CavityStateSpec& s) {
  const double ch = std::cosh(s.r), sh = std::sinh(s.r);
  return {s.alpha, std::norm(s.alpha) + sh * sh, s.alpha * s.alpha - std::polar(sh * ch, s.theta)};
}

}  // namespace

TEST(Uhlmann, OrthogonalPureStatesGiveZero) {
  EXPECT_NEAR(uhlmann_indistinguishability(fock_density({0.0, 0.0, 0.0}, 4),
                                           [] {
                                             CMatrix m = CMatrix::Zero(4, 4);
                                             m(2, 2) = 1.0;
                                             return m;
                                           }()),
              0.0, 1e-12);
}

TEST(Uhlmann, CoherentOverlap) {
  const cplx a(1.2, -0.4), b(-0.3, 0.9);
  const double expected = std::exp(-0.5 * std::norm(a - b));
  const int n = 40;
  EXPECT_NEAR(uhlmann_indistinguishability(fock_density({a, 0, 0}, n), fock_density({b, 0, 0}, n)), expected, 1e-7);
  CMatrix va = coherent_state(a, n), vb = coherent_state(b, n);
  EXPECT_NEAR(uhlmann_from_factors(va, vb), expected, 1e-10);
}

TEST(Uhlmann, PropertiesOnRandomStates) {
  std::mt19937_64 rng(21);
  for (int k = 0; k < 10; ++k) {
    const CMatrix r0 = random_density(6, 1 + k % 4, rng), r1 = random_density(6, 1 + (k + 1) % 4, rng);
    const double f = uhlmann_indistinguishability(r0, r1);
    EXPECT_GE(f, 0.0);
    EXPECT_LE(f, 1.0);
    EXPECT_NEAR(uhlmann_indistinguishability(r0, r0), 1.0, 1e-7);
    EXPECT_NEAR(uhlmann_indistinguishability(r1, r0), f, 1e-7);
    const CMatrix u = random_unitary(6, rng);
    EXPECT_NEAR(uhlmann_indistinguishability(u * r0 * u.adjoint(), u * r1 * u.adjoint()), f, 1e-7);
    // Appending the same ancilla leaves the value unchanged.
    const CMatrix anc = random_density(2, 1, rng);
    const CMatrix e0 = Eigen::KroneckerProduct(r0, anc), e1 = Eigen::KroneckerProduct(r1, anc);
    EXPECT_NEAR(uhlmann_indistinguishability(e0, e1), f, 1e-6);
  }
}

TEST(Uhlmann, FactorFormMatchesDensityForm) {
  std::mt19937_64 rng(5);
  CMatrix v0(8, 2), v1(8, 2);
  v0.col(0) = random_vector(8, rng) * std::sqrt(0.7);
  v0.col(1) = random_vector(8, rng) * std::sqrt(0.3);
  v1.col(0) = random_vector(8, rng) * std::sqrt(0.4);
  v1.col(1) = random_vector(8, rng) * std::sqrt(0.6);
  const CMatrix r0 = v0 * v0.adjoint(), r1 = v1 * v1.adjoint();
  EXPECT_NEAR(uhlmann_from_factors(v0, v1), uhlmann_indistinguishability(r0 / r0.trace(), r1 / r1.trace()), 1e-7);
}

TEST(Uhlmann, GaussianFormulaMatchesFock) {
  const std::vector<std::pair<CavityStateSpec, CavityStateSpec>> cases{
      {{cplx(1.0, 0.5), 0.0, 0.0}, {cplx(-0.5, 0.2), 0.0, 0.0}},
      {{cplx(1.0, 0.0), 0.6, 0.3}, {cplx(0.4, 0.8), 0.6, 0.3}},
      {{cplx(0.0, 1.0), 0.8, 1.1}, {cplx(0.5, -0.5), 0.3, 2.0}},
  };
  for (const auto& [s0, s1] : cases) {
    const double fock = uhlmann_indistinguishability(fock_density(s0, 80), fock_density(s1, 80));
    EXPECT_NEAR(gaussian_uhlmann(gaussian_of(s0), gaussian_of(s1)), fock, 1e-7);
  }
}

TEST(Schmidt, ProductStateHasNoFlip) {
  const JointState psi = tensor_state(basis_state(2, 1), coherent_state(1.0, 16));
  const auto s = schmidt_disturbance(psi, 1);
  EXPECT_NEAR(s.epsilon, 0.0, 1e-14);
  EXPECT_NEAR(s.q, 0.0, 1e-14);
  EXPECT_NEAR(s.flip_probability, 0.0, 1e-14);
}

TEST(Schmidt, RotatedProductGivesQ) {
  CVector q(2);
  q << std::sqrt(0.75), std::sqrt(0.25);
  const auto s = schmidt_disturbance(tensor_state(q, coherent_state(0.5, 10)), 0);
  EXPECT_NEAR(s.epsilon, 0.0, 1e-12);
  EXPECT_NEAR(s.flip_probability, 0.25, 1e-12);
}

TEST(Schmidt, FlipMatchesReducedPopulation) {
  std::mt19937_64 rng(17);
  for (int k = 0; k < 50; ++k) {
    const JointState psi{random_vector(16, rng), {2, 8}, 0.0};
    const CMatrix rq = partial_trace(psi, Subsystem::qubit);
    for (int x = 0; x < 2; ++x) {
      const auto s = schmidt_disturbance(psi, x);
      EXPECT_NEAR(s.flip_probability, rq(1 - x, 1 - x).real(), 1e-9);
      EXPECT_NEAR(std::abs(s.qubit_major.dot(s.qubit_minor)), 0.0, 1e-10);
    }
  }
}

TEST(Readout, NoCouplingMeansNoReadout) {
  const Protocol pr = small_protocol(0.0);
  for (auto engine : {Engine::exact, Engine::moments}) {
    ReadoutOptions o;
    o.engine = engine;
    const auto r = measurement_report(pr, o);
    EXPECT_NEAR(r.distinguishability, 0.0, 1e-8);
    EXPECT_NEAR(r.disturbance, 0.0, 1e-8);
  }
}

TEST(Readout, GlobalPhaseOfCavityStateIsIrrelevant) {
  const Protocol pr = small_protocol(100.0);
  ReadoutOptions o;
  o.integrator.samples = 2;
  const auto ref = measurement_report(pr, o);
  const auto h = detail::exact_hamiltonian(pr.params, pr.schedule, Dynamics::rabi);
  const CVector cav = squeezed_coherent_state(pr.cavity, pr.params.dims.cavity_cutoff) * std::polar(1.0, 1.3);
  std::array<CMatrix, 2> f;
  for (int x = 0; x < 2; ++x) {
    const auto t = evolve_schrodinger(tensor_state(basis_state(2, x), cav), h, 0.0, pr.tau, o.integrator,
                                      max_step_bound(pr.params));
    EXPECT_NEAR(schmidt_disturbance(t.final_state(), x).flip_probability, x ? ref.p1 : ref.p0, 1e-10);
    f[x] = cavity_factor(t.final_state());
  }
  EXPECT_NEAR(1.0 - uhlmann_from_factors(f[0], f[1]), ref.distinguishability, 1e-10);
}

TEST(Readout, PureAndOpenEnginesAgreeWithoutLoss) {
  Protocol pr = small_protocol(100.0);
  pr.params.kappa_int = units::from_khz(1e-9);
  ReadoutOptions pure, open;
  pure.integrator.samples = open.integrator.samples = 2;
  open.open_system = true;
  const auto a = measurement_report(pr, pure);
  const auto b = measurement_report(pr, open);
  EXPECT_NEAR(a.distinguishability, b.distinguishability, 1e-6);
  EXPECT_NEAR(a.p1, b.p1, 1e-6);
}

TEST(Readout, MomentEngineTracksExactCentroidInDispersiveRegime) {
  Protocol pr = small_protocol(30.0);
  pr.params.omega_q = pr.params.omega_c + 20.0 * pr.params.g_max;
  pr.cavity = {3.0, 0.0, 0.0};
  pr.params.dims.cavity_cutoff = default_cavity_cutoff(pr.cavity);
  pr.schedule.envelope.shape = EnvelopeShape::constant;
  pr.tau = 32.0;
  const auto e = closure_error_report(pr);
  EXPECT_LT(e.relative_distance_error, 0.05);
}

TEST(Readout, StrongCouplingClosureErrorIsReported) {
  Protocol pr = small_protocol(100.0);
  pr.params.omega_q = pr.params.omega_c - 3.0 * pr.params.g_max;
  const auto e = closure_error_report(pr);
  EXPECT_TRUE(std::isfinite(e.max_centroid_deviation));
  EXPECT_GE(e.exact_final_distance, 0.0);
}

TEST(Dispersive, AnalyticsLimits) {
  PulseSchedule s;
  s.envelope.shape = EnvelopeShape::constant;
  const auto zero = dispersive_analytics(0.0, 1.0, 10.0, 3.0, s);
  EXPECT_EQ(zero.phi, 0.0);
  EXPECT_EQ(zero.lambda, 0.0);
  // Constant g with g^2 tau / Delta = pi / 2.
  const double g = 0.2, delta = 2.0, tau = 0.5 * M_PI * delta / (g * g);
  const auto half = dispersive_analytics(g, delta, tau, cplx(0.0, 3.0), s);
  EXPECT_NEAR(half.phi, 0.5 * M_PI, 1e-10);
  EXPECT_NEAR(half.lambda, 6.0, 1e-9);
  EXPECT_NEAR(half.n_crit, delta * delta / (4 * g * g), 1e-12);
  EXPECT_THROW(dispersive_analytics(g, 0.0, tau, 1.0, s), DomainError);
}

TEST(Dispersive, PhotonWarningAboveTenthOfCriticalNumber) {
  Protocol pr = small_protocol(100.0);
  pr.params.omega_q = pr.params.omega_c + 4.0 * pr.params.g_max;  // n_crit = 4
  ReadoutOptions o;
  o.dynamics = Dynamics::dispersive;
  o.integrator.samples = 3;
  EXPECT_FALSE(measurement_report(pr, o).warnings().empty());
}

TEST(Centroid, DistanceExamples) {
  BranchResult a, b;
  a.times = b.times = {0.0, 1.0};
  a.centroid = b.centroid = {cplx(1.0, 0.0), cplx(2.0, 1.0)};
  EXPECT_EQ(centroid_distance(a, b, 0.5), 0.0);
  b.centroid = {cplx(-1.0, 0.0), cplx(-2.0, -1.0)};
  EXPECT_NEAR(centroid_distance(a, b, 1.0), 2.0 * std::abs(cplx(2.0, 1.0)), 1e-14);
}

TEST(Husimi, CoherentStatePeak) {
  const cplx alpha(1.5, -0.5);
  const CMatrix f = coherent_state(alpha, 40);
  const HusimiGrid g = husimi_q(f, 0.5, 2.5, -1.5, 0.5, 21, 21);
  Eigen::Index i, j;
  g.q.maxCoeff(&j, &i);
  EXPECT_NEAR(g.x[i], alpha.real(), 1e-12);
  EXPECT_NEAR(g.y[j], alpha.imag(), 1e-12);
  EXPECT_NEAR(g.q(j, i), 1.0 / M_PI, 1e-10);
}
