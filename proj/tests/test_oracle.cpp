#include <gtest/gtest.h>

#include <numbers>
#include <random>

#include "models.hpp"
#include "ptdvp/dmrg.hpp"
#include "ptdvp/haldane_shastry.hpp"
#include "ptdvp/observables.hpp"
#include "ptdvp/oracle.hpp"
#include "ptdvp/tdvp.hpp"
#include "support.hpp"

using namespace ptdvp;

namespace {

ModelSpec spec_of(Model m, std::size_t n, double alpha = 2.0) {
  ModelSpec s;
  s.model = m;
  s.n_sites = n;
  s.alpha = alpha;
  s.field_B = 0.3;
  s.delta_B = 1e-6;
  return s;
}

}  // namespace

// ------------------------------------------------------------------- dense H

TEST(DenseHamiltonian, TwoSpinIsing) {
  ModelSpec s = spec_of(Model::IsingNN, 2);
  s.field_B = 0.0;
  const Eigen::MatrixXcd h = dense_hamiltonian(s, nullptr);
  const Eigen::Vector4cd diag(-1.0, 1.0, 1.0, -1.0);
  EXPECT_LE((h - Eigen::MatrixXcd(diag.asDiagonal())).norm(), 1e-15);
}

TEST(DenseHamiltonian, TwoSpinXxxSingletTriplet) {
  const Eigen::MatrixXcd h = dense_hamiltonian(spec_of(Model::XXXLR, 2), nullptr);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(h);
  EXPECT_NEAR(es.eigenvalues()(0), -0.75, 1e-14);
  for (int i = 1; i < 4; ++i) EXPECT_NEAR(es.eigenvalues()(i), 0.25, 1e-14);
}

TEST(DenseHamiltonian, HermitianForEveryModel) {
  for (auto m : {Model::IsingLR, Model::XYLR, Model::XXXLR, Model::IsingNN}) {
    for (std::size_t n : {2, 5, 8}) {
      const Eigen::MatrixXcd h = dense_hamiltonian(spec_of(m, n, 1.3), nullptr);
      EXPECT_LE((h - h.adjoint()).norm(), 1e-12) << model_name(m) << " " << n;
    }
  }
}

TEST(DenseHamiltonian, CapEnforced) {
  EXPECT_THROW(dense_hamiltonian(spec_of(Model::IsingNN, 15), nullptr), ConfigError);
  EXPECT_NO_THROW(dense_hamiltonian(spec_of(Model::IsingNN, 4), nullptr, 16));
  EXPECT_THROW(dense_hamiltonian(spec_of(Model::IsingNN, 5), nullptr, 16), ConfigError);
}

// ------------------------------------------------------------- exact evolve

TEST(ExactEvolve, ZeroTimeIsIdentity) {
  std::mt19937_64 rng(1);
  const Eigen::MatrixXcd h = test::random_hermitian(16, rng);
  const Eigen::VectorXcd v = test::random_vector(16, rng);
  EXPECT_LE((exact_evolve(v, h, 0.0) - v).norm(), 1e-13 * v.norm());
}

TEST(ExactEvolve, SingleSpinPhase) {
  const Eigen::Vector2cd v(0.6, cplx(0.0, 0.8));
  const Eigen::VectorXcd out = exact_evolve(v, spin::sigma_z(), std::numbers::pi);
  EXPECT_LE((out + v).norm(), 1e-14);
}

TEST(ExactEvolveProperty, GroupLawAndUnitarity) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::MatrixXcd h = test::random_hermitian(12, rng);
    Eigen::VectorXcd v = test::random_vector(12, rng);
    v.normalize();
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    const double t = u(rng), s = u(rng);
    const DenseEvolver ev(h);
    const Eigen::VectorXcd a = ev.evolve(ev.evolve(v, s), t);
    const Eigen::VectorXcd b = ev.evolve(v, t + s);
    EXPECT_LE((a - b).norm(), 1e-12);
    EXPECT_NEAR(b.norm(), 1.0, 1e-12);
  }
}

// ----------------------------------------------------------- Haldane-Shastry

TEST(HaldaneShastry, EqualTimeOnSiteIsOne) {
  const auto c = haldane_shastry_c_infinity(0, 0.0);
  EXPECT_NEAR(c.value.real(), 1.0, 1e-8);
  EXPECT_NEAR(c.value.imag(), 0.0, 1e-8);
  EXPECT_TRUE(c.reached_tolerance);
}

TEST(HaldaneShastry, EqualTimeValuesAreRealWithAlternatingSign) {
  const auto c1 = haldane_shastry_c_infinity(1, 0.0);
  EXPECT_LT(c1.value.real(), 0.0);
  for (int x = 0; x <= 8; ++x) EXPECT_NEAR(haldane_shastry_c_infinity(x, 0.0).value.imag(), 0.0, 1e-9) << x;
  // closed form at t = 0: (-1)^x Si(pi x) / (pi x)
  EXPECT_NEAR(c1.value.real(), -1.851937051982466 / std::numbers::pi, 1e-9);
}

TEST(HaldaneShastry, StableUnderOrderDoubling) {
  const QuadratureConfig a{.scheme = QuadratureScheme::GaussLegendre, .panels = 8};
  const QuadratureConfig b{.scheme = QuadratureScheme::GaussLegendre, .panels = 16};
  const auto ca = haldane_shastry_c_infinity(2, 1.0, a).value;
  const auto cb = haldane_shastry_c_infinity(2, 1.0, b).value;
  const auto cc = haldane_shastry_c_infinity(2, 1.0).value;
  EXPECT_LE(std::abs(ca - cb), 1e-8);
  EXPECT_LE(std::abs(cb - cc), 1e-8);
}

TEST(HaldaneShastryProperty, BoundedAndConjugateInTime) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> ut(0.0, 4.0);
  for (int trial = 0; trial < 20; ++trial) {
    const int x = static_cast<int>(rng() % 9);
    const double t = ut(rng);
    const auto c = haldane_shastry_c_infinity(x, t).value;
    const auto cm = haldane_shastry_c_infinity(x, -t).value;
    EXPECT_LE(std::abs(c), 1.0 + 1e-9);
    EXPECT_LE(std::abs(cm - std::conj(c)), 2e-9);
  }
}

TEST(HaldaneShastry, RejectsBadConfig) {
  EXPECT_THROW(haldane_shastry_c_infinity(0, 0.0, {.tolerance = 0.0}), ConfigError);
  EXPECT_THROW(parse_quadrature_scheme("simpson"), ConfigError);
}

// -------------------------------------------------------------------- metrics

TEST(Metrics, RelativeDifferences) {
  const cplx c(0.3, -0.2);
  EXPECT_EQ(*eta_infinity(c, c), 0.0);
  EXPECT_NEAR(*eta_p(2.0 * c, c), 1.0, 1e-15);
  EXPECT_FALSE(eta_infinity(c, 0.0).has_value());
}

// ----------------------------------------------------- dynamical correlator

TEST(DynamicalCorrelator, PhaseConventionOnSixSites) {
  const std::size_t n = 6, k = 2;
  const auto spec = spec_of(Model::XXXLR, n);
  const Eigen::MatrixXcd h = dense_hamiltonian(spec, nullptr);
  const DenseEvolver ev(h);
  const Eigen::VectorXcd g = ev.ground_state();
  const double e0 = ev.energies()(0);
  const Eigen::MatrixXcd zk = test::embed(spin::sigma_z(), k, n);
  const double t = 1.3;
  const Eigen::VectorXcd psi_t = ev.evolve(zk * g, t);
  double plus = 0.0, minus = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    const Eigen::MatrixXcd zr = test::embed(spin::sigma_z(), r, n);
    // <g| e^{iHt} Z_r e^{-iHt} Z_k |g>
    const cplx heisenberg = ev.evolve(g, t).dot(zr * psi_t);
    const cplx inner = g.dot(zr * psi_t);
    plus = std::max(plus, std::abs(heisenberg - std::exp(cplx(0.0, e0 * t)) * inner));
    minus = std::max(minus, std::abs(heisenberg - std::exp(cplx(0.0, -e0 * t)) * inner));
  }
  EXPECT_LE(plus, 1e-12);
  EXPECT_GT(minus, 1e-2);
}

TEST(DynamicalCorrelator, TdvpMatchesDenseOnSixSites) {
  const std::size_t n = 6, k = 2;
  auto spec = spec_of(Model::XXXLR, n);
  spec.n_exps = 3;
  const auto fit = fit_power_law(2.0, n - 1, 3);
  const Mpo h = build_mpo(spec, &fit);
  const auto gs = dmrg_ground_state(h, random_mps(test::qubits(n), 4, 3), {.policy = {.chi_max = 16, .epsilon = 1e-14}});
  const InvCanonicalMps psi0 = gs.state;
  SerialTdvp engine(apply_site_operator(psi0, spin::sigma_z(), k), h,
                    {.dt = 0.01, .policy = {.chi_max = 16}, .krylov = {.max_basis_vectors = 16, .tolerance = 1e-12}});
  for (int i = 0; i < 100; ++i) engine.step();
  const auto c = dynamical_correlator_profile(psi0, engine.state(), gs.energy, 1.0);

  const DenseEvolver ev(dense_hamiltonian(spec, &fit));
  const Eigen::VectorXcd g = ev.ground_state();
  const Eigen::VectorXcd psi_t = ev.evolve(test::embed(spin::sigma_z(), k, n) * g, 1.0);
  for (std::size_t r = 0; r < n; ++r) {
    const cplx ref = ev.evolve(g, 1.0).dot(test::embed(spin::sigma_z(), r, n) * psi_t);
    EXPECT_LE(std::abs(c[r] - ref), 1e-6) << r;
  }
}

TEST(Observables, ConnectedAndDeviationProfiles) {
  const std::size_t n = 6;
  const auto psi = random_mps(test::qubits(n), 4, 8);
  const Eigen::VectorXcd v = to_dense(psi);
  const auto czz = connected_zz_profile(psi, 2);
  const Eigen::MatrixXcd z2 = test::embed(spin::sigma_z(), 2, n);
  for (std::size_t r = 0; r < n; ++r) {
    const Eigen::MatrixXcd zr = test::embed(spin::sigma_z(), r, n);
    const cplx ref = v.dot(zr * z2 * v) - v.dot(zr * v) * v.dot(z2 * v);
    EXPECT_LE(std::abs(czz[r] - ref), 1e-10);
  }
  const auto x0 = local_profile(psi, spin::sigma_x());
  for (auto d : x_deviation_profile(psi, x0)) EXPECT_LE(std::abs(d), 1e-14);
  EXPECT_THROW(x_deviation_profile(psi, {}), ShapeError);
  EXPECT_EQ(parse_observable("connected_zz"), ObservableKind::ConnectedZZ);
  EXPECT_THROW(parse_observable("entropy"), ConfigError);
}
