#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "ptdvp/mps.hpp"
#include "ptdvp/spin.hpp"
#include "support.hpp"

using namespace ptdvp;

namespace {

std::vector<std::size_t> qubits(std::size_t n) { return std::vector<std::size_t>(n, 2); }

InvCanonicalMps bell_pair() {
  // Psi_0 = A Lambda with A = identity, Lambda = (1,1)/sqrt2; Psi_1 = Lambda B with B = identity.
  const double s = 1.0 / std::sqrt(2.0);
  SiteTensor a(1, 2, 2), b(2, 2, 1);
  a(0, 0, 0) = s;
  a(0, 1, 1) = s;
  b(0, 0, 0) = s;
  b(1, 1, 0) = s;
  return {{a, b}, {BondWeights::from_lambda({s, s})}};
}

/// Inserts X and X^-1 on bond j: Psi_j -> Psi_j X, V_j -> 1, Psi_{j+1} -> V_j X^-1 Psi_{j+1} ... expressed
/// in a form with unit bond weights so that to_dense must be unchanged.
InvCanonicalMps perturb_gauge(const InvCanonicalMps& psi, std::size_t j, std::mt19937_64& rng) {
  const auto chi = static_cast<Eigen::Index>(psi.bond(j).size());
  Eigen::MatrixXcd x = test::random_matrix(chi, chi, rng) + 3.0 * Eigen::MatrixXcd::Identity(chi, chi);
  const Eigen::MatrixXcd xinv = x.inverse();
  std::vector<SiteTensor> sites = psi.sites();
  std::vector<BondWeights> bonds = psi.bonds();
  const Tensor left = left_form(psi, j);
  RowMatrix l = left.matrix(2) * x;
  sites[j] = SiteTensor(Tensor(left.dims(), Eigen::Map<Eigen::VectorXcd>(l.data(), l.size())));
  const Tensor& right = psi.site(j + 1).tensor();
  RowMatrix r = xinv * right.matrix(1);
  sites[j + 1] = SiteTensor(Tensor(right.dims(), Eigen::Map<Eigen::VectorXcd>(r.data(), r.size())));
  bonds[j] = BondWeights::unit(static_cast<std::size_t>(chi));
  return {sites, bonds};
}

}  // namespace

TEST(ProductState, AllUp) {
  const auto psi = from_product_state({{spin::up(), spin::up(), spin::up()}});
  EXPECT_EQ(max_bond(psi), 1u);
  EXPECT_NEAR(overlap(psi, psi).real(), 1.0, 1e-15);
  for (const auto& b : psi.bonds()) EXPECT_EQ(b.lambda, std::vector<double>{1.0});
}

TEST(ProductState, SingleSite) {
  const auto psi = from_product_state({{spin::down()}});
  EXPECT_EQ(psi.size(), 1u);
  EXPECT_TRUE(psi.bonds().empty());
  EXPECT_NEAR(total_norm(psi), 1.0, 1e-15);
}

TEST(ProductState, DenseIsKronecker) {
  ProductStateSpec spec;
  Eigen::VectorXcd dense = Eigen::VectorXcd::Ones(1);
  for (int j = 0; j < 8; ++j) {
    const auto v = j % 2 ? spin::up() : spin::down();
    spec.local_states.push_back(v);
    dense = test::kron(dense, v);
  }
  EXPECT_LE((to_dense(from_product_state(spec)) - dense).norm(), 1e-14);
}

TEST(ProductState, RejectsUnnormalized) {
  EXPECT_THROW(from_product_state({{Eigen::Vector2cd(1.0, 1.0)}}), ConfigError);
}

TEST(ToDense, BasisOrdering) {
  const Eigen::VectorXcd v = to_dense(from_product_state({{spin::up(), spin::up()}}));
  ASSERT_EQ(v.size(), 4);
  EXPECT_EQ(v[3], cplx(1.0));
  EXPECT_NEAR(v.head(3).norm(), 0.0, 0.0);
}

TEST(ToDense, BellPair) {
  const Eigen::VectorXcd v = to_dense(bell_pair());
  const double s = 1.0 / std::sqrt(2.0);
  EXPECT_NEAR(std::abs(v[0] - s), 0.0, 1e-15);
  EXPECT_NEAR(std::abs(v[3] - s), 0.0, 1e-15);
  EXPECT_NEAR(std::abs(v[1]) + std::abs(v[2]), 0.0, 1e-15);
  EXPECT_EQ(max_bond(bell_pair()), 2u);
}

TEST(ToDense, CapEnforced) {
  const auto psi = from_product_state({std::vector<Eigen::VectorXcd>(17, spin::up())});
  EXPECT_THROW(to_dense(psi), ConfigError);
  EXPECT_NO_THROW(to_dense(psi, std::size_t{1} << 17));
}

TEST(RandomMps, OverlapMatchesDense) {
  const auto a = random_mps(qubits(6), 4, 1);
  const auto b = random_mps(qubits(6), 5, 2);
  const Eigen::VectorXcd da = to_dense(a), db = to_dense(b);
  EXPECT_NEAR(std::abs(overlap(a, a) - da.squaredNorm()), 0.0, 1e-10);
  EXPECT_NEAR(std::abs(overlap(a, b) - da.dot(db)), 0.0, 1e-10);
}

TEST(Overlap, OrthogonalProducts) {
  const auto a = from_product_state({{spin::down(), spin::down()}});
  const auto b = from_product_state({{spin::up(), spin::up()}});
  EXPECT_EQ(overlap(a, b), cplx(0.0));
  EXPECT_NEAR(std::abs(overlap(a, a) - 1.0), 0.0, 1e-15);
  EXPECT_THROW(overlap(a, from_product_state({{spin::up()}})), ShapeError);
}

TEST(Infidelity, Cases) {
  const auto a = random_mps(qubits(5), 4, 3);
  EXPECT_NEAR(infidelity(a, a), 0.0, 1e-14);
  const auto phased = apply_site_operator(a, std::exp(cplx(0, 0.7)) * Eigen::MatrixXcd::Identity(2, 2), 2);
  EXPECT_NEAR(infidelity(a, phased), 0.0, 1e-14);
  const auto p0 = from_product_state({{spin::down(), spin::down()}});
  const auto p1 = from_product_state({{spin::down(), spin::up()}});
  EXPECT_NEAR(infidelity(p0, p1), 1.0, 1e-15);
}

TEST(Orthonormalize, ProductStateUnchanged) {
  const auto psi = from_product_state({{spin::up(), spin::down(), spin::up()}});
  const auto r = orthonormalize(psi, {});
  EXPECT_EQ(r.total_discarded, 0.0);
  EXPECT_NEAR(infidelity(psi, r.state), 0.0, 1e-15);
  EXPECT_EQ(max_bond(r.state), 1u);
}

TEST(Orthonormalize, RemovesScale) {
  auto psi = random_mps(qubits(6), 4, 4);
  psi.site(2).tensor() *= cplx(3.0);
  const auto r = orthonormalize(psi, {});
  EXPECT_NEAR(total_norm(r.state), 1.0, 1e-12);
}

TEST(Orthonormalize, ZeroStateRejected) {
  auto psi = from_product_state({{spin::up(), spin::up()}});
  psi.site(1).tensor() *= cplx(0.0);
  EXPECT_THROW(orthonormalize(psi, {}), NumericalError);
}

TEST(OrthonormalizeProperty, GaugeInvarianceOfDenseVector) {
  std::mt19937_64 rng(21);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto psi = random_mps(qubits(6), 6, seed);
    const std::size_t j = seed % 5;
    const auto perturbed = perturb_gauge(psi, j, rng);
    EXPECT_LE((to_dense(perturbed) - to_dense(psi)).norm(), 1e-9);
    const auto r = orthonormalize(perturbed, {.chi_max = 64, .w_max = 0.0, .epsilon = 0.0});
    EXPECT_LE(test::dense_infidelity(to_dense(r.state), to_dense(psi)), 1e-12);
    EXPECT_LE(gauge_error(r.state), 1e-10);
  }
}

TEST(MpsProperty, EverySiteIsCenterAndWeightsInvert) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto psi = random_mps(std::vector<std::size_t>{2, 3, 2, 2, 3, 2, 2}, 1 + seed % 6, seed);
    EXPECT_LE(gauge_error(psi), 1e-8);
    for (const auto& b : psi.bonds())
      for (std::size_t i = 0; i < b.size(); ++i) EXPECT_NEAR(b.lambda[i] * b.inv[i], 1.0, 1e-12);
    const auto other = random_mps(psi.phys_dims(), 3, seed + 100);
    EXPECT_NEAR(std::abs(overlap(psi, other) - std::conj(overlap(other, psi))), 0.0, 1e-12);
  }
}

TEST(ExpectLocal, ProductState) {
  const auto psi = from_product_state({std::vector<Eigen::VectorXcd>(4, spin::up())});
  for (std::size_t j = 0; j < 4; ++j) {
    EXPECT_NEAR(std::abs(expect_local(psi, spin::sigma_z(), j) - 1.0), 0.0, 1e-15);
    EXPECT_NEAR(std::abs(expect_local(psi, spin::sigma_x(), j)), 0.0, 1e-15);
  }
  EXPECT_THROW(expect_local(psi, spin::sigma_z(), 4), ConfigError);
}

TEST(ExpectLocal, MatchesDense) {
  const auto psi = random_mps(qubits(6), 5, 9);
  const Eigen::VectorXcd v = to_dense(psi);
  const cplx ref = v.dot(test::embed(spin::sigma_z(), 3, 6) * v) / v.squaredNorm();
  EXPECT_NEAR(std::abs(expect_local(psi, spin::sigma_z(), 3) - ref), 0.0, 1e-10);
  const auto prof = local_profile(psi, spin::sigma_y());
  for (std::size_t r = 0; r < 6; ++r) {
    const cplx ry = v.dot(test::embed(spin::sigma_y(), r, 6) * v) / v.squaredNorm();
    EXPECT_NEAR(std::abs(prof[r] - ry), 0.0, 1e-10);
  }
}

TEST(ExpectTwoPoint, FerromagnetConnectedIsZero) {
  const auto psi = from_product_state({std::vector<Eigen::VectorXcd>(5, spin::up())});
  const cplx zz = expect_two_point(psi, spin::sigma_z(), 1, spin::sigma_z(), 3);
  EXPECT_NEAR(std::abs(zz - 1.0), 0.0, 1e-15);
  const cplx conn = zz - expect_local(psi, spin::sigma_z(), 1) * expect_local(psi, spin::sigma_z(), 3);
  EXPECT_NEAR(std::abs(conn), 0.0, 1e-15);
  EXPECT_THROW(expect_two_point(psi, spin::sigma_z(), 2, spin::sigma_z(), 2), ConfigError);
}

TEST(ExpectTwoPoint, MatchesDenseEitherOrder) {
  const auto psi = random_mps(qubits(6), 6, 10);
  const Eigen::VectorXcd v = to_dense(psi);
  const Eigen::MatrixXcd op = test::embed(spin::sigma_x(), 1, 6) * test::embed(spin::sigma_y(), 4, 6);
  const cplx ref = v.dot(op * v) / v.squaredNorm();
  EXPECT_NEAR(std::abs(expect_two_point(psi, spin::sigma_x(), 1, spin::sigma_y(), 4) - ref), 0.0, 1e-10);
  EXPECT_NEAR(std::abs(expect_two_point(psi, spin::sigma_y(), 4, spin::sigma_x(), 1) - ref), 0.0, 1e-10);
}

TEST(CorrelationProfile, MatchesDense) {
  auto psi = random_mps(qubits(6), 6, 11);
  // break exact centering so that the full zipper is what is being tested
  psi.site(2).tensor() *= cplx(1.3);
  const Eigen::VectorXcd v = to_dense(psi);
  const auto prof = correlation_profile(psi, spin::sigma_z(), 2, spin::sigma_x());
  for (std::size_t r = 0; r < 6; ++r) {
    const Eigen::MatrixXcd op = test::embed(spin::sigma_z(), 2, 6) * test::embed(spin::sigma_x(), r, 6);
    EXPECT_NEAR(std::abs(prof[r] - v.dot(op * v) / v.squaredNorm()), 0.0, 1e-10) << r;
  }
}

TEST(Shape, InconsistentBondsRejected) {
  SiteTensor a(1, 2, 2), b(3, 2, 1);
  EXPECT_THROW(InvCanonicalMps({a, b}, {BondWeights::unit(2)}), ShapeError);
  EXPECT_THROW(BondWeights::from_lambda({1.0, 0.0}), NumericalError);
}
