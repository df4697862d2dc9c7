#include <gtest/gtest.h>

#include <random>
#include <thread>

#include "models.hpp"
#include "ptdvp/parallel.hpp"
#include "support.hpp"

using namespace ptdvp;
using test::all_up;
using test::ising_lr;
using test::ising_nn;
using test::qubits;

namespace {

/// Truncation settings of the published benchmarks.
TruncationPolicy benchmark_policy(std::size_t chi) { return {.chi_max = chi, .w_max = 1e-16, .epsilon = 1e-12}; }

std::vector<std::size_t> sizes_of(const PartitionPlan& plan) { return plan.sizes(); }

std::vector<std::size_t> edge_sizes(std::size_t p, std::size_t first, std::size_t central, std::size_t last) {
  std::vector<std::size_t> s(p, central);
  s.front() = first;
  s.back() = last;
  return s;
}

}  // namespace

// ---------------------------------------------------------------- partitions

TEST(Partition, PublishedIsingTables) {
  EXPECT_EQ(sizes_of(plan_partitions(129, 8, PartitionMode::Published)), edge_sizes(8, 17, 16, 16));
  EXPECT_EQ(sizes_of(plan_partitions(129, 16, PartitionMode::Published)), edge_sizes(16, 9, 8, 8));
  EXPECT_EQ(sizes_of(plan_partitions(129, 24, PartitionMode::Published)), edge_sizes(24, 10, 5, 9));
  EXPECT_EQ(sizes_of(plan_partitions(129, 32, PartitionMode::Published)), edge_sizes(32, 5, 4, 4));
}

TEST(Partition, PublishedXyTables) {
  EXPECT_EQ(sizes_of(plan_partitions(101, 8, PartitionMode::Published)), edge_sizes(8, 15, 12, 14));
  EXPECT_EQ(sizes_of(plan_partitions(101, 16, PartitionMode::Published)), edge_sizes(16, 9, 6, 8));
  EXPECT_EQ(sizes_of(plan_partitions(101, 24, PartitionMode::Published)), edge_sizes(24, 7, 4, 6));
  EXPECT_EQ(sizes_of(plan_partitions(101, 32, PartitionMode::Published)), edge_sizes(32, 6, 3, 5));
}

TEST(Partition, PublishedXxxTables) {
  EXPECT_EQ(sizes_of(plan_partitions(201, 2, PartitionMode::Published)), (std::vector<std::size_t>{101, 100}));
  EXPECT_EQ(sizes_of(plan_partitions(201, 4, PartitionMode::Published)), (std::vector<std::size_t>{85, 16, 16, 84}));
  for (std::size_t p : {8, 16, 24, 32}) EXPECT_EQ(plan_partitions(201, p, PartitionMode::Published).n_sites(), 201u);
  const auto s32 = sizes_of(plan_partitions(201, 32, PartitionMode::Published));
  EXPECT_EQ(s32[0], 33u);
  EXPECT_EQ(s32[1], 32u);
  EXPECT_EQ(s32[15], 2u);
  EXPECT_EQ(s32[31], 32u);
}

TEST(Partition, UniformExamples) {
  EXPECT_EQ(sizes_of(plan_uniform(129, 8)), edge_sizes(8, 17, 16, 16));
  EXPECT_EQ(sizes_of(plan_uniform(101, 16)), edge_sizes(16, 9, 6, 8));
  EXPECT_EQ(sizes_of(plan_uniform(8, 4)), (std::vector<std::size_t>{2, 2, 2, 2}));
  EXPECT_EQ(sizes_of(plan_uniform(9, 1)), (std::vector<std::size_t>{9}));
}

TEST(Partition, UniformAgreesWithIsingAndXyTables) {
  for (std::size_t n : {129, 101})
    for (std::size_t p : {8, 16, 24, 32})
      EXPECT_EQ(sizes_of(plan_uniform(n, p)), sizes_of(plan_published(n, p))) << n << " " << p;
}

TEST(Partition, Errors) {
  EXPECT_THROW(plan_uniform(10, 3), ConfigError);
  EXPECT_THROW(plan_uniform(10, 6), ConfigError);
  EXPECT_THROW(plan_uniform(10, 0), ConfigError);
  EXPECT_THROW(plan_published(130, 8), ConfigError);
  EXPECT_THROW(plan_explicit(10, {4, 4}), ConfigError);
  EXPECT_THROW(plan_explicit(10, {1, 9}), ConfigError);
  EXPECT_THROW(plan_explicit(10, {3, 3, 4}), ConfigError);
  EXPECT_THROW(plan_partitions(10, 2, PartitionMode::Explicit, {5}), ConfigError);
  EXPECT_NO_THROW(plan_explicit(10, {2, 8}));
  EXPECT_THROW(parse_partition_mode("random"), ConfigError);
}

TEST(PartitionProperty, UniformPlansAreValid) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t n = 4 + rng() % 300;
    const std::size_t p = 2 * (1 + rng() % (n / 4));
    const PartitionPlan plan = plan_uniform(n, p);
    ASSERT_EQ(plan.p, p);
    ASSERT_EQ(plan.n_sites(), n);
    std::size_t lo = n, hi = 0;
    for (std::size_t k = 0; k < p; ++k) {
      ASSERT_GE(plan.size_of(k), 2u);
      ASSERT_EQ(plan.first(k), k == 0 ? 0 : plan.last(k - 1) + 1);
      lo = std::min(lo, plan.size_of(k));
      hi = std::max(hi, plan.size_of(k));
      ASSERT_EQ(plan.owner(plan.first(k)), k);
    }
    ASSERT_LE(hi - lo, (n % p + 1) / 2);
  }
}

TEST(Partition, SweepDirections) {
  for (std::size_t p : {2, 4, 6, 8, 16}) {
    const PartitionPlan plan = plan_uniform(4 * p, p);
    const std::size_t c = p / 2;
    EXPECT_FALSE(plan.sweeps_right_first(c - 1)) << p;
    EXPECT_TRUE(plan.sweeps_right_first(c)) << p;
    for (std::size_t k = 0; k + 1 < p; ++k) EXPECT_NE(plan.sweeps_right_first(k), plan.sweeps_right_first(k + 1));
  }
}

// ----------------------------------------------------------------- transport

template <class T>
class TransportConformance : public ::testing::Test {};
using TransportTypes = ::testing::Types<InProcessTransport, SerializingTransport>;
TYPED_TEST_SUITE(TransportConformance, TransportTypes);

TYPED_TEST(TransportConformance, PayloadsRoundTripExactly) {
  TypeParam tr;
  tr.reset(2);
  std::mt19937_64 rng(3);
  const Environment env{test::random_tensor({3, 5, 3}, rng), EnvSide::Right, 7};
  const SiteTensor site(test::random_tensor({3, 2, 4}, rng));
  const PairPayload pair{SiteTensor(test::random_tensor({2, 2, 3}, rng)), BondWeights::from_lambda({0.9, 0.1, 1e-9}),
                         SiteTensor(test::random_tensor({3, 2, 1}, rng))};
  tr.send(1, Direction::ToLeft, {{4, 1, MessageKind::EnvTransfer}, env});
  tr.send(1, Direction::ToLeft, {{4, 1, MessageKind::SiteRequest}, site});
  tr.send(1, Direction::ToRight, {{4, 1, MessageKind::UpdatedPair}, pair});
  tr.send(0, Direction::ToRight, {{4, 0, MessageKind::Handshake}, std::monostate{}});

  const auto e = std::get<Environment>(tr.receive(1, Direction::ToLeft, {4, 1, MessageKind::EnvTransfer}).payload);
  EXPECT_EQ(e.site, 7u);
  EXPECT_EQ(e.side, EnvSide::Right);
  EXPECT_EQ(e.data.dims(), env.data.dims());
  EXPECT_TRUE((e.data.data().array() == env.data.data().array()).all());
  const auto s = std::get<SiteTensor>(tr.receive(1, Direction::ToLeft, {4, 1, MessageKind::SiteRequest}).payload);
  EXPECT_TRUE((s.tensor().data().array() == site.tensor().data().array()).all());
  const auto q = std::get<PairPayload>(tr.receive(1, Direction::ToRight, {4, 1, MessageKind::UpdatedPair}).payload);
  EXPECT_EQ(q.bond.lambda, pair.bond.lambda);
  EXPECT_EQ(q.bond.inv, pair.bond.inv);
  EXPECT_TRUE((q.right.tensor().data().array() == pair.right.tensor().data().array()).all());
  EXPECT_NO_THROW(tr.receive(0, Direction::ToRight, {4, 0, MessageKind::Handshake}));
  EXPECT_EQ(tr.pending(), 0u);
  EXPECT_EQ(tr.ledger().total_messages(), 4u);
  EXPECT_EQ(tr.ledger().count(4, 1, 1, MessageKind::SiteRequest, Direction::ToLeft), 1u);
}

TYPED_TEST(TransportConformance, QueuesAreFifoPerDirection) {
  TypeParam tr;
  tr.reset(1);
  for (std::uint64_t i = 0; i < 5; ++i) tr.send(0, Direction::ToRight, {{i, 0, MessageKind::Handshake}, {}});
  tr.send(0, Direction::ToLeft, {{99, 0, MessageKind::Handshake}, {}});
  for (std::uint64_t i = 0; i < 5; ++i) EXPECT_NO_THROW(tr.receive(0, Direction::ToRight, {i, 0, MessageKind::Handshake}));
  EXPECT_NO_THROW(tr.receive(0, Direction::ToLeft, {99, 0, MessageKind::Handshake}));
}

TYPED_TEST(TransportConformance, TagMismatchIsRejected) {
  TypeParam tr;
  tr.reset(1);
  tr.send(0, Direction::ToRight, {{1, 0, MessageKind::Handshake}, {}});
  EXPECT_THROW(tr.receive(0, Direction::ToRight, {1, 1, MessageKind::Handshake}), TransportError);
  EXPECT_THROW(tr.send(0, Direction::ToRight, {{1, 0, MessageKind::EnvTransfer}, {}}), TransportError);
  EXPECT_THROW(tr.send(3, Direction::ToRight, {{1, 0, MessageKind::Handshake}, {}}), TransportError);
}

TYPED_TEST(TransportConformance, TimeoutAndAbort) {
  TypeParam tr;
  tr.reset(1);
  tr.set_timeout(std::chrono::milliseconds(20));
  EXPECT_THROW(tr.receive(0, Direction::ToLeft, {0, 0, MessageKind::Handshake}), TransportError);

  tr.set_timeout(std::chrono::seconds(30));
  std::thread t([&] {
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
    tr.abort();
  });
  EXPECT_THROW(tr.receive(0, Direction::ToLeft, {0, 0, MessageKind::Handshake}), TransportError);
  t.join();
}

TYPED_TEST(TransportConformance, BlockingReceiveAcrossThreads) {
  TypeParam tr;
  tr.reset(1);
  std::thread t([&] {
    std::this_thread::sleep_for(std::chrono::milliseconds(10));
    tr.send(0, Direction::ToLeft, {{2, 1, MessageKind::Handshake}, {}});
  });
  EXPECT_NO_THROW(tr.receive(0, Direction::ToLeft, {2, 1, MessageKind::Handshake}));
  t.join();
}

TEST(Transport, CorruptBytesRejected) {
  BoundaryMessage m{{1, 0, MessageKind::SiteRequest}, SiteTensor(2, 2, 2)};
  auto bytes = encode_message(m);
  EXPECT_NO_THROW(decode_message(bytes));
  auto shorter = bytes;
  shorter.pop_back();
  EXPECT_THROW(decode_message(shorter), TransportError);
  auto longer = bytes;
  longer.push_back(std::byte{0});
  EXPECT_THROW(decode_message(longer), TransportError);
  EXPECT_THROW(make_transport("mpi"), ConfigError);
}

TEST(Transport, LedgerDetectsMissingMessages) {
  MessageLedger ledger;
  auto full_half = [&](int half, std::size_t b) {
    ledger.record(b, Direction::ToRight, {0, static_cast<std::uint8_t>(half), MessageKind::EnvTransfer}, 0);
    ledger.record(b, Direction::ToLeft, {0, static_cast<std::uint8_t>(half), MessageKind::EnvTransfer}, 0);
    ledger.record(b, Direction::ToLeft, {0, static_cast<std::uint8_t>(half), MessageKind::SiteRequest}, 0);
    ledger.record(b, Direction::ToRight, {0, static_cast<std::uint8_t>(half), MessageKind::UpdatedPair}, 0);
  };
  full_half(0, 0);
  full_half(1, 0);
  EXPECT_NO_THROW(ledger.verify_step(0, 1));
  EXPECT_THROW(ledger.verify_step(0, 2), TransportError);
  ledger.record(0, Direction::ToRight, {0, 1, MessageKind::UpdatedPair}, 0);
  EXPECT_THROW(ledger.verify_step(0, 1), TransportError);
}

// -------------------------------------------------------------------- engine

TEST(ParallelTdvp, SingleWorkerIsBitwiseSerial) {
  const std::size_t n = 8;
  const auto fit = fit_power_law(2.3, n - 1, 3);
  const auto h = build_mpo(ising_lr(n, 0.27, 3), &fit);
  const auto psi0 = random_mps(qubits(n), 4, 5);
  const EvolutionConfig cfg{.dt = 0.05, .policy = {.chi_max = 8}, .krylov = {}};
  SerialTdvp serial(psi0, h, cfg);
  ParallelTdvp parallel(psi0, h, cfg, plan_uniform(n, 1));
  for (int i = 0; i < 5; ++i) {
    const auto a = serial.step();
    const auto b = parallel.step();
    EXPECT_EQ(a.discarded_weight, b.total.discarded_weight);
    EXPECT_EQ(a.krylov_calls, b.total.krylov_calls);
  }
  EXPECT_TRUE(test::bitwise_equal(serial.state(), parallel.gather()));
  EXPECT_EQ(serial.w_total(), parallel.w_total());
}

TEST(ParallelTdvp, ZeroHamiltonianTwoWorkers) {
  const std::size_t n = 8;
  const auto psi0 = random_mps(qubits(n), 4, 9);
  ParallelTdvp engine(psi0, zero_mpo(psi0.phys_dims()), {.dt = 0.05}, plan_uniform(n, 2));
  for (int i = 0; i < 4; ++i) engine.step();
  EXPECT_LE(infidelity(engine.gather(), psi0), 1e-12);
  EXPECT_LE(engine.w_total(), 1e-28);
  const auto& tr = dynamic_cast<const InProcessTransport&>(engine.transport());
  EXPECT_EQ(tr.pending(), 0u);
  EXPECT_EQ(tr.ledger().total_messages(), 4u * 2u * 4u);
}

TEST(ParallelTdvp, NearestNeighbourQuenchMatchesSerial) {
  const std::size_t n = 16;
  const auto h = build_mpo(ising_nn(n, 0.27), nullptr);
  const EvolutionConfig cfg{.dt = 0.01, .policy = benchmark_policy(64), .krylov = {}};
  SerialTdvp serial(all_up(n), h, cfg);
  ParallelTdvp parallel(all_up(n), h, cfg, plan_uniform(n, 2));
  for (int i = 0; i < 100; ++i) {
    serial.step();
    parallel.step();
  }
  EXPECT_LE(infidelity(parallel.gather(), serial.state()), 1e-6);
  EXPECT_LE(norm_error(parallel.gather()), 1e-8);
}

TEST(ParallelTdvp, LongRangeQuenchFourWorkersMatchesSerial) {
  const std::size_t n = 20;
  const auto fit = fit_power_law(2.3, n - 1, 4);
  const auto h = build_mpo(ising_lr(n, 0.27, 4), &fit);
  const EvolutionConfig cfg{.dt = 0.02, .policy = benchmark_policy(32), .krylov = {}};
  SerialTdvp serial(all_up(n), h, cfg);
  ParallelTdvp parallel(all_up(n), h, cfg, plan_uniform(n, 4));
  for (int i = 0; i < 50; ++i) {
    serial.step();
    parallel.step();
  }
  const double inf = infidelity(parallel.gather(), serial.state());
  EXPECT_LE(inf, std::max(10.0 * serial.w_total(), 1e-8)) << "w_total " << serial.w_total();
}

TEST(ParallelTdvp, EnergyAndNormConserved) {
  const std::size_t n = 12;
  const auto fit = fit_power_law(2.3, n - 1, 3);
  const auto h = build_mpo(ising_lr(n, 0.27, 3), &fit);
  ParallelTdvp engine(all_up(n), h, {.dt = 0.02, .policy = benchmark_policy(64), .krylov = {}}, plan_uniform(n, 4));
  const double e0 = expectation(all_up(n), h).real();
  double prev = 1.0;
  for (int i = 0; i < 50; ++i) {
    engine.step();
    const double nrm = total_norm(engine.gather());
    EXPECT_LE(std::abs(nrm - prev), 1e-8);
    prev = nrm;
  }
  EXPECT_LE(std::abs(expectation(engine.gather(), h).real() - e0) / std::abs(e0), 1e-6);
}

TEST(ParallelTdvp, DeterministicReplayAndTransportsAgree) {
  const std::size_t n = 12;
  const auto fit = fit_power_law(2.3, n - 1, 3);
  const auto h = build_mpo(ising_lr(n, 0.27, 3), &fit);
  const EvolutionConfig cfg{.dt = 0.05, .policy = {.chi_max = 6}, .krylov = {}};
  auto run = [&](std::unique_ptr<Transport> tr) {
    ParallelTdvp engine(all_up(n), h, cfg, plan_uniform(n, 4), std::move(tr));
    for (int i = 0; i < 10; ++i) engine.step();
    return std::make_pair(engine.gather(), engine.w_total());
  };
  const auto a = run(std::make_unique<InProcessTransport>());
  const auto b = run(std::make_unique<InProcessTransport>());
  const auto c = run(std::make_unique<SerializingTransport>());
  EXPECT_TRUE(test::bitwise_equal(a.first, b.first));
  EXPECT_TRUE(test::bitwise_equal(a.first, c.first));
  EXPECT_EQ(a.second, b.second);
  EXPECT_EQ(local_profile(a.first, spin::sigma_z()), local_profile(b.first, spin::sigma_z()));
  EXPECT_GT(a.second, 0.0);
}

TEST(ParallelTdvp, MessageSizesScaleAsBoundaryData) {
  const std::size_t n = 12;
  const auto fit = fit_power_law(2.3, n - 1, 3);
  const auto h = build_mpo(ising_lr(n, 0.27, 3), &fit);
  ParallelTdvp engine(random_mps(qubits(n), 8, 2), h, {.dt = 0.02, .policy = {.chi_max = 8}, .krylov = {}},
                      plan_uniform(n, 2));
  engine.step();
  const std::size_t chi = 8, m = h.max_bond(), d = 2;
  // per half: two environments, one site, one updated pair
  const std::size_t bound = 2 * (2 * chi * chi * m + 3 * chi * chi * d) + chi;
  EXPECT_LE(engine.transport().ledger().total_scalars(), 2 * bound);
}

TEST(ParallelTdvp, PartitionSweepCountsMatchSerialWorkPlusBoundaries) {
  const std::size_t n = 16;
  const auto h = build_mpo(ising_nn(n, 0.27), nullptr);
  for (std::size_t p : {1, 2, 4, 8}) {
    ParallelTdvp engine(all_up(n), h, {.dt = 0.01}, plan_uniform(n, p));
    const auto r = engine.step();
    // every bond gets two pair updates per step, except a chain end reached
    // at the end of the first half, where the two are merged into one
    const auto& plan = engine.plan();
    const std::size_t merged = p == 1 ? 1 : (plan.sweeps_right_first(0) ? 0 : 1) + (plan.sweeps_right_first(p - 1) ? 1 : 0);
    EXPECT_EQ(r.total.svd_count, 2 * (n - 1) - merged) << p;
    EXPECT_EQ(r.total.krylov_calls, 2 * (n - 1) - merged + 2 * (n - 2)) << p;
  }
}

TEST(ParallelTdvp, FailingTransportIsFatalAndReported) {
  class DroppingTransport final : public Transport {
   public:
    void reset(std::size_t n) override { inner_.reset(n); }
    void send(std::size_t b, Direction d, BoundaryMessage m) override {
      if (m.tag.kind == MessageKind::UpdatedPair) return;
      inner_.send(b, d, std::move(m));
    }
    BoundaryMessage receive(std::size_t b, Direction d, const MessageTag& t) override { return inner_.receive(b, d, t); }
    void abort() override { inner_.abort(); }
    std::string name() const override { return "dropping"; }
    InProcessTransport inner_;
  };
  const std::size_t n = 8;
  auto tr = std::make_unique<DroppingTransport>();
  tr->inner_.set_timeout(std::chrono::milliseconds(200));
  ParallelTdvp engine(all_up(n), build_mpo(ising_nn(n, 0.3), nullptr), {.dt = 0.01}, plan_uniform(n, 2),
                      std::move(tr));
  EXPECT_THROW(engine.step(), TransportError);
  EXPECT_THROW(engine.step(), ConfigError);
}

TEST(ParallelTdvp, RejectsMismatchedPlan) {
  const auto h = build_mpo(ising_nn(8, 0.3), nullptr);
  EXPECT_THROW(ParallelTdvp(all_up(8), h, {}, plan_uniform(10, 2)), ConfigError);
}

TEST(ParallelTdvp, HalvingDtReducesDistanceToSerial) {
  // chi_max = 4 keeps both engines off the exact solution, so the gap between
  // the two splittings is visible above round-off
  const std::size_t n = 12;
  const auto fit = fit_power_law(2.3, n - 1, 3);
  const auto h = build_mpo(ising_lr(n, 0.27, 3), &fit);
  std::vector<double> inf;
  for (double dt : {0.04, 0.02, 0.01}) {
    const EvolutionConfig cfg{.dt = dt, .policy = benchmark_policy(4), .krylov = {.max_basis_vectors = 16, .tolerance = 1e-12}};
    SerialTdvp serial(all_up(n), h, cfg);
    ParallelTdvp parallel(all_up(n), h, cfg, plan_uniform(n, 2));
    for (int i = 0; i < static_cast<int>(std::lround(2.0 / dt)); ++i) {
      serial.step();
      parallel.step();
    }
    inf.push_back(test::aligned_infidelity(to_dense(parallel.gather()), to_dense(serial.state())));
  }
  EXPECT_GT(inf[2], 1e-14);
  EXPECT_LT(inf[1], inf[0]);
  EXPECT_LT(inf[2], inf[1]);
}

// ----------------------------------------------------------------- stability

TEST(Stability, VelocityCriterion) {
  auto a = check_velocity_criterion(1.0, 100, 4, 0.01);
  EXPECT_NEAR(a.ratio, 4e-4, 1e-16);
  EXPECT_FALSE(a.warning);
  auto b = check_velocity_criterion(1000.0, 20, 10, 0.1);
  EXPECT_NEAR(b.ratio, 50.0, 1e-12);
  EXPECT_TRUE(b.warning);
  EXPECT_THROW(check_velocity_criterion(0.0, 20, 10, 0.1), ConfigError);
}

TEST(Stability, ReorthonormalizeTriggers) {
  const auto fresh = all_up(6);
  EXPECT_FALSE(maybe_reorthonormalize(fresh, {}, 10).did_run);

  auto psi = random_mps(qubits(6), 4, 3);
  std::vector<SiteTensor> sites = psi.sites();
  sites[2] = SiteTensor(Tensor(sites[2].tensor().dims(), sites[2].tensor().data() * 1.01));
  const InvCanonicalMps scaled(sites, psi.bonds());
  const StabilityConfig st{.epsilon = 1e-12, .norm_error_threshold = 1e-3, .reorth_interval_min = 5};
  EXPECT_FALSE(maybe_reorthonormalize(scaled, st, 2).did_run);
  const auto r = maybe_reorthonormalize(scaled, st, 5);
  ASSERT_TRUE(r.did_run);
  EXPECT_NEAR(r.norm_error_before, 0.01, 1e-3);
  EXPECT_LE(r.norm_error_after, 1e-10);
  EXPECT_LE(infidelity(*r.state, psi), 1e-10);
  EXPECT_THROW(maybe_reorthonormalize(fresh, {.epsilon = 1e-12, .norm_error_threshold = 0.0}, 1), ConfigError);
}

TEST(Stability, ReorthonormalizeRestoresEngine) {
  const std::size_t n = 8;
  const auto h = build_mpo(ising_nn(n, 0.3), nullptr);
  ParallelTdvp engine(all_up(n), h, {.dt = 0.02}, plan_uniform(n, 2));
  engine.step();
  std::vector<SiteTensor> sites = engine.gather().sites();
  sites[0] = SiteTensor(Tensor(sites[0].tensor().dims(), sites[0].tensor().data() * 1.01));
  const InvCanonicalMps scaled(sites, engine.gather().bonds());
  const auto r = maybe_reorthonormalize(scaled, {.epsilon = 1e-12, .norm_error_threshold = 1e-4}, 1);
  ASSERT_TRUE(r.did_run);
  engine.reset_state(*r.state);
  engine.step();
  EXPECT_LE(norm_error(engine.gather()), 1e-8);
}
