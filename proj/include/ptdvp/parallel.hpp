#pragma once

// Parallel two-site TDVP. The chain is split into contiguous partitions, one
// worker thread per partition. Neighbouring workers sweep in opposite
// directions and meet at shared boundaries, where the left worker evolves the
// boundary pair after an exchange of environments and the right worker's
// boundary site. The second half of a step reverses every direction.

#include <chrono>
#include <exception>
#include <memory>
#include <optional>
#include <thread>
#include <vector>

#include "ptdvp/environment.hpp"
#include "ptdvp/local_update.hpp"
#include "ptdvp/partition.hpp"
#include "ptdvp/tdvp.hpp"
#include "ptdvp/transport.hpp"

namespace ptdvp {

/// Tensors, environments and counters owned by one worker.
struct WorkerState {
  std::size_t rank = 0;
  std::size_t first = 0, last = 0;  // owned sites, inclusive
  bool right_first = true;          // sweep direction in the first half of a step
  std::vector<SiteTensor> sites;    // sites first..last
  std::vector<BondWeights> bonds;   // bonds first..min(last, N-2); bond `last` is a boundary owned here
  std::optional<BondWeights> left_edge;  // read-only copy of bond first-1
  EnvCache cache;                   // indexed by global site; only entries near owned sites are kept

  SiteTensor& site(std::size_t j) { return sites.at(j - first); }
  const SiteTensor& site(std::size_t j) const { return sites.at(j - first); }
  BondWeights& bond(std::size_t j) { return bonds.at(j - first); }
  const BondWeights& bond(std::size_t j) const { return bonds.at(j - first); }
};

struct ParallelStepReport {
  std::vector<UpdateStats> per_worker;
  std::vector<double> wall_seconds;
  UpdateStats total;
};

struct ParallelOptions {
  std::chrono::milliseconds timeout{std::chrono::hours(1)};
  bool verify_messages = true;
};

class ParallelTdvp {
 public:
  ParallelTdvp(InvCanonicalMps psi, Mpo h, EvolutionConfig cfg, PartitionPlan plan,
               std::unique_ptr<Transport> transport = std::make_unique<InProcessTransport>(),
               ParallelOptions options = {})
      : h_(std::move(h)), cfg_(cfg), plan_(std::move(plan)), transport_(std::move(transport)), options_(options) {
    cfg_.validate();
    plan_.validate();
    detail::require(transport_ != nullptr, "ParallelTdvp: null transport");
    detail::require(plan_.n_sites() == h_.size(), "ParallelTdvp: partition plan does not cover the chain");
    transport_->set_timeout(options_.timeout);
    scatter(psi);
  }

  /// One timestep on all workers. Throws the first worker error; after an
  /// error the engine refuses further steps until reset_state.
  ParallelStepReport step() {
    if (failed_) throw ConfigError("ParallelTdvp: engine is in a failed state; call reset_state");
    const std::size_t p = plan_.p;
    ParallelStepReport report;
    report.per_worker.assign(p, UpdateStats{});
    report.wall_seconds.assign(p, 0.0);
    std::vector<std::exception_ptr> errors(p);

    auto run = [&](std::size_t k) {
      const auto t0 = std::chrono::steady_clock::now();
      try {
        for (int half = 0; half < 2; ++half) half_sweep(workers_[k], half, report.per_worker[k]);
      } catch (...) {
        errors[k] = std::current_exception();
        transport_->abort();
      }
      report.wall_seconds[k] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    };

    if (p == 1) {
      run(0);
    } else {
      std::vector<std::thread> threads;
      threads.reserve(p);
      for (std::size_t k = 0; k < p; ++k) threads.emplace_back(run, k);
      for (auto& t : threads) t.join();
    }
    rethrow_first(errors);
    if (options_.verify_messages && p > 1) {
      try {
        transport_->ledger().verify_step(steps_, p - 1);
      } catch (...) {
        failed_ = true;
        throw;
      }
    }
    for (const auto& s : report.per_worker) report.total.add(s);
    w_total_ += report.total.discarded_weight;
    ++steps_;
    return report;
  }

  /// Copies the distributed state into one MPS.
  InvCanonicalMps gather() const {
    std::vector<SiteTensor> sites;
    std::vector<BondWeights> bonds;
    for (const auto& w : workers_) {
      sites.insert(sites.end(), w.sites.begin(), w.sites.end());
      bonds.insert(bonds.end(), w.bonds.begin(), w.bonds.end());
    }
    return InvCanonicalMps(std::move(sites), std::move(bonds));
  }
  InvCanonicalMps state() const { return gather(); }

  /// Replaces the state and recomputes every environment sequentially.
  void reset_state(InvCanonicalMps psi) {
    scatter(psi);
    failed_ = false;
  }

  const Mpo& hamiltonian() const { return h_; }
  const EvolutionConfig& config() const { return cfg_; }
  const PartitionPlan& plan() const { return plan_; }
  const Transport& transport() const { return *transport_; }
  const std::vector<WorkerState>& workers() const { return workers_; }
  double w_total() const { return w_total_; }
  std::size_t steps() const { return steps_; }

 private:
  Mpo h_;
  EvolutionConfig cfg_;
  PartitionPlan plan_;
  std::unique_ptr<Transport> transport_;
  ParallelOptions options_;
  std::vector<WorkerState> workers_;
  double w_total_ = 0.0;
  std::size_t steps_ = 0;
  bool failed_ = false;

  std::size_t n() const { return h_.size(); }

  void rethrow_first(const std::vector<std::exception_ptr>& errors) {
    // a worker's own failure is more informative than the aborts it caused
    std::exception_ptr first_transport;
    for (const auto& e : errors) {
      if (!e) continue;
      failed_ = true;
      try {
        std::rethrow_exception(e);
      } catch (const TransportError&) {
        if (!first_transport) first_transport = e;
      } catch (...) {
        throw;
      }
    }
    if (first_transport) std::rethrow_exception(first_transport);
  }

  void scatter(const InvCanonicalMps& psi) {
    detail::check_shapes(psi, h_);
    detail::require(psi.size() >= 2, "ParallelTdvp: need at least two sites");
    const EnvCache betas = init_left_environments(psi, h_);
    const EnvCache gammas = init_right_environments(psi, h_);
    const std::size_t last_bond = n() - 2;
    workers_.assign(plan_.p, WorkerState{});
    for (std::size_t k = 0; k < plan_.p; ++k) {
      WorkerState& w = workers_[k];
      w.rank = k;
      w.first = plan_.first(k);
      w.last = plan_.last(k);
      w.right_first = plan_.sweeps_right_first(k);
      w.sites.assign(psi.sites().begin() + static_cast<std::ptrdiff_t>(w.first),
                     psi.sites().begin() + static_cast<std::ptrdiff_t>(w.last) + 1);
      const std::size_t bond_end = std::min(w.last, last_bond);
      w.bonds.assign(psi.bonds().begin() + static_cast<std::ptrdiff_t>(w.first),
                     psi.bonds().begin() + static_cast<std::ptrdiff_t>(bond_end) + 1);
      if (w.first > 0) w.left_edge = psi.bond(w.first - 1);
      w.cache = EnvCache(n());
      for (std::size_t j = w.first; j <= w.last; ++j) {
        if (w.right_first) w.cache.right[j] = gammas.right[j];
        else w.cache.left[j] = betas.left[j];
      }
      w.cache.left[0] = left_boundary();
      w.cache.right[n() - 1] = right_boundary(n());
    }
    transport_->reset(plan_.p > 1 ? plan_.p - 1 : 0);
  }

  MessageTag tag(int half, MessageKind kind) const { return {steps_, static_cast<std::uint8_t>(half), kind}; }

  void pair_update(WorkerState& w, std::size_t j, cplx tau, UpdateStats& stats) const {
    const Tensor theta = form_theta(w.site(j), w.bond(j), w.site(j + 1));
    const Tensor evolved =
        evolve_two_site(w.cache.beta(j), h_[j], h_[j + 1], w.cache.gamma(j + 1), theta, tau, cfg_.krylov, stats);
    SplitResult s = split_theta(evolved, cfg_.policy);
    stats.discarded_weight += s.discarded_weight;
    ++stats.svd_count;
    w.site(j) = std::move(s.left);
    w.bond(j) = std::move(s.bond);
    w.site(j + 1) = std::move(s.right);
  }

  void site_update(WorkerState& w, std::size_t j, UpdateStats& stats) const {
    const cplx bwd(0.0, 0.5 * cfg_.dt);
    w.site(j) = evolve_one_site(w.cache.beta(j), h_[j], w.cache.gamma(j), w.site(j), bwd, cfg_.krylov, stats);
  }

  /// Left side of the handshake at bond e = w.last. The boundary pair is
  /// evolved here and the result sent back.
  void handshake_as_left(WorkerState& w, int half, bool backward, UpdateStats& stats) {
    const std::size_t e = w.last, b = w.rank;
    transport_->send(b, Direction::ToRight, {tag(half, MessageKind::EnvTransfer), w.cache.beta(e)});
    Environment gamma = std::get<Environment>(
        transport_->receive(b, Direction::ToLeft, tag(half, MessageKind::EnvTransfer)).payload);
    SiteTensor right = std::get<SiteTensor>(
        transport_->receive(b, Direction::ToLeft, tag(half, MessageKind::SiteRequest)).payload);
    detail::require_shape(gamma.side == EnvSide::Right && gamma.site == e + 1, "handshake: wrong environment received");

    const Tensor theta = form_theta(w.site(e), w.bond(e), right);
    const cplx tau(0.0, -0.5 * cfg_.dt);
    const Tensor evolved = evolve_two_site(w.cache.beta(e), h_[e], h_[e + 1], gamma, theta, tau, cfg_.krylov, stats);
    SplitResult s = split_theta(evolved, cfg_.policy);
    stats.discarded_weight += s.discarded_weight;
    ++stats.svd_count;
    w.site(e) = s.left;
    w.bond(e) = s.bond;
    transport_->send(b, Direction::ToRight,
                     {tag(half, MessageKind::UpdatedPair), PairPayload{std::move(s.left), s.bond, s.right}});
    if (backward) {
      w.cache.right[e] = update_right_environment(gamma, s.right, w.bond(e), h_[e + 1]);
      site_update(w, e, stats);
    }
  }

  /// Right side of the handshake at bond first-1.
  void handshake_as_right(WorkerState& w, int half, bool backward, UpdateStats& stats) {
    const std::size_t s = w.first, b = w.rank - 1;
    transport_->send(b, Direction::ToLeft, {tag(half, MessageKind::EnvTransfer), w.cache.gamma(s)});
    transport_->send(b, Direction::ToLeft, {tag(half, MessageKind::SiteRequest), w.site(s)});
    Environment beta = std::get<Environment>(
        transport_->receive(b, Direction::ToRight, tag(half, MessageKind::EnvTransfer)).payload);
    PairPayload pair = std::get<PairPayload>(
        transport_->receive(b, Direction::ToRight, tag(half, MessageKind::UpdatedPair)).payload);
    detail::require_shape(beta.side == EnvSide::Left && beta.site == s - 1, "handshake: wrong environment received");
    w.site(s) = std::move(pair.right);
    w.left_edge = pair.bond;
    if (backward) {
      w.cache.left[s] = update_left_environment(beta, pair.left, pair.bond, h_[s - 1]);
      site_update(w, s, stats);
    }
  }

  void half_sweep(WorkerState& w, int half, UpdateStats& stats) {
    const bool right = (half == 0) == w.right_first;
    const std::size_t last_site = n() - 1;
    const cplx fwd_half(0.0, -0.5 * cfg_.dt), fwd_full(0.0, -cfg_.dt);

    if (right) {
      // a chain end reached with a full step in the first half is not revisited
      const bool skip_first = half == 1 && w.first == 0;
      if (w.first > 0) handshake_as_right(w, half, true, stats);
      for (std::size_t j = w.first; j < w.last; ++j) {
        if (!(skip_first && j == w.first)) pair_update(w, j, (half == 0 && j + 1 == last_site) ? fwd_full : fwd_half, stats);
        if (j + 1 == last_site) break;
        w.cache.left[j + 1] = update_left_environment(w.cache.beta(j), w.site(j), w.bond(j), h_[j]);
        site_update(w, j + 1, stats);
      }
      if (w.last < last_site) handshake_as_left(w, half, false, stats);
    } else {
      const bool skip_first = half == 1 && w.last == last_site;
      if (w.last < last_site) handshake_as_left(w, half, true, stats);
      for (std::size_t j = w.last; j-- > w.first;) {
        if (!(skip_first && j + 1 == w.last)) pair_update(w, j, (half == 0 && j == 0) ? fwd_full : fwd_half, stats);
        if (j == 0) break;
        w.cache.right[j] = update_right_environment(w.cache.gamma(j + 1), w.site(j + 1), w.bond(j), h_[j + 1]);
        site_update(w, j, stats);
      }
      if (w.first > 0) handshake_as_right(w, half, false, stats);
    }
  }
};

/// |1 - ||psi||| thresholds for the occasional serial reorthonormalization.
struct StabilityConfig {
  double epsilon = 1e-12;
  double norm_error_threshold = 1e-4;
  std::size_t reorth_interval_min = 1;

  void validate() const {
    detail::require(epsilon > 0.0 && epsilon < 1.0, "stability: epsilon must lie in (0, 1)");
    detail::require(norm_error_threshold > 0.0, "stability: norm_error_threshold must be positive");
  }
};

struct ReorthResult {
  bool did_run = false;
  double norm_error_before = 0.0;
  double norm_error_after = 0.0;
  double discarded_weight = 0.0;
  std::optional<InvCanonicalMps> state;
};

/// Orthonormalizes psi when its norm error exceeds the threshold and at least
/// reorth_interval_min steps have passed since the previous run. `policy`
/// supplies chi_max and w_max; its epsilon is replaced by stability.epsilon.
inline ReorthResult maybe_reorthonormalize(const InvCanonicalMps& psi, const StabilityConfig& stability,
                                           std::size_t steps_since_last, TruncationPolicy policy = {}) {
  stability.validate();
  ReorthResult out;
  out.norm_error_before = norm_error(psi);
  out.norm_error_after = out.norm_error_before;
  if (out.norm_error_before <= stability.norm_error_threshold || steps_since_last < stability.reorth_interval_min)
    return out;
  policy.epsilon = stability.epsilon;
  OrthonormalizeResult r = orthonormalize(psi, policy);
  out.did_run = true;
  out.discarded_weight = r.total_discarded;
  out.norm_error_after = norm_error(r.state);
  out.state = std::move(r.state);
  return out;
}

struct VelocityCheck {
  double ratio = 0.0;
  bool warning = false;
};

/// Advisory check of v << (N/p)/dt: warns when v dt p / N exceeds `fraction`.
inline VelocityCheck check_velocity_criterion(double v, std::size_t n, std::size_t p, double dt, double fraction = 0.1) {
  detail::require(v > 0.0 && n > 0 && p > 0 && dt > 0.0 && fraction > 0.0,
                  "check_velocity_criterion: inputs must be positive");
  VelocityCheck out;
  out.ratio = v * dt * static_cast<double>(p) / static_cast<double>(n);
  out.warning = out.ratio > fraction;
  return out;
}

}  // namespace ptdvp
