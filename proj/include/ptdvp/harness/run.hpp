#pragma once

// Experiment drivers: evolve, compare across worker counts, ground states.

#include <algorithm>
#include <chrono>
#include <memory>
#include <random>

#include "ptdvp/expfit.hpp"
#include "ptdvp/harness/record.hpp"
#include "ptdvp/mps_io.hpp"
#include "ptdvp/oracle.hpp"

namespace ptdvp::harness {

/// Model, Hamiltonian and initial state shared by every run of one config.
struct PreparedRun {
  std::optional<ExpSumFit> fit;
  Mpo h;
  InvCanonicalMps reference;  // before initial_state.apply
  InvCanonicalMps start;
  double reference_energy = 0.0;  // <H> of `reference`, normalized
};

inline std::optional<ExpSumFit> model_fit(const ModelSpec& m, std::size_t range) {
  if (m.model == Model::IsingNN) return std::nullopt;
  return fit_power_law(m.alpha, range, m.n_exps);
}

inline double normalized_energy(const InvCanonicalMps& psi, const Mpo& h) {
  return expectation(psi, h).real() / overlap(psi, psi).real();
}

inline ModelSpec ground_model(const RunConfig& cfg) {
  ModelSpec m = cfg.model;
  if (cfg.initial.field_B) m.field_B = *cfg.initial.field_B;
  if (cfg.initial.delta_B) m.delta_B = *cfg.initial.delta_B;
  if (cfg.initial.alpha) m.alpha = *cfg.initial.alpha;
  return m;
}

inline DmrgResult ground_state_of(const ModelSpec& m, std::size_t fit_range, const InitialStateConfig& init,
                                  std::uint64_t seed) {
  const auto fit = model_fit(m, fit_range);
  const Mpo h = build_mpo(m, fit ? &*fit : nullptr);
  return dmrg_ground_state(h, random_mps(std::vector<std::size_t>(m.n_sites, 2), init.initial_chi, seed), init.dmrg);
}

inline PreparedRun prepare_run(const RunConfig& cfg) {
  cfg.validate();
  PreparedRun out;
  out.fit = model_fit(cfg.model, cfg.effective_fit_range());
  out.h = build_mpo(cfg.model, out.fit ? &*out.fit : nullptr);
  const std::size_t n = cfg.n_sites();
  switch (cfg.initial.kind) {
    case InitialKind::Product: {
      ProductStateSpec spec;
      for (std::size_t j = 0; j < n; ++j)
        spec.local_states.push_back(named_local_state(cfg.initial.local.size() == 1 ? cfg.initial.local[0] : cfg.initial.local[j]));
      out.reference = from_product_state(spec);
      break;
    }
    case InitialKind::DmrgGround: {
      const DmrgResult gs = ground_state_of(ground_model(cfg), cfg.effective_fit_range(), cfg.initial, cfg.seed);
      if (!gs.converged)
        throw NumericalError("initial DMRG did not converge (last energy " + impl::fmt(gs.energy) + ")");
      out.reference = gs.state;
      break;
    }
    case InitialKind::File:
      out.reference = load_mps(cfg.initial.path);
      ptdvp::detail::require_shape(out.reference.size() == n, "initial state file has " + std::to_string(out.reference.size()) +
                                                           " sites, model has " + std::to_string(n));
      break;
  }
  ptdvp::detail::check_shapes(out.reference, out.h);
  out.start = out.reference;
  for (const auto& a : cfg.initial.apply) out.start = apply_site_operator(std::move(out.start), a.matrix(), a.site);
  out.reference_energy = normalized_energy(out.reference, out.h);
  return out;
}

/// Serial or parallel engine behind one interface.
class Engine {
 public:
  struct StepResult {
    UpdateStats total;
    std::vector<double> worker_seconds;
  };

  Engine(const RunConfig& cfg, const PreparedRun& prep) {
    const PartitionPlan plan = cfg.partition.plan(cfg.n_sites());
    sizes_ = plan.sizes();
    if (plan.p == 1) serial_.emplace(prep.start, prep.h, cfg.evolution);
    else parallel_.emplace(prep.start, prep.h, cfg.evolution, plan, make_transport(cfg.transport));
  }

  StepResult step() {
    StepResult r;
    if (serial_) {
      const auto t0 = std::chrono::steady_clock::now();
      r.total = serial_->step();
      r.worker_seconds = {std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()};
    } else {
      auto rep = parallel_->step();
      r.total = rep.total;
      r.worker_seconds = std::move(rep.wall_seconds);
    }
    return r;
  }

  InvCanonicalMps state() const { return serial_ ? serial_->state() : parallel_->gather(); }

  std::size_t max_chi() const {
    if (serial_) return max_bond(serial_->state());
    std::size_t m = 1;
    for (const auto& w : parallel_->workers())
      for (const auto& b : w.bonds) m = std::max(m, b.size());
    return m;
  }

  void reset_state(InvCanonicalMps psi) {
    if (serial_) serial_->reset_state(std::move(psi));
    else parallel_->reset_state(std::move(psi));
  }

  std::size_t p() const { return sizes_.size(); }
  const std::vector<std::size_t>& sizes() const { return sizes_; }

 private:
  std::optional<SerialTdvp> serial_;
  std::optional<ParallelTdvp> parallel_;
  std::vector<std::size_t> sizes_;
};

namespace impl {

inline void measure(const RunConfig& cfg, const PreparedRun& prep, const InvCanonicalMps& psi,
                    const std::vector<cplx>& x0, double t, RunRecord& rec) {
  for (auto kind : cfg.observables) {
    std::vector<cplx> v;
    switch (kind) {
      case ObservableKind::MagnetizationZ: v = local_profile(psi, spin::sigma_z()); break;
      case ObservableKind::MagnetizationX: v = local_profile(psi, spin::sigma_x()); break;
      case ObservableKind::ConnectedZZ: v = connected_zz_profile(psi, cfg.reference_site()); break;
      case ObservableKind::XDeviation: v = x_deviation_profile(psi, x0); break;
      case ObservableKind::Dynamical: v = dynamical_correlator_profile(prep.reference, psi, prep.reference_energy, t); break;
    }
    auto& rows = rec.rows[kind];
    for (std::size_t r = 0; r < v.size(); ++r) rows.push_back({t, r, v[r]});
  }
}

inline void checkpoint(const RunConfig& cfg, const InvCanonicalMps& psi, std::size_t step, double t) {
  const auto& out = cfg.outputs;
  std::filesystem::create_directories(out.directory);
  save_mps(output_path(out, "checkpoint.mps"), psi);
  open_out(output_path(out, "checkpoint.json")) << json{{"step", step}, {"t", t}}.dump() << '\n';
}

}  // namespace impl

/// Runs one evolution from a prepared state. Outputs are written even when the
/// engine fails part way; the error is then rethrown.
inline RunRecord execute_run(const RunConfig& cfg, const PreparedRun& prep) {
  cfg.validate();
  RunRecord rec;
  Engine engine(cfg, prep);
  rec.p = engine.p();
  rec.partition_sizes = engine.sizes();
  if (cfg.velocity > 0.0) rec.velocity = check_velocity_criterion(cfg.velocity, cfg.n_sites(), rec.p, cfg.evolution.dt);
  rec.initial_energy = normalized_energy(prep.start, prep.h);
  const auto x0 = local_profile(prep.start, spin::sigma_x());
  const double dt = cfg.evolution.dt;

  impl::measure(cfg, prep, prep.start, x0, 0.0, rec);
  InvCanonicalMps psi = prep.start;
  std::size_t since_reorth = 0;
  try {
    for (std::size_t step = 1; step <= cfg.n_steps; ++step) {
      const double t = dt * static_cast<double>(step);
      StepDiagnostics d;
      d.step = step;
      d.t = t;
      const auto t0 = std::chrono::steady_clock::now();
      auto r = engine.step();
      ++since_reorth;
      if (cfg.reorthonormalize) {
        auto ro = maybe_reorthonormalize(engine.state(), cfg.stability, since_reorth, cfg.evolution.policy);
        if (ro.did_run) {
          engine.reset_state(std::move(*ro.state));
          r.total.discarded_weight += ro.discarded_weight;
          d.reorthonormalized = true;
          ++rec.reorth_count;
          since_reorth = 0;
        }
      }
      d.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      rec.wall_seconds += d.wall_seconds;
      d.discarded_weight = r.total.discarded_weight;
      d.krylov_unconverged = r.total.krylov_unconverged;
      d.worker_seconds = std::move(r.worker_seconds);
      d.max_chi = engine.max_chi();
      psi = engine.state();
      d.norm_error = norm_error(psi);
      rec.steps.push_back(std::move(d));
      if (step % cfg.stride == 0 || step == cfg.n_steps) impl::measure(cfg, prep, psi, x0, t, rec);
      if (cfg.outputs.checkpoint_every && !cfg.outputs.directory.empty() && step % cfg.outputs.checkpoint_every == 0)
        impl::checkpoint(cfg, psi, step, t);
    }
  } catch (const std::exception& e) {
    rec.status = "failed";
    rec.error = e.what();
    rec.final_state = psi;
    write_run_outputs(cfg, rec);
    throw;
  }

  rec.final_state = psi;
  rec.final_energy = normalized_energy(psi, prep.h);
  rec.final_norm_error = norm_error(psi);
  if (cfg.dense_reference) {
    const Eigen::VectorXcd ref = exact_evolve(to_dense(prep.start), dense_hamiltonian(cfg.model, prep.fit ? &*prep.fit : nullptr),
                                              dt * static_cast<double>(cfg.n_steps));
    const Eigen::VectorXcd v = to_dense(psi);
    rec.reference_infidelity = std::clamp(1.0 - std::abs(ref.dot(v)) / (ref.norm() * v.norm()), 0.0, 1.0);
  }
  write_run_outputs(cfg, rec);
  if (!cfg.outputs.directory.empty() && cfg.outputs.write_final_state) save_mps(output_path(cfg.outputs, "final.mps"), psi);
  return rec;
}

inline RunRecord run_evolve(const RunConfig& cfg) { return execute_run(cfg, prepare_run(cfg)); }

// ---------------------------------------------------------------------------
// compare

struct CompareEntry {
  std::size_t p = 1;
  std::vector<std::size_t> partition_sizes;
  double infidelity = 0.0;  // vs the p = 1 run
  std::map<ObservableKind, double> max_deviation;
  double w_total = 0.0;
  double wall_seconds = 0.0;
  double speedup = 1.0;
  RunRecord record;
};

struct CompareResult {
  std::vector<CompareEntry> entries;  // p = 1 first
};

inline json compare_json(const CompareResult& c) {
  json rows = json::array();
  for (const auto& e : c.entries) {
    json dev = json::object();
    for (const auto& [k, v] : e.max_deviation) dev[observable_name(k)] = v;
    rows.push_back({{"p", e.p},
                    {"partition_sizes", e.partition_sizes},
                    {"infidelity", e.infidelity},
                    {"max_observable_deviation", dev},
                    {"w_total", e.w_total},
                    {"wall_seconds", e.wall_seconds},
                    {"speedup", e.speedup}});
  }
  return {{"runs", rows}};
}

/// Runs the same physics at every p in p_list (p = 1 is added when absent) and
/// compares each run with the serial one.
inline CompareResult run_compare(const RunConfig& cfg, std::vector<std::size_t> p_list) {
  cfg.validate();
  ptdvp::detail::require(!p_list.empty(), "compare: empty p list");
  p_list.erase(std::remove(p_list.begin(), p_list.end(), std::size_t{1}), p_list.end());
  p_list.insert(p_list.begin(), 1);
  for (std::size_t p : p_list) plan_partitions(cfg.n_sites(), p, p == 1 ? PartitionMode::Uniform : cfg.partition.mode, cfg.partition.sizes);

  const PreparedRun prep = prepare_run(cfg);
  CompareResult out;
  for (std::size_t p : p_list) {
    RunConfig c = cfg;
    c.partition.p = p;
    if (p == 1) c.partition.mode = PartitionMode::Uniform;
    if (!c.outputs.directory.empty()) c.outputs.prefix = cfg.outputs.prefix + "_p" + std::to_string(p);
    CompareEntry e;
    e.record = execute_run(c, prep);
    e.p = p;
    e.partition_sizes = e.record.partition_sizes;
    e.w_total = e.record.w_total();
    e.wall_seconds = e.record.wall_seconds;
    out.entries.push_back(std::move(e));
  }
  const RunRecord& serial = out.entries.front().record;
  for (auto& e : out.entries) {
    e.infidelity = infidelity(e.record.final_state, serial.final_state);
    e.speedup = e.wall_seconds > 0.0 ? serial.wall_seconds / e.wall_seconds : 0.0;
    for (const auto& [kind, rows] : e.record.rows) {
      const auto& ref = serial.rows.at(kind);
      double worst = 0.0;
      for (std::size_t i = 0; i < rows.size() && i < ref.size(); ++i) worst = std::max(worst, std::abs(rows[i].value - ref[i].value));
      e.max_deviation[kind] = worst;
    }
  }
  if (!cfg.outputs.directory.empty()) {
    std::filesystem::create_directories(cfg.outputs.directory);
    impl::open_out(output_path(cfg.outputs, "compare.json")) << compare_json(out).dump(2) << '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------
// ground state

struct GroundStateRecord {
  DmrgResult result;
  double energy_per_site = 0.0;
  std::optional<double> local_gap;  // between the two lowest candidates at the central pair
  std::filesystem::path state_file;
};

namespace impl {

/// Lowest two Ritz values of the two-site effective Hamiltonian at bond j,
/// from a Lanczos run with a random start vector.
inline std::optional<double> local_gap(const InvCanonicalMps& psi, const Mpo& h, std::size_t j, std::uint64_t seed) {
  const EnvCache cache = init_right_environments(psi, h);
  Environment beta = cache.beta(0);
  for (std::size_t i = 0; i < j; ++i) beta = update_left_environment(beta, psi.site(i), psi.bond(i), h[i]);
  const Tensor theta = form_theta(psi.site(j), psi.bond(j), psi.site(j + 1));
  const Dims dims = theta.dims();
  const Environment& gamma = cache.gamma(j + 1);
  auto apply = [&](const Eigen::VectorXcd& x) -> Eigen::VectorXcd {
    return apply_h2(beta, h[j], h[j + 1], gamma, Tensor(dims, x)).data();
  };
  const Eigen::Index n = theta.data().size();
  if (n < 2) return std::nullopt;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  Eigen::VectorXcd v(n);
  for (auto& x : v) x = cplx(g(rng), g(rng));
  const Eigen::Index m = std::min<Eigen::Index>(n, 120);
  Eigen::MatrixXcd q(n, m);
  q.col(0) = v.normalized();
  std::vector<double> alpha, beta_;
  Eigen::Index k = 0;
  for (; k < m; ++k) {
    Eigen::VectorXcd w = apply(q.col(k));
    alpha.push_back(q.col(k).dot(w).real());
    ptdvp::detail::reorthogonalize(w, q, k + 1);
    const double b = w.norm();
    if (k + 1 == m || b < 1e-12) {
      ++k;
      break;
    }
    beta_.push_back(b);
    q.col(k + 1) = w / b;
  }
  if (k < 2) return std::nullopt;
  const auto es = ptdvp::detail::tridiagonal_eigen(alpha, beta_, k);
  return es.eigenvalues()(1) - es.eigenvalues()(0);
}

}  // namespace impl

/// DMRG on cfg.model (with initial_state overrides), in chunks of
/// outputs.checkpoint_every sweeps when checkpointing.
inline GroundStateRecord run_groundstate(const RunConfig& cfg) {
  cfg.validate();
  const ModelSpec m = ground_model(cfg);
  const auto fit = model_fit(m, cfg.effective_fit_range());
  const Mpo h = build_mpo(m, fit ? &*fit : nullptr);
  DmrgConfig dc = cfg.initial.dmrg;
  const std::size_t chunk = cfg.outputs.checkpoint_every && !cfg.outputs.directory.empty()
                                ? cfg.outputs.checkpoint_every
                                : static_cast<std::size_t>(dc.max_sweeps);
  GroundStateRecord rec;
  InvCanonicalMps psi = random_mps(std::vector<std::size_t>(m.n_sites, 2), cfg.initial.initial_chi, cfg.seed);
  DmrgResult& total = rec.result;
  double previous = std::numeric_limits<double>::infinity();
  int done = 0;
  while (done < cfg.initial.dmrg.max_sweeps && !total.converged) {
    dc.max_sweeps = static_cast<int>(std::min<std::size_t>(chunk, static_cast<std::size_t>(cfg.initial.dmrg.max_sweeps - done)));
    DmrgResult r = dmrg_ground_state(h, std::move(psi), dc);
    for (double e : r.sweep_energies) {
      if (!total.converged && std::abs(previous - e) <= dc.energy_tol) total.converged = true;
      previous = e;
      total.sweep_energies.push_back(e);
    }
    total.converged = total.converged || r.converged;
    total.discarded_weight += r.discarded_weight;
    total.unconverged_local_solves += r.unconverged_local_solves;
    total.energy = r.energy;
    psi = std::move(r.state);
    done += static_cast<int>(r.sweep_energies.size());
    if (chunk < static_cast<std::size_t>(cfg.initial.dmrg.max_sweeps) && !cfg.outputs.directory.empty()) {
      std::filesystem::create_directories(cfg.outputs.directory);
      save_mps(output_path(cfg.outputs, "checkpoint.mps"), psi);
    }
  }
  total.state = psi;
  rec.energy_per_site = total.energy / static_cast<double>(m.n_sites);
  rec.local_gap = impl::local_gap(psi, h, m.n_sites / 2 - 1, cfg.seed);

  const auto& out = cfg.outputs;
  if (!out.directory.empty()) {
    std::filesystem::create_directories(out.directory);
    rec.state_file = output_path(out, "ground.mps");
    save_mps(rec.state_file, psi);
    json j = {{"energy", total.energy},
              {"energy_per_site", rec.energy_per_site},
              {"converged", total.converged},
              {"sweep_energies", total.sweep_energies},
              {"discarded_weight", total.discarded_weight},
              {"unconverged_local_solves", total.unconverged_local_solves},
              {"max_chi", max_bond(psi)}};
    j["local_gap"] = rec.local_gap ? json(*rec.local_gap) : json(nullptr);
    j["config"] = to_json(cfg);
    impl::open_out(output_path(out, "ground.json")) << j.dump(2) << '\n';
  }
  return rec;
}

}  // namespace ptdvp::harness
