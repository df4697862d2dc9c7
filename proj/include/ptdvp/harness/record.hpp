#pragma once

// Run records and their on-disk forms: long-format CSV per observable, a
// per-step diagnostics CSV and a JSON summary.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ptdvp/harness/config.hpp"

namespace ptdvp::harness {

struct ObservableRow {
  double t = 0.0;
  std::size_t site = 0;
  cplx value;
};

struct StepDiagnostics {
  std::size_t step = 0;
  double t = 0.0;
  double discarded_weight = 0.0;
  std::size_t max_chi = 0;
  double norm_error = 0.0;
  double wall_seconds = 0.0;
  std::vector<double> worker_seconds;
  std::size_t krylov_unconverged = 0;
  bool reorthonormalized = false;
};

struct RunRecord {
  std::map<ObservableKind, std::vector<ObservableRow>> rows;
  std::vector<StepDiagnostics> steps;
  std::size_t p = 1;
  std::vector<std::size_t> partition_sizes;
  double initial_energy = 0.0;
  double final_energy = 0.0;
  double final_norm_error = 0.0;
  double wall_seconds = 0.0;
  std::size_t reorth_count = 0;
  std::optional<double> reference_infidelity;
  std::optional<VelocityCheck> velocity;
  std::string status = "ok";
  std::string error;
  InvCanonicalMps final_state;

  double w_total() const {
    double w = 0.0;
    for (const auto& s : steps) w += s.discarded_weight;
    return w;
  }
  std::size_t max_chi() const {
    std::size_t m = 0;
    for (const auto& s : steps) m = std::max(m, s.max_chi);
    return m;
  }
};

namespace impl {

inline std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

inline std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream os(p, std::ios::trunc);
  if (!os) throw ConfigError("cannot open " + p.string() + " for writing");
  return os;
}

}  // namespace impl

inline std::filesystem::path output_path(const OutputConfig& out, const std::string& suffix) {
  return out.directory / (out.prefix + "_" + suffix);
}

inline void write_observable_csv(const std::filesystem::path& path, const std::vector<ObservableRow>& rows) {
  auto os = impl::open_out(path);
  os << "t,site,re,im\n";
  for (const auto& r : rows)
    os << impl::fmt(r.t) << ',' << r.site << ',' << impl::fmt(r.value.real()) << ',' << impl::fmt(r.value.imag())
       << '\n';
}

inline void write_steps_csv(const std::filesystem::path& path, const std::vector<StepDiagnostics>& steps) {
  auto os = impl::open_out(path);
  os << "step,t,w,max_chi,norm_error,wall_seconds,max_worker_seconds,krylov_unconverged,reorthonormalized\n";
  for (const auto& s : steps) {
    double worst = 0.0;
    for (double x : s.worker_seconds) worst = std::max(worst, x);
    os << s.step << ',' << impl::fmt(s.t) << ',' << impl::fmt(s.discarded_weight) << ',' << s.max_chi << ','
       << impl::fmt(s.norm_error) << ',' << impl::fmt(s.wall_seconds) << ',' << impl::fmt(worst) << ','
       << s.krylov_unconverged << ',' << (s.reorthonormalized ? 1 : 0) << '\n';
  }
}

inline json summary_json(const RunRecord& rec) {
  json j = {{"status", rec.status},
            {"p", rec.p},
            {"partition_sizes", rec.partition_sizes},
            {"steps", rec.steps.size()},
            {"w_total", rec.w_total()},
            {"max_chi", rec.max_chi()},
            {"initial_energy", rec.initial_energy},
            {"final_energy", rec.final_energy},
            {"final_norm_error", rec.final_norm_error},
            {"wall_seconds", rec.wall_seconds},
            {"reorth_count", rec.reorth_count}};
  if (!rec.error.empty()) j["error"] = rec.error;
  if (rec.reference_infidelity) j["reference_infidelity"] = *rec.reference_infidelity;
  if (rec.velocity) j["velocity_check"] = {{"ratio", rec.velocity->ratio}, {"warning", rec.velocity->warning}};
  json workers = json::array();
  if (!rec.steps.empty()) {
    std::vector<double> tot(rec.steps.front().worker_seconds.size(), 0.0);
    for (const auto& s : rec.steps)
      for (std::size_t k = 0; k < tot.size() && k < s.worker_seconds.size(); ++k) tot[k] += s.worker_seconds[k];
    workers = tot;
  }
  j["worker_seconds"] = workers;
  return j;
}

/// Writes every CSV and the summary under cfg.outputs; a no-op without a directory.
inline void write_run_outputs(const RunConfig& cfg, const RunRecord& rec) {
  const auto& out = cfg.outputs;
  if (out.directory.empty()) return;
  std::filesystem::create_directories(out.directory);
  for (const auto& [kind, rows] : rec.rows) write_observable_csv(output_path(out, observable_name(kind) + ".csv"), rows);
  write_steps_csv(output_path(out, "steps.csv"), rec.steps);
  json s = summary_json(rec);
  s["config"] = to_json(cfg);
  impl::open_out(output_path(out, "summary.json")) << s.dump(2) << '\n';
}

}  // namespace ptdvp::harness
