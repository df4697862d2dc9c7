#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>

#include "ptdvp/haldane_shastry.hpp"
#include "ptdvp/harness/run.hpp"

using namespace ptdvp;
using namespace ptdvp::harness;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

struct RunOptions {
  std::string config;
  std::string out;
  std::string prefix;
  std::optional<std::size_t> p;
  std::optional<std::size_t> steps;
};

void add_run_options(CLI::App* sub, RunOptions& o) {
  sub->add_option("-c,--config", o.config, "run configuration (JSON)")->required()->check(CLI::ExistingFile);
  sub->add_option("-o,--out", o.out, "output directory (overrides outputs.directory)");
  sub->add_option("--prefix", o.prefix, "output file prefix (overrides outputs.prefix)");
}

RunConfig load(const RunOptions& o) {
  RunConfig cfg = load_run_config(o.config);
  if (!o.out.empty()) cfg.outputs.directory = o.out;
  if (!o.prefix.empty()) cfg.outputs.prefix = o.prefix;
  if (o.p) cfg.partition.p = *o.p;
  if (o.steps) cfg.n_steps = *o.steps;
  cfg.validate();
  return cfg;
}

int cmd_evolve(const RunOptions& o) {
  const RunConfig cfg = load(o);
  const RunRecord rec = run_evolve(cfg);
  if (rec.velocity && rec.velocity->warning)
    std::cerr << "warning: v dt p / N = " << rec.velocity->ratio << " exceeds 0.1; partitions may be too small\n";
  std::printf("steps %zu  p %zu  w_total %.6e  max_chi %zu  norm_error %.3e  wall %.3f s\n", rec.steps.size(), rec.p,
              rec.w_total(), rec.max_chi(), rec.final_norm_error, rec.wall_seconds);
  if (rec.reference_infidelity) std::printf("infidelity vs dense reference %.6e\n", *rec.reference_infidelity);
  return 0;
}

int cmd_compare(const RunOptions& o, const std::vector<std::size_t>& ps) {
  const RunConfig cfg = load(o);
  const CompareResult res = run_compare(cfg, ps);
  std::printf("%4s %14s %14s %10s %9s\n", "p", "infidelity", "w_total", "wall_s", "speedup");
  for (const auto& e : res.entries)
    std::printf("%4zu %14.6e %14.6e %10.3f %9.3f\n", e.p, e.infidelity, e.w_total, e.wall_seconds, e.speedup);
  return 0;
}

int cmd_groundstate(const RunOptions& o) {
  const RunConfig cfg = load(o);
  const GroundStateRecord rec = run_groundstate(cfg);
  std::printf("E0 %.12f  E0/N %.12f  sweeps %zu  converged %s\n", rec.result.energy, rec.energy_per_site,
              rec.result.sweep_energies.size(), rec.result.converged ? "yes" : "no");
  if (rec.local_gap) std::printf("local gap %.6e\n", *rec.local_gap);
  if (!rec.result.converged) {
    std::cerr << "error: DMRG did not converge; last energy " << rec.result.energy << "\n";
    return kExitNumerical;
  }
  return 0;
}

int cmd_fit(double alpha, std::size_t range, std::size_t nexps, const std::string& out) {
  const ExpSumFit fit = fit_power_law(alpha, range, nexps);
  json j = {{"alpha", alpha},
            {"range", range},
            {"n_exps", nexps},
            {"coefficients", fit.coefficients},
            {"rates", fit.rates},
            {"max_abs_error", fit.max_abs_error},
            {"max_rel_error", fit.max_rel_error},
            {"converged", fit.converged}};
  if (out.empty()) {
    std::cout << j.dump(2) << '\n';
  } else {
    std::ofstream os(out);
    if (!os) throw ConfigError("cannot open " + out);
    os << j.dump(2) << '\n';
  }
  std::fprintf(stderr, "max_abs_error %.3e  max_rel_error %.3e\n", fit.max_abs_error, fit.max_rel_error);
  return std::isfinite(fit.max_abs_error) ? 0 : kExitNumerical;
}

int cmd_oracle(const std::vector<int>& xs, double t_max, double dt, const QuadratureConfig& quad, const std::string& out) {
  ptdvp::detail::require(dt > 0.0 && t_max >= 0.0, "oracle: need dt > 0 and t_max >= 0");
  std::ofstream file;
  if (!out.empty()) {
    file.open(out);
    if (!file) throw ConfigError("cannot open " + out);
  }
  std::ostream& os = out.empty() ? std::cout : file;
  os << "t,site,re,im,error_estimate\n";
  bool ok = true;
  const auto nt = static_cast<std::size_t>(std::floor(t_max / dt + 1e-9));
  for (std::size_t i = 0; i <= nt; ++i) {
    const double t = dt * static_cast<double>(i);
    for (int x : xs) {
      const auto c = haldane_shastry_c_infinity(x, t, quad);
      ok = ok && c.reached_tolerance;
      os << harness::impl::fmt(t) << ',' << x << ',' << harness::impl::fmt(c.value.real()) << ','
         << harness::impl::fmt(c.value.imag()) << ',' << harness::impl::fmt(c.error_estimate) << '\n';
    }
  }
  if (!ok) std::cerr << "warning: quadrature tolerance not reached everywhere\n";
  return ok ? 0 : kExitNumerical;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Parallel two-site TDVP for long-range spin chains"};
  app.require_subcommand(1);

  RunOptions evolve_opts, compare_opts, ground_opts;
  auto* evolve = app.add_subcommand("evolve", "time-evolve an initial state and record observables");
  add_run_options(evolve, evolve_opts);
  evolve->add_option("-p,--workers", evolve_opts.p, "number of workers (1 or even; overrides partition.p)");
  evolve->add_option("--steps", evolve_opts.steps, "number of time steps (overrides evolution.n_steps)");

  std::vector<std::size_t> ps{1, 2};
  auto* compare = app.add_subcommand("compare", "run the same evolution at several worker counts");
  add_run_options(compare, compare_opts);
  compare->add_option("--steps", compare_opts.steps, "number of time steps");
  compare->add_option("-p,--workers", ps, "worker counts; 1 is always included")->delimiter(',');

  auto* ground = app.add_subcommand("groundstate", "two-site DMRG ground state");
  add_run_options(ground, ground_opts);

  double alpha = 2.0;
  std::size_t range = 100, nexps = 8;
  std::string fit_out;
  auto* fit = app.add_subcommand("fit-exps", "fit r^-alpha by a sum of exponentials");
  fit->add_option("--alpha", alpha, "power-law exponent")->required();
  fit->add_option("--range", range, "fit distances 1..range")->required();
  fit->add_option("--nexps", nexps, "number of exponentials")->required();
  fit->add_option("--out", fit_out, "output JSON (stdout when omitted)");

  std::vector<int> xs{0, 1, 2, 3, 4};
  double t_max = 4.0, t_step = 0.5;
  std::string scheme = "adaptive", oracle_out;
  QuadratureConfig quad;
  auto* oracle = app.add_subcommand("oracle", "Haldane-Shastry thermodynamic-limit correlator on a grid");
  oracle->add_option("--x", xs, "distances")->delimiter(',');
  oracle->add_option("--tmax", t_max, "largest time");
  oracle->add_option("--dt", t_step, "time spacing");
  oracle->add_option("--scheme", scheme, "adaptive or gauss_legendre");
  oracle->add_option("--tol", quad.tolerance, "absolute tolerance (adaptive)");
  oracle->add_option("--panels", quad.panels, "panels per dimension (gauss_legendre)");
  oracle->add_option("--out", oracle_out, "output CSV (stdout when omitted)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (*evolve) return cmd_evolve(evolve_opts);
    if (*compare) return cmd_compare(compare_opts, ps);
    if (*ground) return cmd_groundstate(ground_opts);
    if (*fit) return cmd_fit(alpha, range, nexps, fit_out);
    if (*oracle) {
      quad.scheme = parse_quadrature_scheme(scheme);
      return cmd_oracle(xs, t_max, t_step, quad, oracle_out);
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitNumerical;
  }
  return 0;
}
