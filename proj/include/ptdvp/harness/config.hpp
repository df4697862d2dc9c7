#pragma once

// Run configuration: one JSON document per run, schema_version 1.

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "ptdvp/dmrg.hpp"
#include "ptdvp/mpo.hpp"
#include "ptdvp/observables.hpp"
#include "ptdvp/parallel.hpp"
#include "ptdvp/partition.hpp"
#include "ptdvp/tdvp.hpp"

namespace ptdvp::harness {

using json = nlohmann::json;

inline constexpr int kSchemaVersion = 1;

/// A single-site operator applied while preparing the initial state.
struct SiteOperation {
  std::string op;      // sx, sy, sz or ry (exp(i angle sigma^y))
  std::size_t site = 0;
  double angle = 0.0;  // ry only

  Eigen::MatrixXcd matrix() const {
    if (op == "sx") return spin::sigma_x();
    if (op == "sy") return spin::sigma_y();
    if (op == "sz") return spin::sigma_z();
    if (op == "ry") return spin::rotation_y(angle);
    throw ConfigError("unknown site operation '" + op + "' (expected sx, sy, sz or ry)");
  }
};

enum class InitialKind { Product, DmrgGround, File };

inline std::string initial_kind_name(InitialKind k) {
  switch (k) {
    case InitialKind::Product: return "product";
    case InitialKind::DmrgGround: return "dmrg_ground";
    case InitialKind::File: return "file";
  }
  return "?";
}

inline InitialKind parse_initial_kind(const std::string& s) {
  for (auto k : {InitialKind::Product, InitialKind::DmrgGround, InitialKind::File})
    if (initial_kind_name(k) == s) return k;
  throw ConfigError("unknown initial state kind '" + s + "' (expected product, dmrg_ground or file)");
}

inline Eigen::VectorXcd named_local_state(const std::string& s) {
  const double r = std::numbers::sqrt2 / 2.0;
  if (s == "up") return spin::up();
  if (s == "down") return spin::down();
  if (s == "x+") return Eigen::Vector2cd(r, r);
  if (s == "x-") return Eigen::Vector2cd(r, -r);
  if (s == "y+") return Eigen::Vector2cd(r, cplx(0.0, r));
  if (s == "y-") return Eigen::Vector2cd(r, cplx(0.0, -r));
  throw ConfigError("unknown local state '" + s + "'");
}

struct InitialStateConfig {
  InitialKind kind = InitialKind::Product;
  std::vector<std::string> local{"up"};  // one entry for every site, or one per site
  // dmrg_ground: the ground state of the run's model with these fields replaced
  std::optional<double> field_B;
  std::optional<double> delta_B;
  std::optional<double> alpha;
  DmrgConfig dmrg{};
  std::size_t initial_chi = 8;
  std::filesystem::path path;  // file
  std::vector<SiteOperation> apply;

  void validate(std::size_t n) const {
    if (kind == InitialKind::Product) {
      detail::require(local.size() == 1 || local.size() == n, "initial_state.local needs 1 or N entries");
      for (const auto& s : local) named_local_state(s);
    }
    if (kind == InitialKind::DmrgGround) {
      dmrg.validate();
      detail::require(initial_chi >= 1, "initial_state.initial_chi must be >= 1");
    }
    if (kind == InitialKind::File) detail::require(!path.empty(), "initial_state.path is required for kind=file");
    for (const auto& a : apply) {
      a.matrix();
      detail::require(a.site < n, "initial_state.apply: site out of range");
    }
  }
};

struct PartitionConfig {
  std::size_t p = 1;
  PartitionMode mode = PartitionMode::Uniform;
  std::vector<std::size_t> sizes;  // explicit mode

  PartitionPlan plan(std::size_t n) const { return plan_partitions(n, p, mode, sizes); }
};

struct OutputConfig {
  std::filesystem::path directory;  // empty: nothing is written
  std::string prefix = "run";
  std::size_t checkpoint_every = 0;
  bool write_final_state = true;
};

struct RunConfig {
  ModelSpec model{};
  std::size_t fit_range = 0;  // 0: N - 1
  EvolutionConfig evolution{};
  std::size_t n_steps = 1;
  std::size_t stride = 1;
  bool reorthonormalize = false;
  StabilityConfig stability{};
  double velocity = 0.0;  // > 0 enables the advisory partition-size check
  PartitionConfig partition{};
  std::string transport = "inprocess";
  InitialStateConfig initial{};
  std::vector<ObservableKind> observables{ObservableKind::MagnetizationZ};
  std::optional<std::size_t> observable_site;  // reference site k, default N / 2
  bool dense_reference = false;
  OutputConfig outputs{};
  std::uint64_t seed = 1;

  std::size_t n_sites() const { return model.n_sites; }
  std::size_t reference_site() const { return observable_site.value_or(model.n_sites / 2); }
  std::size_t effective_fit_range() const { return fit_range ? fit_range : model.n_sites - 1; }

  void validate() const {
    model.validate();
    evolution.validate();
    stability.validate();
    initial.validate(model.n_sites);
    detail::require(n_steps >= 1, "n_steps must be >= 1");
    detail::require(stride >= 1, "stride must be >= 1");
    detail::require(velocity >= 0.0, "velocity must be >= 0");
    detail::require(reference_site() < model.n_sites, "observable_site out of range");
    partition.plan(model.n_sites).validate();
    make_transport(transport);
    if (dense_reference) detail::require(model.n_sites <= 14, "dense_reference needs N <= 14");
  }
};

namespace impl {

/// Reads a JSON object, rejecting keys that are never looked at.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw ConfigError(where_ + ": expected an object");
  }

  bool has(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key);
  }

  template <typename T>
  void get(const std::string& key, T& out) {
    if (!has(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(where_ + "." + key + ": " + e.what());
    }
  }

  template <typename T>
  void get(const std::string& key, std::optional<T>& out) {
    if (!has(key)) return;
    T v{};
    get(key, v);
    out = v;
  }

  const json& at(const std::string& key) {
    seen_.insert(key);
    return j_.at(key);
  }

  void finish() const {
    for (const auto& [k, v] : j_.items())
      if (!seen_.count(k)) throw ConfigError(where_ + ": unknown key '" + k + "'");
  }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

inline void read_policy(const json& j, const std::string& where, TruncationPolicy& p) {
  ObjectReader r(j, where);
  r.get("chi_max", p.chi_max);
  r.get("w_max", p.w_max);
  r.get("epsilon", p.epsilon);
  r.finish();
}

inline void read_krylov(const json& j, const std::string& where, KrylovConfig& k) {
  ObjectReader r(j, where);
  r.get("max_basis_vectors", k.max_basis_vectors);
  r.get("tolerance", k.tolerance);
  r.finish();
}

inline json policy_json(const TruncationPolicy& p) {
  return {{"chi_max", p.chi_max}, {"w_max", p.w_max}, {"epsilon", p.epsilon}};
}

inline json krylov_json(const KrylovConfig& k) {
  return {{"max_basis_vectors", k.max_basis_vectors}, {"tolerance", k.tolerance}};
}

}  // namespace impl

inline RunConfig parse_run_config(const json& j) {
  RunConfig c;
  impl::ObjectReader top(j, "config");
  int version = 0;
  top.get("schema_version", version);
  if (version != kSchemaVersion)
    throw ConfigError("config.schema_version must be " + std::to_string(kSchemaVersion));

  if (!top.has("model")) throw ConfigError("config.model is required");
  {
    impl::ObjectReader r(top.at("model"), "model");
    std::string name = model_name(c.model.model);
    r.get("name", name);
    c.model.model = parse_model(name);
    r.get("n_sites", c.model.n_sites);
    r.get("alpha", c.model.alpha);
    r.get("field_B", c.model.field_B);
    r.get("delta_B", c.model.delta_B);
    r.get("n_exps", c.model.n_exps);
    r.get("fit_range", c.fit_range);
    r.finish();
  }
  if (top.has("evolution")) {
    impl::ObjectReader r(top.at("evolution"), "evolution");
    r.get("dt", c.evolution.dt);
    r.get("n_steps", c.n_steps);
    r.get("stride", c.stride);
    r.get("dense_reference", c.dense_reference);
    r.finish();
  }
  if (top.has("policy")) impl::read_policy(top.at("policy"), "policy", c.evolution.policy);
  if (top.has("krylov")) impl::read_krylov(top.at("krylov"), "krylov", c.evolution.krylov);
  if (top.has("stability")) {
    impl::ObjectReader r(top.at("stability"), "stability");
    r.get("reorthonormalize", c.reorthonormalize);
    r.get("epsilon", c.stability.epsilon);
    r.get("norm_error_threshold", c.stability.norm_error_threshold);
    r.get("reorth_interval_min", c.stability.reorth_interval_min);
    r.get("velocity", c.velocity);
    r.finish();
  }
  if (top.has("partition")) {
    impl::ObjectReader r(top.at("partition"), "partition");
    r.get("p", c.partition.p);
    std::string mode = partition_mode_name(c.partition.mode);
    r.get("mode", mode);
    c.partition.mode = parse_partition_mode(mode);
    r.get("sizes", c.partition.sizes);
    r.finish();
  }
  top.get("transport", c.transport);
  if (top.has("initial_state")) {
    auto& in = c.initial;
    impl::ObjectReader r(top.at("initial_state"), "initial_state");
    std::string kind = initial_kind_name(in.kind);
    r.get("kind", kind);
    in.kind = parse_initial_kind(kind);
    if (r.has("local")) {
      const json& l = r.at("local");
      if (l.is_string()) in.local = {l.get<std::string>()};
      else r.get("local", in.local);
    }
    r.get("field_B", in.field_B);
    r.get("delta_B", in.delta_B);
    r.get("alpha", in.alpha);
    r.get("initial_chi", in.initial_chi);
    if (r.has("dmrg")) {
      impl::ObjectReader d(r.at("dmrg"), "initial_state.dmrg");
      if (d.has("policy")) impl::read_policy(d.at("policy"), "initial_state.dmrg.policy", in.dmrg.policy);
      if (d.has("krylov")) impl::read_krylov(d.at("krylov"), "initial_state.dmrg.krylov", in.dmrg.krylov);
      d.get("max_sweeps", in.dmrg.max_sweeps);
      d.get("max_restarts", in.dmrg.max_restarts);
      d.get("energy_tol", in.dmrg.energy_tol);
      d.finish();
    }
    std::string path;
    r.get("path", path);
    in.path = path;
    if (r.has("apply")) {
      const json& ops = r.at("apply");
      if (!ops.is_array()) throw ConfigError("initial_state.apply: expected an array");
      for (const auto& o : ops) {
        impl::ObjectReader a(o, "initial_state.apply[]");
        SiteOperation s;
        a.get("op", s.op);
        a.get("site", s.site);
        a.get("angle", s.angle);
        a.finish();
        in.apply.push_back(s);
      }
    }
    r.finish();
  }
  if (top.has("observables")) {
    std::vector<std::string> names;
    top.get("observables", names);
    c.observables.clear();
    for (const auto& s : names) c.observables.push_back(parse_observable(s));
  }
  top.get("observable_site", c.observable_site);
  if (top.has("outputs")) {
    impl::ObjectReader r(top.at("outputs"), "outputs");
    std::string dir;
    r.get("directory", dir);
    c.outputs.directory = dir;
    r.get("prefix", c.outputs.prefix);
    r.get("checkpoint_every", c.outputs.checkpoint_every);
    r.get("write_final_state", c.outputs.write_final_state);
    r.finish();
  }
  top.get("seed", c.seed);
  top.finish();
  c.validate();
  return c;
}

inline RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(is);
  } catch (const json::exception& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }
  return parse_run_config(j);
}

inline json to_json(const RunConfig& c) {
  json model = {{"name", model_name(c.model.model)}, {"n_sites", c.model.n_sites}, {"alpha", c.model.alpha},
                {"field_B", c.model.field_B},        {"delta_B", c.model.delta_B}, {"n_exps", c.model.n_exps},
                {"fit_range", c.fit_range}};
  json init = {{"kind", initial_kind_name(c.initial.kind)}, {"local", c.initial.local},
               {"initial_chi", c.initial.initial_chi}, {"path", c.initial.path.string()}};
  if (c.initial.field_B) init["field_B"] = *c.initial.field_B;
  if (c.initial.delta_B) init["delta_B"] = *c.initial.delta_B;
  if (c.initial.alpha) init["alpha"] = *c.initial.alpha;
  init["dmrg"] = {{"policy", impl::policy_json(c.initial.dmrg.policy)},
                  {"krylov", impl::krylov_json(c.initial.dmrg.krylov)},
                  {"max_sweeps", c.initial.dmrg.max_sweeps},
                  {"max_restarts", c.initial.dmrg.max_restarts},
                  {"energy_tol", c.initial.dmrg.energy_tol}};
  init["apply"] = json::array();
  for (const auto& a : c.initial.apply) init["apply"].push_back({{"op", a.op}, {"site", a.site}, {"angle", a.angle}});
  std::vector<std::string> obs;
  for (auto o : c.observables) obs.push_back(observable_name(o));
  json out = {{"schema_version", kSchemaVersion},
              {"model", model},
              {"evolution",
               {{"dt", c.evolution.dt}, {"n_steps", c.n_steps}, {"stride", c.stride}, {"dense_reference", c.dense_reference}}},
              {"policy", impl::policy_json(c.evolution.policy)},
              {"krylov", impl::krylov_json(c.evolution.krylov)},
              {"stability",
               {{"reorthonormalize", c.reorthonormalize},
                {"epsilon", c.stability.epsilon},
                {"norm_error_threshold", c.stability.norm_error_threshold},
                {"reorth_interval_min", c.stability.reorth_interval_min},
                {"velocity", c.velocity}}},
              {"partition", {{"p", c.partition.p}, {"mode", partition_mode_name(c.partition.mode)}, {"sizes", c.partition.sizes}}},
              {"transport", c.transport},
              {"initial_state", init},
              {"observables", obs},
              {"outputs",
               {{"directory", c.outputs.directory.string()},
                {"prefix", c.outputs.prefix},
                {"checkpoint_every", c.outputs.checkpoint_every},
                {"write_final_state", c.outputs.write_final_state}}},
              {"seed", c.seed}};
  if (c.observable_site) out["observable_site"] = *c.observable_site;
  return out;
}

}  // namespace ptdvp::harness
