#pragma once

// Contiguous partitions of the chain across p workers, and the alternating
// sweep directions that go with them.

#include <cstddef>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "ptdvp/error.hpp"

namespace ptdvp {

enum class PartitionMode { Uniform, Published, Explicit };

inline std::string partition_mode_name(PartitionMode m) {
  switch (m) {
    case PartitionMode::Uniform: return "uniform";
    case PartitionMode::Published: return "published";
    case PartitionMode::Explicit: return "explicit";
  }
  return "?";
}

inline PartitionMode parse_partition_mode(const std::string& s) {
  if (s == "uniform") return PartitionMode::Uniform;
  if (s == "published" || s == "tables") return PartitionMode::Published;
  if (s == "explicit") return PartitionMode::Explicit;
  throw ConfigError("unknown partition mode '" + s + "'");
}

/// Worker k owns sites [boundaries[k], boundaries[k+1]) (0-based).
struct PartitionPlan {
  std::vector<std::size_t> boundaries;
  std::size_t p = 1;

  std::size_t n_sites() const { return boundaries.back(); }
  std::size_t first(std::size_t k) const { return boundaries.at(k); }
  std::size_t last(std::size_t k) const { return boundaries.at(k + 1) - 1; }
  std::size_t size_of(std::size_t k) const { return boundaries.at(k + 1) - boundaries.at(k); }

  std::vector<std::size_t> sizes() const {
    std::vector<std::size_t> out;
    for (std::size_t k = 0; k < p; ++k) out.push_back(size_of(k));
    return out;
  }

  std::size_t owner(std::size_t site) const {
    detail::require(site < n_sites(), "PartitionPlan::owner: site out of range");
    std::size_t k = 0;
    while (boundaries[k + 1] <= site) ++k;
    return k;
  }

  /// True when worker k sweeps towards larger site indices in the first half
  /// of a timestep. The two central workers sweep away from the centre and
  /// neighbours alternate.
  bool sweeps_right_first(std::size_t k) const { return p == 1 || (k + p / 2) % 2 == 0; }

  void validate() const {
    detail::require(p >= 1, "partition plan: p must be >= 1");
    detail::require(p == 1 || p % 2 == 0, "partition plan: p must be 1 or even, got " + std::to_string(p));
    detail::require(boundaries.size() == p + 1, "partition plan: need p+1 boundaries");
    detail::require(boundaries.front() == 0, "partition plan: first boundary must be 0");
    for (std::size_t k = 0; k < p; ++k) {
      detail::require(boundaries[k + 1] >= boundaries[k] + 2,
                      "partition plan: partition " + std::to_string(k) + " holds fewer than two sites");
    }
  }
};

namespace detail {

inline void check_p(std::size_t n, std::size_t p) {
  require(n >= 2, "plan_partitions: need at least two sites");
  require(p >= 1, "plan_partitions: p must be >= 1");
  require(p == 1 || p % 2 == 0, "plan_partitions: p must be 1 or even, got " + std::to_string(p));
  require(2 * p <= n, "plan_partitions: p=" + std::to_string(p) + " exceeds N/2 for N=" + std::to_string(n));
}

inline PartitionPlan plan_from_sizes(const std::vector<std::size_t>& sizes) {
  PartitionPlan plan;
  plan.p = sizes.size();
  plan.boundaries.push_back(0);
  for (auto s : sizes) plan.boundaries.push_back(plan.boundaries.back() + s);
  return plan;
}

/// (first, central, last) for the long-range Ising (N=129) and XY (N=101) runs.
inline const std::map<std::pair<std::size_t, std::size_t>, std::vector<std::size_t>>& published_partitions() {
  static const auto tables = [] {
    std::map<std::pair<std::size_t, std::size_t>, std::vector<std::size_t>> t;
    auto edge = [&](std::size_t n, std::size_t p, std::size_t first, std::size_t central, std::size_t last) {
      std::vector<std::size_t> s(p, central);
      s.front() = first;
      s.back() = last;
      t[{n, p}] = s;
    };
    edge(129, 8, 17, 16, 16);
    edge(129, 16, 9, 8, 8);
    edge(129, 24, 10, 5, 9);
    edge(129, 32, 5, 4, 4);
    edge(101, 8, 15, 12, 14);
    edge(101, 16, 9, 6, 8);
    edge(101, 24, 7, 4, 6);
    edge(101, 32, 6, 3, 5);

    // XXX chain, N=201: heavier edge partitions
    auto runs = [&](std::size_t p, std::vector<std::pair<std::size_t, std::size_t>> blocks) {
      std::vector<std::size_t> s;
      for (auto [count, size] : blocks) s.insert(s.end(), count, size);
      t[{201, p}] = s;
    };
    runs(2, {{1, 101}, {1, 100}});
    runs(4, {{1, 85}, {2, 16}, {1, 84}});
    runs(8, {{1, 77}, {6, 8}, {1, 76}});
    runs(16, {{1, 65}, {1, 12}, {12, 4}, {1, 12}, {1, 64}});
    runs(24, {{1, 60}, {1, 11}, {20, 3}, {1, 11}, {1, 59}});
    runs(32, {{1, 33}, {1, 32}, {2, 6}, {24, 2}, {2, 6}, {2, 32}});
    return t;
  }();
  return tables;
}

}  // namespace detail

/// Equal shares; the remainder goes one site at a time to the first worker,
/// then the last, then the first again.
inline PartitionPlan plan_uniform(std::size_t n, std::size_t p) {
  detail::check_p(n, p);
  std::vector<std::size_t> sizes(p, n / p);
  std::size_t rem = n % p;
  for (std::size_t i = 0; rem > 0; ++i, --rem) {
    if (i % 2 == 0) ++sizes.front();
    else ++sizes.back();
  }
  PartitionPlan plan = detail::plan_from_sizes(sizes);
  plan.validate();
  return plan;
}

inline bool has_published_partition(std::size_t n, std::size_t p) {
  return detail::published_partitions().count({n, p}) > 0;
}

/// The published partitions; throws for (N, p) pairs that were not published.
inline PartitionPlan plan_published(std::size_t n, std::size_t p) {
  detail::check_p(n, p);
  auto it = detail::published_partitions().find({n, p});
  if (it == detail::published_partitions().end()) {
    throw ConfigError("no published partition for N=" + std::to_string(n) + ", p=" + std::to_string(p));
  }
  PartitionPlan plan = detail::plan_from_sizes(it->second);
  plan.validate();
  return plan;
}

inline PartitionPlan plan_explicit(std::size_t n, const std::vector<std::size_t>& sizes) {
  detail::require(!sizes.empty(), "explicit partition: no sizes given");
  detail::check_p(n, sizes.size());
  PartitionPlan plan = detail::plan_from_sizes(sizes);
  detail::require(plan.n_sites() == n, "explicit partition: sizes sum to " + std::to_string(plan.n_sites()) +
                                           ", chain has " + std::to_string(n) + " sites");
  plan.validate();
  return plan;
}

/// `sizes` is only read in explicit mode.
inline PartitionPlan plan_partitions(std::size_t n, std::size_t p, PartitionMode mode,
                                     const std::vector<std::size_t>& sizes = {}) {
  switch (mode) {
    case PartitionMode::Uniform: return plan_uniform(n, p);
    case PartitionMode::Published: return plan_published(n, p);
    case PartitionMode::Explicit:
      detail::require(sizes.size() == p, "explicit partition: expected " + std::to_string(p) + " sizes");
      return plan_explicit(n, sizes);
  }
  throw ConfigError("plan_partitions: bad mode");
}

}  // namespace ptdvp
