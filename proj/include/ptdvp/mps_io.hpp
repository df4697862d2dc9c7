#pragma once

// Binary MPS container (little-endian):
//
//   char[8]  magic "PTDVPMPS"
//   u32      version (1)
//   u64      N
//   u64[N]   physical dimensions
//   per site:  u64 chi_left, u64 d, u64 chi_right, then chi_left*d*chi_right
//              (re, im) f64 pairs in row-major order
//   per bond:  u64 chi, then chi f64 Schmidt weights

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>

#include "ptdvp/error.hpp"
#include "ptdvp/mps.hpp"

namespace ptdvp {

inline constexpr char kMpsMagic[8] = {'P', 'T', 'D', 'V', 'P', 'M', 'P', 'S'};
inline constexpr std::uint32_t kMpsFormatVersion = 1;

namespace detail {

static_assert(std::endian::native == std::endian::little, "MPS container assumes a little-endian host");

template <typename T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw ConfigError("MPS container truncated");
  return v;
}

}  // namespace detail

inline void write_mps(std::ostream& os, const InvCanonicalMps& psi) {
  os.write(kMpsMagic, sizeof(kMpsMagic));
  detail::put<std::uint32_t>(os, kMpsFormatVersion);
  detail::put<std::uint64_t>(os, psi.size());
  for (auto d : psi.phys_dims()) detail::put<std::uint64_t>(os, d);
  for (const auto& s : psi.sites()) {
    detail::put<std::uint64_t>(os, s.chi_left());
    detail::put<std::uint64_t>(os, s.phys());
    detail::put<std::uint64_t>(os, s.chi_right());
    for (const auto& x : s.tensor().data()) {
      detail::put<double>(os, x.real());
      detail::put<double>(os, x.imag());
    }
  }
  for (const auto& b : psi.bonds()) {
    detail::put<std::uint64_t>(os, b.size());
    for (double l : b.lambda) detail::put<double>(os, l);
  }
  if (!os) throw NumericalError("failed writing MPS container");
}

inline InvCanonicalMps read_mps(std::istream& is) {
  char magic[8];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kMpsMagic, sizeof(magic)) != 0) throw ConfigError("not an MPS container");
  const auto version = detail::get<std::uint32_t>(is);
  if (version != kMpsFormatVersion) throw ConfigError("unsupported MPS container version " + std::to_string(version));
  const auto n = detail::get<std::uint64_t>(is);
  if (n == 0 || n > (1u << 24)) throw ConfigError("MPS container: bad site count");
  std::vector<std::size_t> phys(n);
  for (auto& d : phys) d = detail::get<std::uint64_t>(is);

  constexpr std::uint64_t kMaxElems = std::uint64_t{1} << 32;
  std::vector<SiteTensor> sites;
  for (std::uint64_t j = 0; j < n; ++j) {
    const auto cl = detail::get<std::uint64_t>(is);
    const auto d = detail::get<std::uint64_t>(is);
    const auto cr = detail::get<std::uint64_t>(is);
    if (d != phys[j]) throw ShapeError("MPS container: physical dimension mismatch at site " + std::to_string(j));
    if (cl == 0 || cr == 0 || d == 0 || cl * d * cr > kMaxElems) throw ConfigError("MPS container: bad site dims");
    SiteTensor s(cl, d, cr);
    for (auto& x : s.tensor().data()) {
      const double re = detail::get<double>(is);
      const double im = detail::get<double>(is);
      x = cplx(re, im);
    }
    sites.push_back(std::move(s));
  }
  std::vector<BondWeights> bonds;
  for (std::uint64_t j = 0; j + 1 < n; ++j) {
    const auto chi = detail::get<std::uint64_t>(is);
    if (chi == 0 || chi > kMaxElems) throw ConfigError("MPS container: bad bond size");
    std::vector<double> lam(chi);
    for (auto& l : lam) l = detail::get<double>(is);
    bonds.push_back(BondWeights::from_lambda(std::move(lam)));
  }
  return {std::move(sites), std::move(bonds)};
}

inline void save_mps(const std::filesystem::path& path, const InvCanonicalMps& psi) {
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw ConfigError("cannot open " + tmp + " for writing");
    write_mps(os, psi);
  }
  std::filesystem::rename(tmp, path);
}

inline InvCanonicalMps load_mps(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("cannot open " + path.string());
  return read_mps(is);
}

}  // namespace ptdvp
