#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "dpc/error.hpp"
#include "dpc/sde.hpp"

namespace dpc {

static_assert(std::endian::native == std::endian::little, "binary formats assume little-endian");

inline constexpr std::uint32_t kFormatVersion = 1;

namespace detail {

inline void write_u32(std::ostream& os, std::uint32_t v) { os.write(reinterpret_cast<const char*>(&v), 4); }
inline void write_u64(std::ostream& os, std::uint64_t v) { os.write(reinterpret_cast<const char*>(&v), 8); }

inline void write_doubles(std::ostream& os, const double* p, std::size_t n) {
  os.write(reinterpret_cast<const char*>(p), static_cast<std::streamsize>(n * sizeof(double)));
}

inline void read_exact(std::istream& is, void* dst, std::size_t n, const std::string& what) {
  is.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(is.gcount()) != n) throw IoError(what + ": truncated file");
}

inline std::uint32_t read_u32(std::istream& is, const std::string& what) {
  std::uint32_t v = 0;
  read_exact(is, &v, 4, what);
  return v;
}

inline std::uint64_t read_u64(std::istream& is, const std::string& what) {
  std::uint64_t v = 0;
  read_exact(is, &v, 8, what);
  return v;
}

/// magic (8 bytes) | u32 version | u64 header length | JSON header
inline void write_preamble(std::ostream& os, const char (&magic)[9], const nlohmann::json& header) {
  os.write(magic, 8);
  write_u32(os, kFormatVersion);
  const std::string h = header.dump();
  write_u64(os, h.size());
  os.write(h.data(), static_cast<std::streamsize>(h.size()));
}

inline nlohmann::json read_preamble(std::istream& is, const char (&magic)[9], const std::string& what) {
  char m[8];
  read_exact(is, m, 8, what);
  if (std::memcmp(m, magic, 8) != 0) throw IoError(what + ": not a " + std::string(magic, 7) + " file");
  const std::uint32_t version = read_u32(is, what);
  if (version != kFormatVersion)
    throw IoError(what + ": unsupported format version " + std::to_string(version));
  const std::uint64_t len = read_u64(is, what);
  if (len > (std::uint64_t{1} << 32)) throw IoError(what + ": corrupt header length");
  std::string h(len, '\0');
  read_exact(is, h.data(), len, what);
  try {
    return nlohmann::json::parse(h);
  } catch (const nlohmann::json::exception& e) {
    throw IoError(what + ": corrupt header: " + e.what());
  }
}

inline std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open '" + path.string() + "' for writing");
  return os;
}

inline std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open '" + path.string() + "'");
  return is;
}

}  // namespace detail

inline void write_dataset(const std::filesystem::path& path, const TrajectoryDataset& d) {
  std::ofstream os = detail::open_out(path);
  const nlohmann::json header = {{"label", d.label},
                                 {"seed", d.seed},
                                 {"dt", d.dt},
                                 {"n_samples", d.n_samples},
                                 {"n_replications", d.n_replications},
                                 {"n_steps", d.n_steps},
                                 {"dim_state", d.dim_state},
                                 {"dim_params", d.dim_params},
                                 {"negative_state_events", d.negative_state_events}};
  detail::write_preamble(os, "DPCDATA1", header);
  // params row-major
  std::vector<double> p(d.n_samples * static_cast<std::size_t>(d.dim_params));
  for (std::size_t i = 0; i < d.n_samples; ++i)
    for (int k = 0; k < d.dim_params; ++k)
      p[i * static_cast<std::size_t>(d.dim_params) + static_cast<std::size_t>(k)] =
          d.params(static_cast<Eigen::Index>(i), k);
  detail::write_doubles(os, p.data(), p.size());
  detail::write_doubles(os, d.trajectories.data(), d.trajectories.size());
  if (!os) throw IoError("write failed for '" + path.string() + "'");
}

inline TrajectoryDataset read_dataset(const std::filesystem::path& path) {
  std::ifstream is = detail::open_in(path);
  const std::string what = "dataset '" + path.string() + "'";
  const nlohmann::json h = detail::read_preamble(is, "DPCDATA1", what);
  TrajectoryDataset d;
  try {
    d = TrajectoryDataset(h.at("n_samples").get<std::size_t>(), h.at("n_replications").get<std::size_t>(),
                          h.at("n_steps").get<std::size_t>(), h.at("dim_state").get<int>(),
                          h.at("dim_params").get<int>());
    d.label = h.at("label").get<std::string>();
    d.seed = h.at("seed").get<std::uint64_t>();
    d.dt = h.at("dt").get<double>();
    d.negative_state_events = h.at("negative_state_events").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw IoError(what + ": malformed header: " + e.what());
  }
  std::vector<double> p(d.n_samples * static_cast<std::size_t>(d.dim_params));
  detail::read_exact(is, p.data(), p.size() * sizeof(double), what);
  for (std::size_t i = 0; i < d.n_samples; ++i)
    for (int k = 0; k < d.dim_params; ++k)
      d.params(static_cast<Eigen::Index>(i), k) =
          p[i * static_cast<std::size_t>(d.dim_params) + static_cast<std::size_t>(k)];
  detail::read_exact(is, d.trajectories.data(), d.trajectories.size() * sizeof(double), what);
  if (is.peek() != std::char_traits<char>::eof()) throw IoError(what + ": trailing bytes");
  return d;
}

/// One row per stored state: i, j, t, time, params..., state...
inline void write_dataset_csv(const std::filesystem::path& path, const TrajectoryDataset& d) {
  std::ofstream os = detail::open_out(path);
  os.precision(17);
  os << "i,j,t,time";
  for (int k = 0; k < d.dim_params; ++k) os << ",xi" << k;
  for (int s = 0; s < d.dim_state; ++s) os << ",x" << s;
  os << '\n';
  for (std::size_t i = 0; i < d.n_samples; ++i)
    for (std::size_t j = 0; j < d.n_replications; ++j)
      for (std::size_t t = 0; t <= d.n_steps; ++t) {
        os << i << ',' << j << ',' << t << ',' << static_cast<double>(t) * d.dt;
        for (int k = 0; k < d.dim_params; ++k) os << ',' << d.params(static_cast<Eigen::Index>(i), k);
        for (int s = 0; s < d.dim_state; ++s) os << ',' << d.at(i, j, t, s);
        os << '\n';
      }
  if (!os) throw IoError("write failed for '" + path.string() + "'");
}

/// FNV-1a 64-bit over a file's bytes, as 16 hex digits.
inline std::string file_hash(const std::filesystem::path& path) {
  std::ifstream is = detail::open_in(path);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[1 << 16];
  while (is) {
    is.read(buf, sizeof buf);
    for (std::streamsize k = 0; k < is.gcount(); ++k) {
      h ^= static_cast<unsigned char>(buf[k]);
      h *= 0x100000001b3ULL;
    }
  }
  std::ostringstream os;
  os << std::hex;
  os.width(16);
  os.fill('0');
  os << h;
  return os.str();
}

inline std::string string_hash(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  std::ostringstream os;
  os << std::hex;
  os.width(16);
  os.fill('0');
  os << h;
  return os.str();
}

}  // namespace dpc
