#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "nstw/nn/params.hpp"

namespace nstw::nn {

// Binary checkpoint, little-endian host layout:
//   "NSTWCKPT" | u32 version | str config_hash | u32 n_meta | (str key, f64 value)*
//   | u32 n_stores | (str store | u32 n_params | (str name | u32 rows | u32 cols | f64*rows*cols)*)*
// where str = u32 length + bytes. Values are stored column-major.
inline constexpr char kCheckpointMagic[8] = {'N', 'S', 'T', 'W', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointMeta {
  std::string config_hash;
  std::map<std::string, double> values;  // normalization constants and similar scalars
};

namespace detail {

inline void put_u32(std::ostream& o, std::uint32_t v) { o.write(reinterpret_cast<const char*>(&v), sizeof v); }
inline void put_f64(std::ostream& o, double v) { o.write(reinterpret_cast<const char*>(&v), sizeof v); }
inline void put_str(std::ostream& o, const std::string& s) {
  put_u32(o, static_cast<std::uint32_t>(s.size()));
  o.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::uint32_t get_u32(std::istream& i) {
  std::uint32_t v = 0;
  if (!i.read(reinterpret_cast<char*>(&v), sizeof v)) throw StructureError("checkpoint: truncated");
  return v;
}
inline double get_f64(std::istream& i) {
  double v = 0;
  if (!i.read(reinterpret_cast<char*>(&v), sizeof v)) throw StructureError("checkpoint: truncated");
  return v;
}
inline std::string get_str(std::istream& i) {
  const auto n = get_u32(i);
  if (n > (1u << 20)) throw StructureError("checkpoint: implausible string length");
  std::string s(n, '\0');
  if (!i.read(s.data(), n)) throw StructureError("checkpoint: truncated");
  return s;
}

}  // namespace detail

using NamedStores = std::vector<std::pair<std::string, const ParameterStore*>>;
using MutableStores = std::vector<std::pair<std::string, ParameterStore*>>;

inline void save_checkpoint(const std::string& path, const CheckpointMeta& meta, const NamedStores& stores) {
  std::ofstream o(path, std::ios::binary);
  if (!o) throw StructureError("checkpoint: cannot write " + path);
  o.write(kCheckpointMagic, sizeof kCheckpointMagic);
  detail::put_u32(o, kCheckpointVersion);
  detail::put_str(o, meta.config_hash);
  detail::put_u32(o, static_cast<std::uint32_t>(meta.values.size()));
  for (const auto& [k, v] : meta.values) {
    detail::put_str(o, k);
    detail::put_f64(o, v);
  }
  detail::put_u32(o, static_cast<std::uint32_t>(stores.size()));
  for (const auto& [store_name, store] : stores) {
    detail::put_str(o, store_name);
    detail::put_u32(o, static_cast<std::uint32_t>(store->size()));
    for (const auto& [name, p] : *store) {
      detail::put_str(o, name);
      detail::put_u32(o, static_cast<std::uint32_t>(p.value.rows()));
      detail::put_u32(o, static_cast<std::uint32_t>(p.value.cols()));
      o.write(reinterpret_cast<const char*>(p.value.data()),
              static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(p.value.size())));
    }
  }
  if (!o) throw StructureError("checkpoint: write failed for " + path);
}

// Loads into already-shaped stores; any missing name or shape difference is rejected
// before a single value is overwritten.
inline CheckpointMeta load_checkpoint(const std::string& path, const MutableStores& stores) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw StructureError("checkpoint not found: " + path);
  char magic[8];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kCheckpointMagic, sizeof magic) != 0)
    throw StructureError("checkpoint: bad magic in " + path);
  if (detail::get_u32(in) != kCheckpointVersion) throw StructureError("checkpoint: unsupported version");
  CheckpointMeta meta;
  meta.config_hash = detail::get_str(in);
  const auto n_meta = detail::get_u32(in);
  for (std::uint32_t i = 0; i < n_meta; ++i) {
    auto k = detail::get_str(in);
    meta.values[k] = detail::get_f64(in);
  }
  const auto n_stores = detail::get_u32(in);
  std::map<std::string, std::map<std::string, Matrix>> loaded;
  for (std::uint32_t s = 0; s < n_stores; ++s) {
    auto store_name = detail::get_str(in);
    const auto n = detail::get_u32(in);
    auto& dst = loaded[store_name];
    for (std::uint32_t k = 0; k < n; ++k) {
      auto name = detail::get_str(in);
      const auto rows = detail::get_u32(in);
      const auto cols = detail::get_u32(in);
      Matrix m(rows, cols);
      if (!in.read(reinterpret_cast<char*>(m.data()),
                   static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(m.size()))))
        throw StructureError("checkpoint: truncated");
      dst.emplace(std::move(name), std::move(m));
    }
  }
  for (const auto& [store_name, store] : stores) {
    auto it = loaded.find(store_name);
    if (it == loaded.end()) throw StructureError("checkpoint: missing parameter set '" + store_name + "'");
    if (it->second.size() != store->size())
      throw StructureError("checkpoint: '" + store_name + "' has " + std::to_string(it->second.size()) +
                           " parameters, expected " + std::to_string(store->size()));
    for (const auto& [name, p] : *store) {
      auto f = it->second.find(name);
      if (f == it->second.end()) throw StructureError("checkpoint: missing parameter '" + store_name + ":" + name + "'");
      if (f->second.rows() != p.value.rows() || f->second.cols() != p.value.cols())
        throw StructureError("checkpoint: shape mismatch for '" + store_name + ":" + name + "': expected " +
                             std::to_string(p.value.rows()) + "x" + std::to_string(p.value.cols()) + ", found " +
                             std::to_string(f->second.rows()) + "x" + std::to_string(f->second.cols()));
    }
  }
  for (const auto& [store_name, store] : stores)
    for (auto& [name, p] : *store) {
      p.value = loaded[store_name][name];
      p.clear_grad();
    }
  return meta;
}

}  // namespace nstw::nn
