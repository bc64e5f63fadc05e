#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <type_traits>

#include "canopy/semantic_octree.hpp"

namespace canopy {

// Binary map snapshot, little-endian:
//   magic "CNPYMAP\0" | u32 version
//   f64 min[3] | f64 max[3] | f64 resolution
//   f64 gamma, lambda, background_confidence, hit, miss, clamp_min, clamp_max, threshold
//   u64 record_count
//   records: i32 ix, iy, iz | f64 log_odds | i32 class_id | f64 confidence | u8 flags
// flags bit0 = has_semantics. Only observed voxels are written, in linear index order.
inline constexpr std::array<char, 8> kSnapshotMagic{'C', 'N', 'P', 'Y', 'M', 'A', 'P', '\0'};
inline constexpr std::uint32_t kSnapshotVersion = 1;

namespace detail {

template <class T>
void put(std::ostream& os, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  std::array<unsigned char, sizeof(T)> bytes;
  std::memcpy(bytes.data(), &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  os.write(reinterpret_cast<const char*>(bytes.data()), sizeof(T));
}

template <class T>
T get(std::istream& is) {
  std::array<unsigned char, sizeof(T)> bytes;
  if (!is.read(reinterpret_cast<char*>(bytes.data()), sizeof(T))) throw FormatError("truncated map snapshot");
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  T value;
  std::memcpy(&value, bytes.data(), sizeof(T));
  return value;
}

}  // namespace detail

inline void write_snapshot(const SemanticOctree& map, std::ostream& os) {
  using detail::put;
  os.write(kSnapshotMagic.data(), kSnapshotMagic.size());
  put<std::uint32_t>(os, kSnapshotVersion);
  const auto& b = map.bounds();
  for (int a = 0; a < 3; ++a) put<double>(os, b.min_corner()[a]);
  for (int a = 0; a < 3; ++a) put<double>(os, b.max_corner()[a]);
  put<double>(os, b.resolution());
  const auto& p = map.params();
  for (double v : {p.gamma, p.lambda, p.background_confidence, p.hit_log_odds, p.miss_log_odds, p.clamp_min,
                   p.clamp_max, p.occupancy_threshold}) {
    put<double>(os, v);
  }
  put<std::uint64_t>(os, map.known_count());
  map.for_each_observed([&](const VoxelKey& k, const SemanticVoxel& v) {
    put<std::int32_t>(os, k.ix);
    put<std::int32_t>(os, k.iy);
    put<std::int32_t>(os, k.iz);
    put<double>(os, v.log_odds);
    put<std::int32_t>(os, v.class_id);
    put<double>(os, v.confidence);
    put<std::uint8_t>(os, v.has_semantics ? 1 : 0);
  });
}

inline SemanticOctree read_snapshot(std::istream& is) {
  using detail::get;
  std::array<char, 8> magic{};
  if (!is.read(magic.data(), magic.size()) || magic != kSnapshotMagic) throw FormatError("not a map snapshot");
  const auto version = get<std::uint32_t>(is);
  if (version != kSnapshotVersion) throw FormatError("unsupported map snapshot version " + std::to_string(version));
  Vec3 lo, hi;
  for (int a = 0; a < 3; ++a) lo[a] = get<double>(is);
  for (int a = 0; a < 3; ++a) hi[a] = get<double>(is);
  const double res = get<double>(is);
  FusionParams p;
  p.gamma = get<double>(is);
  p.lambda = get<double>(is);
  p.background_confidence = get<double>(is);
  p.hit_log_odds = get<double>(is);
  p.miss_log_odds = get<double>(is);
  p.clamp_min = get<double>(is);
  p.clamp_max = get<double>(is);
  p.occupancy_threshold = get<double>(is);
  SemanticOctree map(RoiBounds(lo, hi, res), p);
  const auto count = get<std::uint64_t>(is);
  if (count > map.bounds().voxel_count()) throw FormatError("snapshot record count exceeds ROI size");
  for (std::uint64_t i = 0; i < count; ++i) {
    VoxelKey k;
    k.ix = get<std::int32_t>(is);
    k.iy = get<std::int32_t>(is);
    k.iz = get<std::int32_t>(is);
    SemanticVoxel v;
    v.log_odds = get<double>(is);
    v.class_id = get<std::int32_t>(is);
    v.confidence = get<double>(is);
    v.has_semantics = get<std::uint8_t>(is) & 1;
    v.observed = true;
    if (!map.bounds().contains(k)) throw FormatError("snapshot record outside ROI");
    map.set_voxel(k, v);
  }
  return map;
}

inline void save_snapshot(const SemanticOctree& map, const std::string& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw FormatError("cannot open " + path + " for writing");
  write_snapshot(map, os);
  if (!os) throw FormatError("failed writing " + path);
}

inline SemanticOctree load_snapshot(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open " + path);
  return read_snapshot(is);
}

}  // namespace canopy
