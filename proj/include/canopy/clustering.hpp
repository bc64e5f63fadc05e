#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include "canopy/random.hpp"
#include "canopy/voxel_grid.hpp"

namespace canopy {

struct VoxelCluster {
  std::vector<VoxelKey> member_keys;
  Vec3 centroid = Vec3::Zero();
};

inline constexpr int kKMeansMaxIterations = 50;

/// Lloyd's k-means over voxel centres with k = ceil(|keys| / cap) and k-means++ seeding.
///
/// Stops when assignments no longer change or after kKMeansMaxIterations. Empty clusters
/// are dropped; every key lands in exactly one returned cluster. Members keep input order.
inline std::vector<VoxelCluster> cluster_voxels(const RoiBounds& grid, const std::vector<VoxelKey>& keys, int cap,
                                                Rng& rng) {
  if (cap < 1) throw ContractViolation("cluster cap must be >= 1");
  if (keys.empty()) return {};
  const std::size_t n = keys.size();
  const std::size_t k = (n + static_cast<std::size_t>(cap) - 1) / static_cast<std::size_t>(cap);

  std::vector<Vec3> pts(n);
  for (std::size_t i = 0; i < n; ++i) pts[i] = grid.center_of(keys[i]);

  // k-means++ seeding.
  std::vector<Vec3> centers;
  centers.reserve(k);
  centers.push_back(pts[uniform_index(rng, n)]);
  std::vector<double> d2(n, std::numeric_limits<double>::infinity());
  while (centers.size() < k) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], (pts[i] - centers.back()).squaredNorm());
      total += d2[i];
    }
    std::size_t pick = n - 1;
    if (total > 0.0) {
      double target = uniform01(rng) * total;
      for (std::size_t i = 0; i < n; ++i) {
        target -= d2[i];
        if (target < 0.0) {
          pick = i;
          break;
        }
      }
    } else {
      pick = uniform_index(rng, n);
    }
    centers.push_back(pts[pick]);
  }

  std::vector<std::size_t> assign(n, k);
  for (int iter = 0; iter < kKMeansMaxIterations; ++iter) {
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < k; ++c) {
        const double d = (pts[i] - centers[c]).squaredNorm();
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      if (assign[i] != best) {
        assign[i] = best;
        changed = true;
      }
    }
    if (!changed) break;
    std::vector<Vec3> sums(k, Vec3::Zero());
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      sums[assign[i]] += pts[i];
      ++counts[assign[i]];
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] > 0) centers[c] = sums[c] / static_cast<double>(counts[c]);
    }
  }

  std::vector<VoxelCluster> clusters(k);
  for (std::size_t i = 0; i < n; ++i) clusters[assign[i]].member_keys.push_back(keys[i]);
  std::vector<VoxelCluster> out;
  for (auto& c : clusters) {
    if (c.member_keys.empty()) continue;
    Vec3 sum = Vec3::Zero();
    for (const auto& key : c.member_keys) sum += grid.center_of(key);
    c.centroid = sum / static_cast<double>(c.member_keys.size());
    out.push_back(std::move(c));
  }
  return out;
}

}  // namespace canopy
