#include <gtest/gtest.h>

#include <set>

#include "canopy/episode.hpp"
#include "canopy/nbv.hpp"
#include "canopy/scene.hpp"
#include "oracles.hpp"

using namespace canopy;

namespace {

CameraModel square_fov(double deg) {
  CameraModel c;
  c.theta_h = c.theta_v = deg2rad(deg);
  return c;
}

double angle_between(const Vec3& a, const Vec3& b) {
  return std::atan2(a.cross(b).norm(), a.dot(b));
}

Viewpoint with_utility(double x, double gain, double cost, double alpha) {
  Viewpoint v;
  v.pose = CameraPose::facing(Vec3(x, 0, 0), Vec3::UnitX());
  v.gain = gain;
  v.cost = cost;
  v.utility = gain - alpha * cost;
  return v;
}

// 0.7 m wide, 0.3 m tall midplane: 3 columns by 2 rows at the default camera and stand-off.
SceneModel small_scene() {
  const RoiBounds b(Vec3(0.8, -0.35, 0.6), Vec3(1.2, 0.35, 0.9), 0.04);
  std::vector<VoxelKey> geometry;
  for (int y = 2; y < b.dims()[1] - 2; ++y) {
    for (int z = 1; z < b.dims()[2] - 1; ++z) geometry.push_back({5, y, z});
  }
  return SceneModel(b, geometry, {SymptomInstance{kShepherdsCrook, Vec3::Zero(), {{5, 8, 3}}}}, 0, TreeParams{});
}

ReachabilityGrid everywhere() { return ReachabilityGrid::all(RoiBounds(Vec3::Constant(-1.0), Vec3::Constant(2.5), 0.05)); }

}  // namespace

TEST(Footprint, SixtyDegreeExample) {
  const auto f = midplane_footprint(square_fov(60.0), 0.9, 0.2);
  const double w = 2.0 * 0.9 * std::tan(deg2rad(30.0));
  EXPECT_NEAR(f.width, w, 1e-9);
  EXPECT_NEAR(f.height, w, 1e-9);
  EXPECT_NEAR(f.spacing_u, 0.8 * w, 1e-9);
  EXPECT_NEAR(f.spacing_v, 0.8 * w, 1e-9);
  EXPECT_NEAR(f.width, 1.0392, 1e-4);
  EXPECT_NEAR(f.spacing_u, 0.8314, 1e-4);
}

TEST(Footprint, ZeroOverlapAbutsAndBadOverlapThrows) {
  const auto f = midplane_footprint(CameraModel{}, 0.5, 0.0);
  EXPECT_EQ(f.spacing_u, f.width);
  EXPECT_EQ(f.spacing_v, f.height);
  EXPECT_THROW(midplane_footprint(CameraModel{}, 0.5, 1.0), ConfigError);
  EXPECT_THROW(midplane_footprint(CameraModel{}, 0.0, 0.2), ConfigError);
}

TEST(BaselineGrid, SixViewsInBoustrophedonOrder) {
  // Midplane 2 m wide (y) and 1.6 m tall (z).
  const RoiBounds roi(Vec3(1.0, -1.0, 0.2), Vec3(1.4, 1.0, 1.8), 0.04);
  const auto grid = baseline_grid(roi, square_fov(60.0), 0.9, 0.2, Vec3::UnitX());
  ASSERT_EQ(grid.size(), 6U);
  for (const auto& vp : grid) {
    EXPECT_NEAR(vp.pose.position.x(), 1.2 - 0.9, 1e-12);
    EXPECT_LT(angle_between(vp.pose.forward(), Vec3::UnitX()), 1e-9);
    EXPECT_EQ(vp.source, ViewpointSource::Grid);
  }
  // Row 0 bottom, left to right in +y; row 1 above it, reversed.
  EXPECT_LT(grid[0].pose.position.y(), grid[1].pose.position.y());
  EXPECT_LT(grid[1].pose.position.y(), grid[2].pose.position.y());
  EXPECT_GT(grid[3].pose.position.y(), grid[4].pose.position.y());
  EXPECT_GT(grid[4].pose.position.y(), grid[5].pose.position.y());
  EXPECT_NEAR(grid[3].pose.position.y(), grid[2].pose.position.y(), 1e-12);
  EXPECT_LT(grid[0].pose.position.z(), grid[3].pose.position.z());
}

TEST(BaselineGrid, MidplaneFullyCoveredForRandomSetups) {
  Rng rng(2024);
  for (int trial = 0; trial < 50; ++trial) {
    CameraModel cam;
    cam.theta_h = deg2rad(uniform(rng, 20.0, 90.0));
    cam.theta_v = deg2rad(uniform(rng, 20.0, 90.0));
    const double rho = uniform(rng, 0.0, 0.6);
    const double d = uniform(rng, 0.3, 1.2);
    const Vec3 lo(uniform(rng, -1, 1), uniform(rng, -1, 1), uniform(rng, -1, 1));
    const Vec3 hi = lo + Vec3(uniform(rng, 0.1, 2.5), uniform(rng, 0.1, 2.5), uniform(rng, 0.1, 2.5));
    Vec3 view(uniform(rng, -1, 1), uniform(rng, -1, 1), uniform(rng, -0.5, 0.5));
    if (trial % 2 == 0) view = Vec3::UnitX();
    const RoiBounds roi(lo, hi, 0.05);
    const auto grid = baseline_grid(roi, cam, d, rho, view);
    ASSERT_FALSE(grid.empty());

    const Eigen::Matrix3d frame = oracle::frame_for(view);
    const Vec3 f = frame.col(0);
    const Vec3 u = frame.col(1);
    const Vec3 v = frame.col(2);
    const Vec3 center = 0.5 * (lo + hi);
    double u_lo = 1e9, u_hi = -1e9, v_lo = 1e9, v_hi = -1e9;
    for (int c = 0; c < 8; ++c) {
      const Vec3 corner((c & 1) ? hi.x() : lo.x(), (c & 2) ? hi.y() : lo.y(), (c & 4) ? hi.z() : lo.z());
      u_lo = std::min(u_lo, (corner - center).dot(u));
      u_hi = std::max(u_hi, (corner - center).dot(u));
      v_lo = std::min(v_lo, (corner - center).dot(v));
      v_hi = std::max(v_hi, (corner - center).dot(v));
    }
    const double half_w = d * std::tan(cam.theta_h / 2.0);
    const double half_h = d * std::tan(cam.theta_v / 2.0);
    for (const auto& vp : grid) {
      const Vec3 foot = vp.pose.position + d * vp.pose.forward();
      ASSERT_NEAR((foot - center).dot(f), 0.0, 1e-9);
      ASSERT_LT(angle_between(vp.pose.forward(), f), 1e-9);
    }
    for (int i = 0; i <= 40; ++i) {
      for (int j = 0; j <= 40; ++j) {
        const Vec3 p = center + (u_lo + (u_hi - u_lo) * i / 40.0) * u + (v_lo + (v_hi - v_lo) * j / 40.0) * v;
        bool covered = false;
        for (const auto& vp : grid) {
          const Vec3 q = p - (vp.pose.position + d * vp.pose.forward());
          covered = covered || (std::abs(q.dot(u)) <= half_w + 1e-9 && std::abs(q.dot(v)) <= half_h + 1e-9);
        }
        ASSERT_TRUE(covered) << "trial " << trial << " sample " << i << "," << j;
      }
    }
  }
}

TEST(PerturbedGrid, ZeroPerViewIsIdentity) {
  Rng rng(1);
  const auto base = baseline_grid(RoiBounds(Vec3(1, -1, 0), Vec3(1.4, 1, 1.5), 0.04), CameraModel{}, 0.5, 0.2,
                                  Vec3::UnitX());
  const auto out = perturbed_grid(base, deg2rad(15.0), 0, rng);
  ASSERT_EQ(out.size(), base.size());
  for (std::size_t i = 0; i < out.size(); ++i) EXPECT_EQ(out[i].pose.position, base[i].pose.position);
}

TEST(PerturbedGrid, CapSamplesMatchUniformCap) {
  const double cone = deg2rad(10.0);
  Viewpoint vp;
  vp.pose = CameraPose::facing(Vec3(0.1, 0.2, 0.3), Vec3(1.0, 0.3, -0.2));
  Rng rng(77);
  const auto out = perturbed_grid({vp}, cone, 10000, rng);
  ASSERT_EQ(out.size(), 10001U);
  double sum = 0.0;
  double worst = 0.0;
  std::vector<double> cosines;
  for (std::size_t i = 1; i < out.size(); ++i) {
    EXPECT_EQ(out[i].pose.position, vp.pose.position);
    EXPECT_EQ(out[i].source, ViewpointSource::GridPerturbed);
    const double a = angle_between(out[i].pose.forward(), vp.pose.forward());
    worst = std::max(worst, a);
    sum += a;
    cosines.push_back(std::cos(a));
  }
  EXPECT_LE(worst, cone + 1e-9);
  const double expected = oracle::cap_mean_angle(cone);
  EXPECT_NEAR(sum / 10000.0, expected, 0.05 * expected);
  const double c0 = std::cos(cone);
  const double ks = oracle::ks_statistic(cosines, [&](double x) { return std::clamp((x - c0) / (1.0 - c0), 0.0, 1.0); });
  EXPECT_LT(ks, oracle::ks_critical(cosines.size()));
}

TEST(PerturbedGrid, DeterministicForFixedSeed) {
  Viewpoint vp;
  vp.pose = CameraPose::facing(Vec3::Zero(), Vec3::UnitX());
  Rng a(5);
  Rng b(5);
  const auto x = perturbed_grid({vp}, deg2rad(15.0), 20, a);
  const auto y = perturbed_grid({vp}, deg2rad(15.0), 20, b);
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_EQ(x[i].pose.orientation.coeffs(), y[i].pose.orientation.coeffs());
}

TEST(ClusterVoxels, CapSetsClusterCount) {
  const RoiBounds b(Vec3::Zero(), Vec3::Constant(2.0), 0.04);
  Rng rng(3);
  std::vector<VoxelKey> keys;
  for (int i = 0; i < 250; ++i) keys.push_back({i % 50, i / 50, 0});

  std::vector<VoxelKey> fifty(keys.begin(), keys.begin() + 50);
  const auto one = cluster_voxels(b, fifty, 100, rng);
  ASSERT_EQ(one.size(), 1U);
  Vec3 mean = Vec3::Zero();
  for (const auto& k : fifty) mean += b.center_of(k);
  EXPECT_LT((one[0].centroid - mean / 50.0).norm(), 1e-12);

  EXPECT_EQ(cluster_voxels(b, keys, 100, rng).size(), 3U);

  std::vector<VoxelKey> blobs;
  for (int i = 0; i < 20; ++i) {
    blobs.push_back({i % 4, i / 4, 0});
    blobs.push_back({40 + i % 4, 40 + i / 4, 40});
  }
  EXPECT_EQ(cluster_voxels(b, blobs, 100, rng).size(), 1U);
  EXPECT_TRUE(cluster_voxels(b, {}, 100, rng).empty());
  EXPECT_THROW(cluster_voxels(b, keys, 0, rng), ContractViolation);
}

TEST(ClusterVoxels, PartitionsInputAndCentroidsAreMeans) {
  const RoiBounds b(Vec3::Zero(), Vec3::Constant(1.2), 0.04);
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    std::set<VoxelKey> unique;
    const int n = uniform_int(rng, 1, 700);
    while (static_cast<int>(unique.size()) < n) {
      unique.insert({uniform_int(rng, 0, 29), uniform_int(rng, 0, 29), uniform_int(rng, 0, 29)});
    }
    const std::vector<VoxelKey> keys(unique.begin(), unique.end());
    const int cap = uniform_int(rng, 1, 150);
    const auto clusters = cluster_voxels(b, keys, cap, rng);
    EXPECT_LE(clusters.size(), (keys.size() + cap - 1) / cap);
    std::multiset<VoxelKey> seen;
    for (const auto& c : clusters) {
      ASSERT_FALSE(c.member_keys.empty());
      Vec3 m = Vec3::Zero();
      for (const auto& k : c.member_keys) {
        seen.insert(k);
        m += b.center_of(k);
      }
      EXPECT_LT((c.centroid - m / static_cast<double>(c.member_keys.size())).norm(), 1e-9);
    }
    EXPECT_EQ(std::set<VoxelKey>(seen.begin(), seen.end()), unique);
    EXPECT_EQ(seen.size(), unique.size());
  }
}

TEST(HemisphereSample, ConstraintsLookAtAndRadialDistribution) {
  const Vec3 c(1.0, 0.2, 0.8);
  const Vec3 facing = Vec3(-1.0, 0.2, 0.1).normalized();
  Rng rng(8);
  const auto out = hemisphere_sample(c, facing, 0.35, 0.6, 1000, rng, ViewpointSource::SemanticCluster);
  ASSERT_EQ(out.size(), 1000U);
  std::vector<double> radii;
  std::vector<double> heights;
  for (const auto& vp : out) {
    const Vec3 off = vp.pose.position - c;
    const double r = off.norm();
    ASSERT_GE(r, 0.35 - 1e-12);
    ASSERT_LE(r, 0.6 + 1e-12);
    ASSERT_GE(off.dot(facing), -1e-12);
    ASSERT_LT(angle_between(vp.pose.forward(), c - vp.pose.position), 1e-6);
    ASSERT_EQ(vp.source, ViewpointSource::SemanticCluster);
    radii.push_back(r);
    heights.push_back(off.dot(facing) / r);
  }
  const double lo3 = std::pow(0.35, 3);
  const double hi3 = std::pow(0.6, 3);
  EXPECT_LT(oracle::ks_statistic(radii, [&](double r) { return (r * r * r - lo3) / (hi3 - lo3); }), 0.05);
  // Uniform on a hemisphere: the cosine to the axis is uniform on [0, 1].
  EXPECT_LT(oracle::ks_statistic(heights, [](double h) { return std::clamp(h, 0.0, 1.0); }), oracle::ks_critical(heights.size()));
  EXPECT_THROW(hemisphere_sample(c, facing, 0.0, 0.5, 4, rng), ContractViolation);
  EXPECT_THROW(hemisphere_sample(c, facing, 0.6, 0.5, 4, rng), ContractViolation);
}

TEST(Reachability, ShellMembership) {
  SphericalShellSampler shell;
  shell.center = Vec3::Zero();
  shell.inner_radius = 0.2;
  shell.outer_radius = 0.9;
  Rng rng(7);
  const auto grid = build_reachability(shell.enclosing_bounds(0.05), 1000000, shell, rng);
  EXPECT_TRUE(grid.reachable(Vec3(0.5, 0, 0)));
  EXPECT_TRUE(grid.reachable(Vec3(0, -0.3, 0.4)));
  EXPECT_FALSE(grid.reachable(Vec3(1.5, 0, 0)));
  EXPECT_FALSE(grid.reachable(Vec3(0.01, 0.01, 0.01)));

  Rng one(1);
  EXPECT_EQ(build_reachability(shell.enclosing_bounds(0.05), 1, shell, one).reachable_count(), 1U);
}

TEST(Reachability, FilterKeepsExactlyReachableInOrder) {
  SphericalShellSampler shell;
  Rng rng(9);
  const auto grid = build_reachability(shell.enclosing_bounds(0.05), 200000, shell, rng);
  std::vector<Viewpoint> cands;
  for (int i = 0; i < 2000; ++i) {
    Viewpoint v;
    v.pose.position = Vec3(uniform(rng, -1.5, 1.5), uniform(rng, -1.5, 1.5), uniform(rng, -0.5, 2.5));
    cands.push_back(v);
  }
  const auto kept = filter_feasible(cands, grid);
  std::size_t j = 0;
  for (const auto& c : cands) {
    if (!grid.reachable(c.pose.position)) continue;
    ASSERT_LT(j, kept.size());
    EXPECT_EQ(kept[j++].pose.position, c.pose.position);
  }
  EXPECT_EQ(j, kept.size());
  // Far outside the shell nothing survives; deep inside the shell wall everything does.
  for (const auto& k : kept) EXPECT_LE((k.pose.position - shell.center).norm(), shell.outer_radius + 0.1);

  EXPECT_EQ(filter_feasible(cands, ReachabilityGrid::all(RoiBounds(Vec3::Constant(-2), Vec3::Constant(3), 0.1))).size(),
            cands.size());
  EXPECT_TRUE(filter_feasible(cands, ReachabilityGrid(RoiBounds(Vec3::Constant(-2), Vec3::Constant(3), 0.1))).empty());
}

TEST(Gain, FreshMapMatchesOracleAndChordCounts) {
  const RoiBounds b(Vec3::Zero(), Vec3::Constant(0.8), 0.04);
  const SemanticOctree map(b);
  const CameraModel cam = CameraModel{}.with_ray_grid(18, 24);
  const Vec3 eye(0.001, 0.4, 0.4);
  const auto pose = CameraPose::facing(eye, Vec3::UnitX());
  EXPECT_NEAR(volumetric_gain(pose, map, cam), oracle::blended_gain(map, eye, Vec3::UnitX(), cam, 0.0), 1e-9);

  // Unknown count per ray equals the number of voxels the chord passes through.
  Rng rng(5);
  for (int i = 0; i < 300; ++i) {
    const Vec3 o(uniform(rng, 0.0, 0.8), uniform(rng, 0.0, 0.8), uniform(rng, 0.0, 0.8));
    Vec3 d(uniform(rng, -1, 1), uniform(rng, -1, 1), uniform(rng, -1, 1));
    d.normalize();
    const double len = uniform(rng, 0.05, 1.2);
    EXPECT_EQ(march_gain_ray(map, o, d, len).unknown, oracle::chord_voxel_count(b, o, d, len)) << i;
  }
}

TEST(Gain, WallInFrontStopsRays) {
  const RoiBounds b(Vec3::Zero(), Vec3::Constant(0.8), 0.04);
  SemanticOctree map(b);
  for (int y = 0; y < 20; ++y) {
    for (int z = 0; z < 20; ++z) map.apply_occupancy_update({0, y, z}, 1.0);
  }
  const auto pose = CameraPose::facing(Vec3(0.01, 0.4, 0.4), Vec3::UnitX());
  EXPECT_EQ(volumetric_gain(pose, map, CameraModel{}.with_ray_grid(18, 24)), 0.0);
  // One unknown voxel in front of a wall two voxels deep.
  SemanticOctree map2(b);
  for (int y = 0; y < 20; ++y) {
    for (int z = 0; z < 20; ++z) map2.apply_occupancy_update({2, y, z}, 1.0);
  }
  const auto t = march_gain_ray(map2, Vec3(0.045, 0.41, 0.41), Vec3::UnitX(), 0.9);
  EXPECT_EQ(t.unknown, 1.0);
  EXPECT_NEAR(t.semantic, 0.7, 1e-12);
}

TEST(Gain, SemanticTermOfSingleVoxel) {
  const RoiBounds b(Vec3::Zero(), Vec3::Constant(0.4), 0.04);
  SemanticOctree map(b);
  for (std::size_t i = 0; i < b.voxel_count(); ++i) map.apply_occupancy_update(b.key_at(i), -0.4);
  SemanticVoxel v;
  v.observed = true;
  v.log_odds = 1.0;
  v.has_semantics = true;
  v.class_id = kShepherdsCrook;
  v.confidence = 0.3;
  map.set_voxel({6, 5, 5}, v);
  const auto t = march_gain_ray(map, Vec3(0.01, 0.21, 0.21), Vec3::UnitX(), 0.9);
  EXPECT_EQ(t.unknown, 0.0);
  EXPECT_NEAR(t.semantic, 0.7, 1e-12);
  const auto miss = march_gain_ray(map, Vec3(0.01, 0.05, 0.05), Vec3::UnitX(), 0.9);
  EXPECT_EQ(miss.unknown, 0.0);
  EXPECT_EQ(miss.semantic, 0.0);
}

TEST(Gain, FullyKnownConfidentMapGivesZero) {
  const RoiBounds b(Vec3::Zero(), Vec3::Constant(0.4), 0.04);
  SemanticOctree map(b);
  for (std::size_t i = 0; i < b.voxel_count(); ++i) {
    SemanticVoxel v;
    v.observed = true;
    v.log_odds = (i % 7 == 0) ? 2.0 : -1.0;
    if (v.log_odds > 0) {
      v.has_semantics = true;
      v.class_id = kCanker;
      v.confidence = 1.0;
    }
    map.set_voxel(b.key_at(i), v);
  }
  const CameraModel cam = CameraModel{}.with_ray_grid(18, 24);
  const auto pose = CameraPose::facing(Vec3(0.01, 0.2, 0.2), Vec3(1, 0.1, 0.05));
  for (double beta : {0.0, 0.3, 0.7, 1.0}) EXPECT_EQ(semantic_gain(pose, map, cam, beta), 0.0);
}

TEST(Gain, RandomMapsMatchOracleAndBlendIsAffine) {
  const RoiBounds b(Vec3::Zero(), Vec3::Constant(0.8), 0.04);
  const CameraModel cam = CameraModel{}.with_ray_grid(18, 24);
  Rng rng(31);
  for (int trial = 0; trial < 15; ++trial) {
    const auto map = oracle::random_map(b, rng, uniform(rng, 0.2, 0.8), uniform(rng, 0.01, 0.1));
    const Vec3 eye(uniform(rng, -0.3, 1.1), uniform(rng, -0.3, 1.1), uniform(rng, -0.3, 1.1));
    const Vec3 fwd = Vec3(0.4, 0.4, 0.4) - eye + Vec3(uniform(rng, -0.2, 0.2), uniform(rng, -0.2, 0.2), 0.0);
    const auto pose = CameraPose::facing(eye, fwd);
    const GainRays rays(cam);
    const double g0 = semantic_gain(pose, map, rays, 0.0);
    const double g5 = semantic_gain(pose, map, rays, 0.5);
    const double g1 = semantic_gain(pose, map, rays, 1.0);
    EXPECT_EQ(g0, volumetric_gain(pose, map, rays));
    EXPECT_NEAR(g0, oracle::blended_gain(map, eye, fwd, cam, 0.0), 1e-9);
    EXPECT_NEAR(semantic_gain(pose, map, rays, 0.7), oracle::blended_gain(map, eye, fwd, cam, 0.7), 1e-9);
    EXPECT_NEAR(g5, 0.5 * (g0 + g1), 1e-9);
    EXPECT_GE(g0, 0.0);
    EXPECT_GE(g1, 0.0);
  }
  EXPECT_THROW(semantic_gain(CameraPose{}, SemanticOctree(b), GainRays(cam), 1.5), ContractViolation);
}

TEST(Ranking, UtilityThenCostThenPosition) {
  std::vector<Viewpoint> v{with_utility(0.0, 4.0, 1.0, 0.1), with_utility(1.0, 10.0, 1.0, 0.1)};
  rank_viewpoints(v);
  EXPECT_NEAR(v[0].utility, 9.9, 1e-12);
  EXPECT_NEAR(v[1].utility, 3.9, 1e-12);
  EXPECT_EQ(v[0].gain, 10.0);

  // Equal utility: smaller cost first, then lexicographic position.
  std::vector<Viewpoint> tie{with_utility(0.0, 5.0, 2.0, 0.0), with_utility(1.0, 5.0, 1.0, 0.0),
                             with_utility(-1.0, 5.0, 1.0, 0.0)};
  rank_viewpoints(tie);
  EXPECT_EQ(tie[0].pose.position.x(), -1.0);
  EXPECT_EQ(tie[1].pose.position.x(), 1.0);
  EXPECT_EQ(tie[2].cost, 2.0);
  // With alpha > 0 equal gains resolve to the cheaper one through utility itself.
  std::vector<Viewpoint> cheap{with_utility(0.0, 5.0, 2.0, 0.1), with_utility(1.0, 5.0, 1.0, 0.1)};
  rank_viewpoints(cheap);
  EXPECT_EQ(cheap[0].cost, 1.0);
}

TEST(Ranking, CheckerRejectingTopReturnsSecond) {
  std::vector<Viewpoint> v{with_utility(0.0, 10.0, 1.0, 0.1), with_utility(1.0, 4.0, 1.0, 0.1)};
  rank_viewpoints(v);
  const auto pick = first_feasible(v, [](const Viewpoint& c) { return c.gain != 10.0; });
  ASSERT_TRUE(pick);
  EXPECT_EQ(pick->gain, 4.0);
  EXPECT_FALSE(first_feasible(v, [](const Viewpoint&) { return false; }));
  EXPECT_EQ(first_feasible(v, {})->gain, 10.0);
}

TEST(Ranking, ArgmaxInvariantUnderCommonScaling) {
  const auto scene = generate_scene(1, TreeParams::lab());
  SemanticOctree map(scene.bounds());
  Rng rng(4);
  const auto grid = baseline_grid(map.bounds(), CameraModel{}, 0.5, 0.2, Vec3::UnitX());
  map.insert_point_cloud(grid[0].pose.position, render_view(scene, grid[0].pose, CameraModel{}, DetectorModel{}, rng));
  PlannerConfig cfg;
  auto cands = generate_candidates(map, cfg, PlannerMode::Semantic, CameraModel{}, rng);
  score_candidates(cands, map, grid[0].pose, cfg, PlannerMode::Semantic,
                   GainRays(CameraModel{}.with_ray_grid(cfg.ig_ray_rows, cfg.ig_ray_cols)));
  auto ranked = cands;
  rank_viewpoints(ranked);
  for (double k : {0.5, 3.0, 17.0}) {
    auto scaled = cands;
    for (auto& c : scaled) {
      c.gain *= k;
      c.utility = c.gain - k * cfg.alpha * c.cost;
    }
    rank_viewpoints(scaled);
    EXPECT_EQ(scaled.front().pose.position, ranked.front().pose.position);
    EXPECT_EQ(scaled.front().pose.orientation.coeffs(), ranked.front().pose.orientation.coeffs());
  }
}

TEST(SelectNextView, ReturnsReachableAcceptedTopCandidate) {
  const auto scene = generate_scene(3, TreeParams::lab());
  SemanticOctree map(scene.bounds());
  Rng rng(6);
  const auto grid = baseline_grid(map.bounds(), CameraModel{}, 0.5, 0.2, Vec3::UnitX());
  map.insert_point_cloud(grid[0].pose.position, render_view(scene, grid[0].pose, CameraModel{}, DetectorModel{}, rng));

  SphericalShellSampler shell;
  Rng reach_rng(7);
  const auto reach = build_reachability(shell.enclosing_bounds(0.05), 300000, shell, reach_rng);
  const PlannerConfig cfg;
  for (PlannerMode mode : {PlannerMode::Volumetric, PlannerMode::Semantic}) {
    std::vector<Viewpoint> scored;
    const auto pick = select_next_view(map, grid[0].pose, cfg, mode, reach, CameraModel{}, rng, {}, &scored);
    ASSERT_TRUE(pick);
    ASSERT_FALSE(scored.empty());
    EXPECT_TRUE(reach.reachable(pick->pose.position));
    EXPECT_EQ(pick->pose.position, scored.front().pose.position);
    for (std::size_t i = 1; i < scored.size(); ++i) EXPECT_GE(scored[i - 1].utility, scored[i].utility);
    for (const auto& s : scored) {
      EXPECT_TRUE(reach.reachable(s.pose.position));
      EXPECT_NEAR(s.utility, s.gain - cfg.alpha * (s.pose.position - grid[0].pose.position).norm(), 1e-12);
      EXPECT_GE(s.gain, 0.0);
    }

    // A checker that refuses the current favourite moves the choice down the ranking.
    const Vec3 banned = scored.front().pose.position;
    Rng again(99);
    std::vector<Viewpoint> scored2;
    const auto pick2 = select_next_view(map, grid[0].pose, cfg, mode, reach, CameraModel{}, again,
                                        [&](const Viewpoint& v) { return v.pose.position != banned; }, &scored2);
    ASSERT_TRUE(pick2);
    EXPECT_NE(pick2->pose.position, banned);
    for (const auto& s : scored2) {
      if (s.pose.position == banned) continue;
      EXPECT_EQ(s.pose.position, pick2->pose.position);
      break;
    }
  }
  EXPECT_THROW(select_next_view(map, grid[0].pose, cfg, PlannerMode::Baseline, reach, CameraModel{}, rng),
               ContractViolation);
  const ReachabilityGrid nowhere(map.bounds());
  EXPECT_FALSE(select_next_view(map, grid[0].pose, cfg, PlannerMode::Volumetric, nowhere, CameraModel{}, rng));
}

TEST(RunEpisode, SingleViewGivesOneRecordWithCoverage) {
  const auto scene = small_scene();
  SemanticOctree map(scene.bounds());
  Rng rng(1);
  const auto res = run_episode(scene, map, PlannerMode::Volumetric, 1, EpisodeSettings{}, everywhere(), rng);
  ASSERT_EQ(res.records.size(), 1U);
  EXPECT_EQ(res.records[0].viewpoint_index, 1);
  EXPECT_GT(res.records[0].coverage, 0.0);
  EXPECT_EQ(res.records[0].elapsed, 0.0);
  EXPECT_FALSE(res.exhausted);
}

TEST(RunEpisode, BaselineWalksGridAndStopsWhenExhausted) {
  const auto scene = small_scene();
  const EpisodeSettings settings;
  const auto grid = baseline_grid(scene.bounds(), settings.camera, settings.planner.stand_off,
                                  settings.planner.overlap, Vec3::UnitX());
  ASSERT_EQ(grid.size(), 6U);
  SemanticOctree map(scene.bounds());
  Rng rng(2);
  const auto res = run_episode(scene, map, PlannerMode::Baseline, 30, settings, everywhere(), rng);
  ASSERT_EQ(res.records.size(), 6U);
  EXPECT_TRUE(res.exhausted);
  EXPECT_NE(res.note.find("exhausted"), std::string::npos);
  double travelled = 0.0;
  for (std::size_t i = 0; i < 6; ++i) {
    EXPECT_EQ(res.poses[i].position, grid[i].pose.position);
    EXPECT_EQ(res.records[i].viewpoint_index, static_cast<int>(i) + 1);
    if (i > 0) travelled += (grid[i].pose.position - grid[i - 1].pose.position).norm();
    EXPECT_NEAR(res.records[i].elapsed, travelled / settings.travel_speed, 1e-9);
    if (i > 0) {
      EXPECT_GE(res.records[i].coverage, res.records[i - 1].coverage);
    }
  }
}

TEST(RunEpisode, NbvCoverageNeverDecreases) {
  const auto scene = generate_scene(4, TreeParams::lab());
  SphericalShellSampler shell;
  Rng reach_rng(7);
  const auto reach = build_reachability(shell.enclosing_bounds(0.05), 300000, shell, reach_rng);
  for (PlannerMode mode : {PlannerMode::Volumetric, PlannerMode::Semantic}) {
    SemanticOctree map(scene.bounds());
    Rng rng(10);
    const auto res = run_episode(scene, map, mode, 6, EpisodeSettings{}, reach, rng);
    ASSERT_FALSE(res.records.empty());
    for (std::size_t i = 0; i < res.records.size(); ++i) {
      EXPECT_EQ(res.records[i].viewpoint_index, static_cast<int>(i) + 1);
      EXPECT_EQ(res.records[i].planner_mode, mode);
      if (i > 0) {
        EXPECT_GE(res.records[i].coverage, res.records[i - 1].coverage);
        EXPECT_GE(res.records[i].elapsed, res.records[i - 1].elapsed);
      }
    }
  }
  SemanticOctree map(scene.bounds());
  Rng rng(1);
  EXPECT_THROW(run_episode(scene, map, PlannerMode::Baseline, 0, EpisodeSettings{}, reach, rng), ContractViolation);
}

TEST(RunEpisode, UnreachableGridEndsImmediately) {
  const auto scene = small_scene();
  SemanticOctree map(scene.bounds());
  Rng rng(1);
  const auto res = run_episode(scene, map, PlannerMode::Semantic, 5, EpisodeSettings{},
                               ReachabilityGrid(RoiBounds(Vec3::Zero(), Vec3::Constant(0.1), 0.05)), rng);
  EXPECT_TRUE(res.records.empty());
  EXPECT_TRUE(res.exhausted);
}
