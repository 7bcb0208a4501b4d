// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <algorithm>
#include <random>
#include <set>

#include "pcrt/grid.hpp"

using namespace pcrt;

namespace {

Scene points_only(std::vector<AugmentedPoint> points) {
  Scene s;
  s.points = std::move(points);
  s.transmitters = {{0, 0, 10}};
  s.receivers = {{1, 0, 10}};
  s.materials = {{2.0, 0.0, 0.0}};
  s.material_ids = {0};
  std::uint32_t max_surface = 0;
  for (const auto& p : s.points) max_surface = std::max(max_surface, p.surface_label);
  for (std::uint32_t i = 0; i <= max_surface; ++i) s.surface_ids.push_back(i);
  s.bounds = compute_bounds(s);
  return s;
}

AugmentedPoint pt(double x, double y, double z, std::uint32_t surface = 0) {
  return {{x, y, z}, {0, 0, 1}, surface, 0};
}

} // namespace

TEST_CASE("points in one voxel share a DPS with the mean reception point") {
  const Scene s = points_only({pt(0.01, 0.01, 0.01), pt(0.05, 0.05, 0.05)});
  const auto dps = build_grid(s, {0.0625}, 0.015);
  REQUIRE(dps.size() == 1);
  CHECK(dps[0].point_indices.size() == 2);
  CHECK(dps[0].reception_point.x == doctest::Approx(0.03).epsilon(1e-9));
  CHECK(dps[0].reception_point.y == doctest::Approx(0.03).epsilon(1e-9));
  CHECK(dps[0].reception_point.z == doctest::Approx(0.03).epsilon(1e-9));
}

TEST_CASE("floor binning separates points across the voxel boundary") {
  const Scene s = points_only({pt(0.01, 0, 0), pt(0.07, 0, 0)});
  const auto dps = build_grid(s, {0.0625}, 0.015);
  CHECK(dps.size() == 2);
}

TEST_CASE("AABB contains members inflated by the disk radius") {
  const double r = 0.015;
  const Scene s = points_only({pt(0.01, 0.02, 0.03), pt(0.05, 0.04, 0.01)});
  const auto dps = build_grid(s, {0.0625}, r);
  REQUIRE(dps.size() == 1);
  for (const auto& p : s.points) {
    CHECK(dps[0].aabb.contains(p.position + Vec3{r, 0, 0} * 0.999));
    CHECK(dps[0].aabb.contains(p.position - Vec3{0, r, 0} * 0.999));
    CHECK(dps[0].aabb.contains(p.position + Vec3{0, 0, r} * 0.999));
  }
}

TEST_CASE("dominant surface label is the most frequent, ties to the smallest") {
  const Scene s = points_only({pt(0.01, 0, 0, 2), pt(0.02, 0, 0, 2), pt(0.03, 0, 0, 1)});
  auto dps = build_grid(s, {0.0625}, 0.015);
  REQUIRE(dps.size() == 1);
  CHECK(dps[0].dominant_surface_label == 2);

  const Scene tie = points_only({pt(0.01, 0, 0, 3), pt(0.02, 0, 0, 1)});
  dps = build_grid(tie, {0.0625}, 0.015);
  CHECK(dps[0].dominant_surface_label == 1);
}

TEST_CASE("random cloud partition: disjoint, complete, re-binnable, deterministic") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> coord(-3.0, 3.0);
  std::vector<AugmentedPoint> points;
  for (int i = 0; i < 10000; ++i) points.push_back(pt(coord(rng), coord(rng), coord(rng)));
  const Scene s = points_only(std::move(points));
  const VoxelGridConfig cfg{0.0625};
  const auto dps = build_grid(s, cfg, 0.015);

  std::size_t total = 0;
  std::set<std::uint32_t> seen;
  for (const auto& d : dps) {
    total += d.point_indices.size();
    for (const auto idx : d.point_indices) {
      CHECK(seen.insert(idx).second); // disjoint
      CHECK(voxel_of(s.points[idx].position, cfg.voxel_size) == d.voxel);
    }
    // Reception point maps back to its own voxel.
    CHECK(voxel_of(d.reception_point, cfg.voxel_size) == d.voxel);
  }
  CHECK(total == s.points.size());

  // Lexicographic voxel order and bit-identical rebuild.
  for (std::size_t i = 1; i < dps.size(); ++i) CHECK(dps[i - 1].voxel < dps[i].voxel);
  const auto dps2 = build_grid(s, cfg, 0.015);
  REQUIRE(dps2.size() == dps.size());
  for (std::size_t i = 0; i < dps.size(); ++i) {
    CHECK(dps2[i].voxel == dps[i].voxel);
    CHECK(dps2[i].point_indices == dps[i].point_indices);
    CHECK(dps2[i].reception_point == dps[i].reception_point);
  }
}

TEST_CASE("accel returns the DPS for a ray through its box") {
  const Scene s = points_only({pt(0.01, 0.01, 0.01), pt(0.05, 0.05, 0.05)});
  const auto dps = build_grid(s, {0.0625}, 0.015);
  const auto accel = AccelStructure::build(dps);
  const Ray through{{0.03, 0.03, 1.0}, {0, 0, -1}};
  CHECK(accel.candidates(through, 100.0) == std::vector<std::uint32_t>{0});

  const Ray outside{{50.0, 50.0, 1.0}, {0, 0, -1}};
  CHECK(accel.candidates(outside, 100.0).empty());
}

TEST_CASE("accel voxel lookup") {
  const Scene s = points_only({pt(0.01, 0, 0), pt(0.07, 0, 0)});
  const auto dps = build_grid(s, {0.0625}, 0.015);
  const auto accel = AccelStructure::build(dps);
  REQUIRE(accel.dps_of_voxel(dps[0].voxel).has_value());
  CHECK(*accel.dps_of_voxel(dps[0].voxel) == 0);
  CHECK(!accel.dps_of_voxel({100, 100, 100}).has_value());
}

TEST_CASE("1k random rays: accel candidates equal brute-force AABB hits after filtering") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> coord(-3.0, 3.0);
  std::vector<AugmentedPoint> points;
  for (int i = 0; i < 4000; ++i) points.push_back(pt(coord(rng), coord(rng), coord(rng)));
  const Scene s = points_only(std::move(points));
  const auto dps = build_grid(s, {0.125}, 0.015);
  const auto accel = AccelStructure::build(dps);

  std::uniform_real_distribution<double> origin(-5.0, 5.0);
  for (int trial = 0; trial < 1000; ++trial) {
    const Ray ray{{origin(rng), origin(rng), origin(rng)},
                  normalized({coord(rng), coord(rng), coord(rng) + 0.01})};
    std::set<std::uint32_t> brute;
    for (std::uint32_t i = 0; i < dps.size(); ++i)
      if (dps[i].aabb.ray_entry(ray, 1e30) >= 0.0) brute.insert(i);

    const auto raw = accel.candidates(ray, 1e30);
    std::set<std::uint32_t> filtered;
    for (const auto i : raw)
      if (dps[i].aabb.ray_entry(ray, 1e30) >= 0.0) filtered.insert(i);

    // No false negatives: every brute hit must be in the candidate set.
    for (const auto i : brute) CHECK(std::find(raw.begin(), raw.end(), i) != raw.end());
    CHECK(filtered == brute);
  }
}
