// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <set>

#include "pcrt/synthgen.hpp"

using namespace pcrt;

TEST_CASE("unit plane at density 1e4 gives 10000 points with exact normals") {
  SynthSpec spec;
  spec.shape = SynthShape::Plane;
  spec.density = 10000;
  spec.noise = 0.0;
  const Scene s = generate(spec);
  CHECK(s.points.size() == 10000);
  for (const auto& p : s.points) {
    CHECK(p.normal == Vec3{0, 0, 1});
    CHECK(std::abs(p.position.z) < 1e-12);
  }
  CHECK(validate_scene(s).empty());
}

TEST_CASE("corner has two surface labels and one perpendicular edge") {
  SynthSpec spec;
  spec.shape = SynthShape::Corner;
  spec.density = 400;
  const Scene s = generate(spec);
  std::set<std::uint32_t> labels;
  for (const auto& p : s.points) labels.insert(p.surface_label);
  CHECK(labels == std::set<std::uint32_t>{0, 1});
  REQUIRE(s.edges.size() == 1);
  CHECK(std::abs(dot(s.edges[0].normal_a, s.edges[0].normal_b)) < 1e-12);
}

TEST_CASE("noise statistics stay within the half-normal bound") {
  SynthSpec spec;
  spec.shape = SynthShape::Plane;
  spec.density = 10000;
  spec.noise = 0.002;
  const Scene s = generate(spec);
  double mean_abs = 0.0;
  for (const auto& p : s.points) mean_abs += std::abs(p.position.z);
  mean_abs /= static_cast<double>(s.points.size());
  // E|N(0, s)| = s sqrt(2/pi); allow three standard errors.
  const double n = static_cast<double>(s.points.size());
  const double bound = spec.noise * std::sqrt(2.0 / kPi) + 3.0 * spec.noise / std::sqrt(n);
  CHECK(mean_abs <= bound);
  CHECK(mean_abs > 0.5 * spec.noise); // and the noise is actually there
}

TEST_CASE("generation is deterministic by seed") {
  SynthSpec spec;
  spec.shape = SynthShape::Room5Mat;
  spec.density = 100;
  spec.noise = 0.002;
  spec.seed = 42;
  const Scene a = generate(spec);
  const Scene b = generate(spec);
  REQUIRE(a.points.size() == b.points.size());
  for (std::size_t i = 0; i < a.points.size(); ++i)
    CHECK(a.points[i].position == b.points[i].position);

  spec.seed = 43;
  const Scene c = generate(spec);
  bool any_diff = false;
  for (std::size_t i = 0; i < a.points.size() && i < c.points.size(); ++i)
    any_diff |= !(a.points[i].position == c.points[i].position);
  CHECK(any_diff);
}

TEST_CASE("room5 assigns five materials and six receivers") {
  SynthSpec spec;
  spec.shape = SynthShape::Room5Mat;
  spec.density = 64;
  const Scene s = generate(spec);
  CHECK(s.materials.size() == 5);
  CHECK(s.receivers.size() == 6);
  std::set<std::uint32_t> used;
  for (const auto& p : s.points) used.insert(p.material_label);
  CHECK(used.size() == 5);
}

TEST_CASE("corner image-method enumeration: LOS + 2 single + 1 double bounce") {
  SynthSpec spec;
  spec.shape = SynthShape::Corner;
  const GroundTruth gt = ground_truth(spec);
  REQUIRE(gt.expected_paths.size() == 4);

  int by_depth[3] = {0, 0, 0};
  for (const auto& p : gt.expected_paths) by_depth[p.points.size()]++;
  CHECK(by_depth[0] == 1);
  CHECK(by_depth[1] == 2);
  CHECK(by_depth[2] == 1);

  for (const auto& p : gt.expected_paths) {
    if (p.points.size() == 1 && p.surface_labels[0] == 0) {
      CHECK(norm(p.points[0] - Vec3{1.0, 0, 0}) < 1e-12);
      CHECK(p.length == doctest::Approx(1.3416407865));
    }
    if (p.points.size() == 2) {
      CHECK(p.surface_labels == std::vector<std::uint32_t>{0, 1});
      CHECK(norm(p.points[0] - Vec3{0.6, 0, 0}) < 1e-12);
      CHECK(norm(p.points[1] - Vec3{0, 0, 0.4}) < 1e-12);
    }
  }
}

TEST_CASE("plane enumeration: LOS plus the mirror path at the origin") {
  SynthSpec spec;
  spec.shape = SynthShape::Plane;
  const GroundTruth gt = ground_truth(spec);
  REQUIRE(gt.expected_paths.size() == 2);
  for (const auto& p : gt.expected_paths) {
    if (p.points.empty()) {
      CHECK(p.length == doctest::Approx(2.0));
    } else {
      REQUIRE(p.points.size() == 1);
      CHECK(norm(p.points[0]) < 1e-12);
      CHECK(p.length == doctest::Approx(2.0 * std::sqrt(2.0)));
    }
  }
}

TEST_CASE("corridor preset is NLOS for both receivers") {
  SynthSpec spec;
  spec.shape = SynthShape::CorridorBox;
  const GroundTruth gt = ground_truth(spec);
  for (const auto& p : gt.expected_paths) CHECK(!p.points.empty());
}

TEST_CASE("segment_blocked respects end slack for points on faces") {
  SynthSpec spec;
  spec.shape = SynthShape::Plane;
  const GroundTruth gt = ground_truth(spec);
  // Through the plane: blocked. Ending on the plane: not blocked.
  CHECK(segment_blocked({0, 0, 1}, {0, 0, -1}, gt.faces));
  CHECK(!segment_blocked({0, 0, 1}, {0, 0, 0}, gt.faces));
  CHECK(!segment_blocked({-1, 0, 1}, {1, 0, 1}, gt.faces));
}
