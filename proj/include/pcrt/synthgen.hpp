// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pcrt/scene.hpp"

namespace pcrt {

enum class SynthShape { Plane, Corner, CorridorBox, Room5Mat };

struct SynthSpec {
  SynthShape shape = SynthShape::Plane;
  double density = 6400.0; // points per m^2
  double noise = 0.0;      // Gaussian std along normals, meters
  std::uint64_t seed = 1;
};

/// Analytic rectangular face; the geometric ground truth behind the sampled
/// points.
struct RectFace {
  Vec3 origin;
  Vec3 u_dir, v_dir; // unit, orthogonal
  double u_len = 0.0, v_len = 0.0;
  Vec3 normal; // unit, u_dir x v_dir
  std::uint32_t surface_label = 0;
  std::uint32_t material_label = 0;

  Vec3 point_at(double u, double v) const { return origin + u * u_dir + v * v_dir; }
  bool contains(const Vec3& p, double margin = 1e-9) const {
    const Vec3 d = p - origin;
    const double u = dot(d, u_dir), v = dot(d, v_dir);
    return u >= -margin && u <= u_len + margin && v >= -margin && v <= v_len + margin;
  }
};

/// Image-method enumeration result for one TX/RX pair: the exact specular
/// trajectory (LOS = empty interaction list).
struct ExpectedPath {
  int tx_index = 0;
  int rx_index = 0;
  std::vector<Vec3> points;                 // interaction points
  std::vector<std::uint32_t> surface_labels; // per interaction
  double length = 0.0;
};

struct GroundTruth {
  std::vector<RectFace> faces;
  std::vector<ExpectedPath> expected_paths; // specular paths up to enumeration_depth
  int enumeration_depth = 2;
};

/// Samples the spec's analytic surfaces on a jittered grid with exact
/// analytic normals; deterministic by seed.
Scene generate(const SynthSpec& spec);

/// Analytic faces plus the image-method path enumeration (LOS, 1- and
/// 2-bounce) for the shape's preset antennas, with occlusion checks.
/// Independent of the tracing pipeline; used as a test oracle.
GroundTruth ground_truth(const SynthSpec& spec);

void save_ground_truth(const GroundTruth& gt, const std::string& path);

/// True iff the open segment a-b is blocked by any face (intersections within
/// end_slack of either endpoint are ignored, so points lying on faces work).
bool segment_blocked(const Vec3& a, const Vec3& b, const std::vector<RectFace>& faces,
                     double end_slack = 1e-6);

SynthShape parse_shape(const std::string& name);

} // namespace pcrt
