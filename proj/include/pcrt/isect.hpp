// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <limits>
#include <optional>

#include "pcrt/grid.hpp"
#include "pcrt/scene.hpp"

namespace pcrt {

struct IntersectionConfig {
  double point_radius = 0.015;      // disk radius r_p, meters
  double depth_attenuation = 100.0; // lambda_d, 1/m
  double min_weight_cutoff = 1e-4;  // disks below cutoff * max weight are dropped
  double self_intersection_bias = 1e-4; // secondary-ray origin offset along the hit normal, m

  /// Slack applied at both ends of a visibility segment; keeps a surface from
  /// occluding a point that lies on it.
  double visibility_slack() const { return 2.0 * point_radius; }
};

struct SurfaceHit {
  Vec3 position;   // weighted-average intersection point q (lies on the ray)
  Vec3 normal;     // weighted-average disk normal, unit, facing the incoming ray
  double distance = 0.0; // ray parameter of q
  std::uint32_t dps_index = 0;
  std::uint32_t nearest_point_index = 0; // scene index of the largest-weight disk
  std::uint32_t surface_label = 0;       // labels of that point
  std::uint32_t material_label = 0;
  VoxelCoord voxel;
};

/// Ray vs one DPS: explicit ray-disk intersections blended by
/// exp(-|q_i-p_i|^2 / 2 r_p^2) * exp(-lambda_d |q_i - q_min|). Disk hits at
/// parameter t <= t_min are ignored. Returns nothing when no disk is hit.
std::optional<SurfaceHit> intersect_dps(const Ray& ray, const DiscretizedPointSet& dps,
                                        const Scene& scene, const IntersectionConfig& config,
                                        double t_min = 0.0);

/// Nearest surface hit over the whole scene, near-to-far traversal with early
/// exit. Hits outside (t_min, t_max) are discarded.
std::optional<SurfaceHit> cast_ray(const Ray& ray, const AccelStructure& accel,
                                   const std::vector<DiscretizedPointSet>& dps_list,
                                   const Scene& scene, const IntersectionConfig& config,
                                   double t_min = 0.0,
                                   double t_max = std::numeric_limits<double>::infinity());

/// True iff the open segment between a and b (shrunk by visibility_slack at
/// both ends) is unoccluded.
bool test_visibility(const Vec3& a, const Vec3& b, const AccelStructure& accel,
                     const std::vector<DiscretizedPointSet>& dps_list, const Scene& scene,
                     const IntersectionConfig& config);

} // namespace pcrt
