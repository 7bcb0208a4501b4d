// SPDX-License-Identifier: Apache-2.0
#include "pcrt/isect.hpp"

#include <algorithm>
#include <cmath>

namespace pcrt {

namespace {

struct DiskHit {
  double t;
  double radial_sq;
  std::uint32_t member; // index into the DPS member arrays
};

thread_local std::vector<DiskHit> g_disk_hits;

} // namespace

std::optional<SurfaceHit> intersect_dps(const Ray& ray, const DiscretizedPointSet& dps,
                                        const Scene& scene, const IntersectionConfig& config,
                                        double t_min) {
  const double radius_sq = config.point_radius * config.point_radius;
  auto& hits = g_disk_hits;
  hits.clear();

  double t_nearest = std::numeric_limits<double>::infinity();
  const std::size_t count = dps.positions.size();
  for (std::size_t i = 0; i < count; ++i) {
    const Vec3& p = dps.positions[i];
    const Vec3& n = dps.normals[i];
    const double denom = dot(ray.dir, n);
    if (std::abs(denom) < 1e-12) continue; // ray parallel to the disk plane
    const double t = dot(p - ray.origin, n) / denom;
    if (t <= t_min || t <= 0.0) continue;
    const Vec3 q = ray.origin + t * ray.dir;
    const double radial_sq = norm_sq(q - p);
    if (radial_sq > radius_sq) continue;
    hits.push_back({t, radial_sq, static_cast<std::uint32_t>(i)});
    t_nearest = std::min(t_nearest, t);
  }
  if (hits.empty()) return std::nullopt;

  // Weights relative to the hit closest to the origin.
  double max_weight = 0.0;
  thread_local std::vector<double> weights;
  weights.clear();
  for (const DiskHit& h : hits) {
    const double w = std::exp(-h.radial_sq / (2.0 * radius_sq)) *
                     std::exp(-config.depth_attenuation * (h.t - t_nearest));
    weights.push_back(w);
    max_weight = std::max(max_weight, w);
  }

  const double cutoff = config.min_weight_cutoff * max_weight;
  double weight_sum = 0.0;
  double t_acc = 0.0;
  Vec3 normal_acc{};
  double best_weight = -1.0;
  std::uint32_t best_member = 0;
  for (std::size_t i = 0; i < hits.size(); ++i) {
    const double w = weights[i];
    if (w < cutoff) continue;
    weight_sum += w;
    t_acc += w * hits[i].t;
    normal_acc += w * dps.normals[hits[i].member];
    if (w > best_weight) {
      best_weight = w;
      best_member = hits[i].member;
    }
  }

  SurfaceHit hit;
  hit.distance = t_acc / weight_sum;
  hit.position = ray.origin + hit.distance * ray.dir;
  Vec3 n = normal_acc;
  if (norm_sq(n) < 1e-24) n = dps.normals[best_member]; // opposing members cancelled out
  n = normalized(n);
  if (dot(n, ray.dir) > 0.0) n = -n;
  hit.normal = n;
  hit.nearest_point_index = dps.point_indices[best_member];
  hit.surface_label = scene.points[hit.nearest_point_index].surface_label;
  hit.material_label = scene.points[hit.nearest_point_index].material_label;
  hit.voxel = dps.voxel;
  return hit;
}

std::optional<SurfaceHit> cast_ray(const Ray& ray, const AccelStructure& accel,
                                   const std::vector<DiscretizedPointSet>& dps_list,
                                   const Scene& scene, const IntersectionConfig& config,
                                   double t_min, double t_max) {
  std::optional<SurfaceHit> best;
  double bound = t_max;
  accel.traverse(ray, t_max, [&](std::uint32_t index, double entry) {
    if (best && entry > best->distance) return bound;
    auto hit = intersect_dps(ray, dps_list[index], scene, config, t_min);
    if (hit && hit->distance <= bound && (!best || hit->distance < best->distance)) {
      hit->dps_index = index;
      best = *hit;
      // Any disk hit inside a box lies beyond its entry, so the hit distance
      // is a valid subtree pruning bound.
      bound = best->distance;
    }
    return bound;
  });
  return best;
}

bool test_visibility(const Vec3& a, const Vec3& b, const AccelStructure& accel,
                     const std::vector<DiscretizedPointSet>& dps_list, const Scene& scene,
                     const IntersectionConfig& config) {
  const double length = distance(a, b);
  if (length <= 0.0) return true;
  const double slack = config.visibility_slack();
  if (length <= 2.0 * slack) return true;
  const Ray ray{a, (b - a) / length};
  const auto hit = cast_ray(ray, accel, dps_list, scene, config, slack, length);
  return !(hit && hit->distance < length - slack);
}

} // namespace pcrt
