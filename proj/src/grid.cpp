// SPDX-License-Identifier: Apache-2.0
#include "pcrt/grid.hpp"

#include <algorithm>
#include <map>
#include <stdexcept>

namespace pcrt {

VoxelCoord voxel_of(const Vec3& position, double voxel_size) {
  return {static_cast<std::int64_t>(std::floor(position.x / voxel_size)),
          static_cast<std::int64_t>(std::floor(position.y / voxel_size)),
          static_cast<std::int64_t>(std::floor(position.z / voxel_size))};
}

std::vector<DiscretizedPointSet> build_grid(const Scene& scene, const VoxelGridConfig& config,
                                            double point_radius) {
  if (config.voxel_size <= 0.0) throw std::invalid_argument("voxel_size must be positive");
  if (scene.points.empty()) throw std::invalid_argument("scene has no points");

  // std::map keeps voxels in lexicographic order, which fixes the DPS order.
  std::map<VoxelCoord, std::vector<std::uint32_t>> bins;
  for (std::uint32_t i = 0; i < scene.points.size(); ++i)
    bins[voxel_of(scene.points[i].position, config.voxel_size)].push_back(i);

  std::vector<DiscretizedPointSet> out;
  out.reserve(bins.size());
  for (auto& [voxel, indices] : bins) {
    DiscretizedPointSet dps;
    dps.voxel = voxel;
    dps.point_indices = std::move(indices);
    dps.positions.reserve(dps.point_indices.size());
    dps.normals.reserve(dps.point_indices.size());

    Vec3 sum{};
    std::map<std::uint32_t, std::uint32_t> label_counts;
    for (const std::uint32_t idx : dps.point_indices) {
      const auto& p = scene.points[idx];
      dps.positions.push_back(p.position);
      dps.normals.push_back(p.normal);
      dps.aabb.expand(p.position);
      sum += p.position;
      ++label_counts[p.surface_label];
    }
    dps.aabb.inflate(point_radius);
    dps.reception_point = sum / static_cast<double>(dps.point_indices.size());

    std::uint32_t best_label = 0, best_count = 0;
    for (const auto& [label, count] : label_counts) {
      if (count > best_count) { // ties resolve to the smallest label via map order
        best_label = label;
        best_count = count;
      }
    }
    dps.dominant_surface_label = best_label;
    out.push_back(std::move(dps));
  }
  return out;
}

std::vector<std::uint32_t> AccelStructure::candidates(const Ray& ray, double t_max) const {
  std::vector<std::uint32_t> out;
  traverse(ray, t_max, [&](std::uint32_t index, double) {
    out.push_back(index);
    return t_max;
  });
  return out;
}

std::optional<std::uint32_t> AccelStructure::dps_of_voxel(const VoxelCoord& voxel) const {
  const auto it = voxel_map_.find(voxel);
  if (it == voxel_map_.end()) return std::nullopt;
  return it->second;
}

namespace {
constexpr std::size_t kLeafSize = 4;
}

std::uint32_t AccelStructure::build_node(std::vector<std::uint32_t>& prims, std::size_t begin,
                                         std::size_t end,
                                         const std::vector<DiscretizedPointSet>& dps_list) {
  const std::uint32_t index = static_cast<std::uint32_t>(nodes_.size());
  nodes_.emplace_back();

  Aabb box;
  for (std::size_t i = begin; i < end; ++i) box.expand(dps_list[prims[i]].aabb);
  nodes_[index].box = box;

  if (end - begin <= kLeafSize) {
    nodes_[index].first = static_cast<std::uint32_t>(begin);
    nodes_[index].count = static_cast<std::uint32_t>(end - begin);
    return index;
  }

  const Vec3 extent = box.max - box.min;
  const int axis = extent.x >= extent.y && extent.x >= extent.z ? 0 : (extent.y >= extent.z ? 1 : 2);
  const std::size_t mid = begin + (end - begin) / 2;
  std::nth_element(prims.begin() + static_cast<std::ptrdiff_t>(begin),
                   prims.begin() + static_cast<std::ptrdiff_t>(mid),
                   prims.begin() + static_cast<std::ptrdiff_t>(end),
                   [&](std::uint32_t a, std::uint32_t b) {
                     const double ca = dps_list[a].aabb.center()[axis];
                     const double cb = dps_list[b].aabb.center()[axis];
                     if (ca != cb) return ca < cb;
                     return a < b; // total order keeps the build deterministic
                   });

  const std::uint32_t l = build_node(prims, begin, mid, dps_list);
  const std::uint32_t r = build_node(prims, mid, end, dps_list);
  nodes_[index].first = l;
  nodes_[index].second = r;
  nodes_[index].count = 0;
  return index;
}

AccelStructure AccelStructure::build(const std::vector<DiscretizedPointSet>& dps_list) {
  if (dps_list.empty()) throw std::invalid_argument("cannot build accel over empty DPS list");
  AccelStructure accel;
  accel.prim_order_.resize(dps_list.size());
  for (std::uint32_t i = 0; i < dps_list.size(); ++i) accel.prim_order_[i] = i;
  accel.nodes_.reserve(dps_list.size() * 2);
  accel.build_node(accel.prim_order_, 0, dps_list.size(), dps_list);
  accel.voxel_map_.reserve(dps_list.size());
  for (std::uint32_t i = 0; i < dps_list.size(); ++i) accel.voxel_map_.emplace(dps_list[i].voxel, i);
  return accel;
}

} // namespace pcrt
