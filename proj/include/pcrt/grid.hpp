// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <unordered_map>
#include <vector>

#include "pcrt/geometry.hpp"
#include "pcrt/scene.hpp"

namespace pcrt {

struct VoxelGridConfig {
  double voxel_size = 0.0625; // meters
};

struct VoxelCoord {
  std::int64_t x = 0, y = 0, z = 0;
  bool operator==(const VoxelCoord&) const = default;
  bool operator<(const VoxelCoord& o) const {
    if (x != o.x) return x < o.x;
    if (y != o.y) return y < o.y;
    return z < o.z;
  }
};

struct VoxelCoordHash {
  std::size_t operator()(const VoxelCoord& v) const {
    // splitmix64 fold over the three coordinates
    auto mix = [](std::uint64_t h) {
      h += 0x9e3779b97f4a7c15ull;
      h = (h ^ (h >> 30)) * 0xbf58476d1ce4e5b9ull;
      h = (h ^ (h >> 27)) * 0x94d049bb133111ebull;
      return h ^ (h >> 31);
    };
    std::uint64_t h = mix(static_cast<std::uint64_t>(v.x));
    h = mix(h ^ static_cast<std::uint64_t>(v.y));
    h = mix(h ^ static_cast<std::uint64_t>(v.z));
    return static_cast<std::size_t>(h);
  }
};

/// One voxel's worth of points: the unit of ray launching and visibility.
/// positions/normals are copies of the member points in point_indices order,
/// kept contiguous for the intersection inner loop.
struct DiscretizedPointSet {
  VoxelCoord voxel;
  std::vector<std::uint32_t> point_indices;
  std::vector<Vec3> positions;
  std::vector<Vec3> normals;
  Aabb aabb;            // member positions inflated by the disk radius
  Vec3 reception_point; // mean of member positions
  std::uint32_t dominant_surface_label = 0;
};

VoxelCoord voxel_of(const Vec3& position, double voxel_size);

/// Bins every scene point into exactly one DPS (floor(position / voxel_size)).
/// Output is sorted by voxel coordinate, so identical input gives identical
/// order. point_radius inflates each AABB so boundary disks stay traversable.
std::vector<DiscretizedPointSet> build_grid(const Scene& scene, const VoxelGridConfig& config,
                                            double point_radius);

/// BVH over DPS AABBs. Queries return a superset of the DPSs whose boxes the
/// ray geometrically intersects (no false negatives).
class AccelStructure {
public:
  static AccelStructure build(const std::vector<DiscretizedPointSet>& dps_list);

  /// Visits candidate DPS indices roughly near-to-far. The visitor receives
  /// (dps_index, box_entry_t) and returns the new pruning bound: subtree boxes
  /// entering beyond the bound are skipped. Return t_max unchanged to keep
  /// traversing.
  template <typename Visitor>
  void traverse(const Ray& ray, double t_max, Visitor&& visit) const {
    if (nodes_.empty()) return;
    std::uint32_t stack[64];
    double entry_stack[64];
    int top = 0;
    double entry0 = nodes_[0].box.ray_entry(ray, t_max);
    if (entry0 < 0.0) return;
    stack[top] = 0;
    entry_stack[top++] = entry0;
    while (top > 0) {
      --top;
      if (entry_stack[top] > t_max) continue;
      const Node& node = nodes_[stack[top]];
      if (node.count > 0) {
        for (std::uint32_t i = 0; i < node.count; ++i)
          t_max = visit(prim_order_[node.first + i], entry_stack[top]);
        continue;
      }
      const double tl = nodes_[node.first].box.ray_entry(ray, t_max);
      const double tr = nodes_[node.second].box.ray_entry(ray, t_max);
      // Push the farther child first so the nearer one pops next.
      if (tl >= 0.0 && tr >= 0.0) {
        const bool left_near = tl <= tr;
        stack[top] = left_near ? node.second : node.first;
        entry_stack[top++] = left_near ? tr : tl;
        stack[top] = left_near ? node.first : node.second;
        entry_stack[top++] = left_near ? tl : tr;
      } else if (tl >= 0.0) {
        stack[top] = node.first;
        entry_stack[top++] = tl;
      } else if (tr >= 0.0) {
        stack[top] = node.second;
        entry_stack[top++] = tr;
      }
    }
  }

  /// All DPS indices whose AABB the ray hits within t_max (unordered).
  std::vector<std::uint32_t> candidates(const Ray& ray, double t_max) const;

  std::optional<std::uint32_t> dps_of_voxel(const VoxelCoord& voxel) const;

  std::size_t node_count() const { return nodes_.size(); }

private:
  struct Node {
    Aabb box;
    std::uint32_t first = 0;  // left child (inner) or first primitive (leaf)
    std::uint32_t second = 0; // right child (inner only)
    std::uint32_t count = 0;  // 0 for inner nodes
  };

  std::uint32_t build_node(std::vector<std::uint32_t>& prims, std::size_t begin, std::size_t end,
                           const std::vector<DiscretizedPointSet>& dps_list);

  std::vector<Node> nodes_;
  std::vector<std::uint32_t> prim_order_;
  std::unordered_map<VoxelCoord, std::uint32_t, VoxelCoordHash> voxel_map_;
};

} // namespace pcrt
