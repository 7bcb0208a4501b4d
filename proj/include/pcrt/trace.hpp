// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "pcrt/isect.hpp"
#include "pcrt/threading.hpp"
#include "pcrt/vis.hpp"

namespace pcrt {

enum class InteractionKind : std::uint8_t { Specular = 0, Scatter = 1, Diffraction = 2 };

struct Interaction {
  InteractionKind kind = InteractionKind::Specular;
  Vec3 point;
  Vec3 normal;
  std::uint32_t surface_label = 0;
  std::uint32_t material_label = 0;
  VoxelCoord voxel;
  std::int32_t edge_index = -1; // diffraction only
};

/// TX -> interactions -> RX. A Scatter interaction is always last; a
/// Diffraction interaction is the only one on its path.
struct PropagationPath {
  int tx_index = 0;
  int rx_index = 0;
  std::vector<Interaction> interactions;
  bool refined = false;
  std::uint64_t trajectory_hash = 0; // set by dedup
  double length_m = 0.0;
};

struct TraceConfig {
  int max_depth = 5; // guardrail <= 8
  bool enable_scattering = true;
  bool enable_diffraction = false;
};

struct TraceResult {
  std::vector<PropagationPath> paths;        // specular candidates (coarse) + scatter paths
  std::vector<std::size_t> alive_per_depth;  // active rays at each depth (diagnostics)
};

/// Geometric length TX -> interactions -> RX.
double path_length(const Vec3& tx, const std::vector<Interaction>& interactions, const Vec3& rx);
double polyline_length(const std::vector<Vec3>& chain);

/// One zero-interaction path per receiver with an unobstructed segment.
std::vector<PropagationPath> trace_los(const Scene& scene, const AccelStructure& accel,
                                       const std::vector<DiscretizedPointSet>& dps_list,
                                       const IntersectionConfig& isect_config, int tx_index);

/// Launches one ray per DPS reception point and follows specular bounces up
/// to max_depth. At every hit it emits one coarse specular candidate per
/// visibility-matrix receiver, plus (when enabled) a Scatter path per
/// receiver whose final segment is actually unoccluded. The ray count never
/// grows: one active ray per launch per depth.
TraceResult trace_bounces(const Scene& scene, const std::vector<DiscretizedPointSet>& dps_list,
                          const AccelStructure& accel, const VisibilityMatrix& vis, int tx_index,
                          const TraceConfig& config, const IntersectionConfig& isect_config,
                          ThreadPool& pool);

/// One coarse candidate per (edge, RX) anchored at the edge midpoint;
/// TX/RX visibility is validated after refinement.
std::vector<PropagationPath> trace_diffraction(const Scene& scene, int tx_index,
                                               const TraceConfig& config);

} // namespace pcrt
