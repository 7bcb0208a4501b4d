// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>

#include "pcrt/trace.hpp"

namespace pcrt {

struct RefinementConfig {
  int max_iterations = 50;             // xi
  int retry_count = 10;                // kappa
  double convergence_threshold = 1e-4; // t_c, on squared gradient norm
  double angle_threshold_deg = 1.0;    // t_a
  double distance_threshold = 0.01;    // t_d, meters
  double step_size = 0.05;             // initial gradient step, meters
};

struct RefineStats {
  int attempts = 0;          // optimization passes (1 + retries used)
  int stage1_iterations = 0; // iterations of the final pass
  bool converged = false;    // final pass ended on the gradient test
};

/// Gradient of the path length w.r.t. the 2N tangent-plane coordinates of the
/// interaction points. Exposed for the finite-difference checks.
/// frames[k] = (point, normal); the returned vector is [du_1, dv_1, ...].
std::vector<double> path_length_gradient(const Vec3& tx, const std::vector<Vec3>& points,
                                         const std::vector<std::pair<Vec3, Vec3>>& tangents,
                                         const Vec3& rx);

/// Two-stage refinement of an all-specular coarse candidate: joint gradient
/// descent of the path length over per-interaction tangent planes, then
/// ray-cast validation of every interaction against the angle/distance
/// thresholds, re-anchoring and retrying up to retry_count times.
/// Returns the refined path or nothing when no attempt validates.
std::optional<PropagationPath> refine_specular(const PropagationPath& coarse, const Scene& scene,
                                               const std::vector<DiscretizedPointSet>& dps_list,
                                               const AccelStructure& accel,
                                               const IntersectionConfig& isect_config,
                                               const RefinementConfig& config,
                                               RefineStats* stats = nullptr);

/// Path-length minimization over the edge parameter (clamped to the segment)
/// followed by TX- and RX-side visibility validation.
std::optional<PropagationPath> refine_diffraction(const PropagationPath& coarse,
                                                  const Scene& scene,
                                                  const std::vector<DiscretizedPointSet>& dps_list,
                                                  const AccelStructure& accel,
                                                  const IntersectionConfig& isect_config,
                                                  const RefinementConfig& config,
                                                  RefineStats* stats = nullptr);

} // namespace pcrt
