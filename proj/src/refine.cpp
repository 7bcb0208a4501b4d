// SPDX-License-Identifier: Apache-2.0
#include "pcrt/refine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace pcrt {

namespace {

constexpr double kDegenerateSegment = 1e-9;
constexpr double kMinLineSearchStep = 1e-12;
constexpr double kReanchorFixpoint = 1e-7;
// An anchor counts as consistent with the surface when the validating hit
// lands this close to its plane; otherwise the plane came from a patch away
// from the converged point and gets one more polishing round. Tight enough
// that duplicates of one trajectory collapse onto the same surface point.
constexpr double kFreshAnchorPlane = 1e-4;

struct PlaneAnchor {
  Vec3 point;  // point on the plane (latest surface hit)
  Vec3 normal; // unit
  Vec3 u, v;   // tangent basis
  std::uint32_t surface_label = 0;
  std::uint32_t material_label = 0;
  VoxelCoord voxel;
};

struct Objective {
  bool degenerate = false;
  double value = 0.0;
};

Objective eval_length(const Vec3& tx, const std::vector<Vec3>& points, const Vec3& rx) {
  Objective obj;
  Vec3 prev = tx;
  for (const Vec3& p : points) {
    const double seg = distance(prev, p);
    if (seg < kDegenerateSegment) {
      obj.degenerate = true;
      return obj;
    }
    obj.value += seg;
    prev = p;
  }
  const double seg = distance(prev, rx);
  if (seg < kDegenerateSegment) {
    obj.degenerate = true;
    return obj;
  }
  obj.value += seg;
  return obj;
}

Vec3 point_of(const PlaneAnchor& a, double u, double v) {
  return a.point + u * a.u + v * a.v;
}

enum class Stage1Exit { Converged, IterationCap, Degenerate, Stuck };

struct Stage1Result {
  Stage1Exit exit = Stage1Exit::Degenerate;
  int iterations = 0;
  double length = 0.0;
};

/// Joint gradient descent over all tangent-plane coordinates with a
/// backtracking line search (trial step doubles after an accepted move,
/// halves until descent within a move).
Stage1Result minimize_on_planes(const Vec3& tx, const Vec3& rx,
                                const std::vector<PlaneAnchor>& anchors,
                                std::vector<double>& coords, const RefinementConfig& config) {
  const std::size_t n = anchors.size();
  std::vector<Vec3> points(n), trial_points(n);
  std::vector<std::pair<Vec3, Vec3>> tangents(n);
  std::vector<double> grad(2 * n), trial(2 * n);
  for (std::size_t k = 0; k < n; ++k) tangents[k] = {anchors[k].u, anchors[k].v};

  auto materialize = [&](const std::vector<double>& c, std::vector<Vec3>& out) {
    for (std::size_t k = 0; k < n; ++k) out[k] = point_of(anchors[k], c[2 * k], c[2 * k + 1]);
  };

  Stage1Result result;
  materialize(coords, points);
  Objective current = eval_length(tx, points, rx);
  if (current.degenerate) return result;

  // A descending run contracts the gradient geometrically; a candidate whose
  // squared gradient fails to halve over this window is wandering (typically
  // toward a degenerate merge of interaction points) and cannot meet the
  // convergence test, so it is cut off early.
  constexpr int kStallWindow = 8;
  double grad_history[kStallWindow];

  double step = config.step_size;
  for (int iter = 0; iter < config.max_iterations; ++iter) {
    result.iterations = iter + 1;
    grad = path_length_gradient(tx, points, tangents, rx);
    double grad_sq = 0.0;
    for (const double g : grad) grad_sq += g * g;
    if (grad_sq < config.convergence_threshold) {
      result.exit = Stage1Exit::Converged;
      result.iterations = iter; // converged before using this iteration's step
      result.length = current.value;
      return result;
    }
    if (iter >= 2 * kStallWindow && grad_sq > 0.5 * grad_history[iter % kStallWindow]) {
      result.exit = Stage1Exit::Stuck;
      result.length = current.value;
      return result;
    }
    grad_history[iter % kStallWindow] = grad_sq;

    // Line search along -grad: halve until the move descends, expand by
    // doubling while that improves, then one parabolic interpolation inside
    // the bracket. Near-exact steps keep the iterate close to the optimum by
    // the time the gradient test fires.
    auto probe = [&](double s) -> Objective {
      for (std::size_t i = 0; i < 2 * n; ++i) trial[i] = coords[i] - s * grad[i];
      materialize(trial, trial_points);
      return eval_length(tx, trial_points, rx);
    };

    double mid = step;
    Objective mid_obj;
    bool moved = false;
    while (mid >= kMinLineSearchStep) {
      mid_obj = probe(mid);
      if (mid_obj.degenerate) {
        result.exit = Stage1Exit::Degenerate;
        return result;
      }
      if (mid_obj.value < current.value) {
        moved = true;
        break;
      }
      mid *= 0.5;
    }
    if (moved) {
      double lo = 0.0, yl = current.value;
      double hi = -1.0, yh = 0.0;
      const double cap = 1e3 * config.step_size;
      for (double s = mid * 2.0; s <= cap; s *= 2.0) {
        const Objective wide = probe(s);
        if (wide.degenerate) break;
        if (wide.value < mid_obj.value) {
          lo = mid;
          yl = mid_obj.value;
          mid = s;
          mid_obj = wide;
        } else {
          hi = s;
          yh = wide.value;
          break;
        }
      }
      if (hi > 0.0) {
        const double d1 = mid - lo, d2 = mid - hi;
        const double num = d1 * d1 * (mid_obj.value - yh) - d2 * d2 * (mid_obj.value - yl);
        const double den = d1 * (mid_obj.value - yh) - d2 * (mid_obj.value - yl);
        if (std::abs(den) > 1e-300) {
          const double vertex = mid - 0.5 * num / den;
          if (vertex > lo && vertex < hi && vertex >= kMinLineSearchStep) {
            const Objective refined = probe(vertex);
            if (!refined.degenerate && refined.value < mid_obj.value) {
              mid = vertex;
              mid_obj = refined;
            }
          }
        }
      }
      for (std::size_t i = 0; i < 2 * n; ++i) coords[i] -= mid * grad[i];
      materialize(coords, points);
      current = mid_obj;
      step = mid;
    }
    if (!moved) {
      // No descent direction at line-search resolution: numerically at the
      // minimum. Re-check the gradient test instead of looping.
      result.exit = grad_sq < config.convergence_threshold ? Stage1Exit::Converged
                                                           : Stage1Exit::Stuck;
      result.length = current.value;
      return result;
    }
  }
  result.exit = Stage1Exit::IterationCap;
  result.length = current.value;
  return result;
}

PlaneAnchor anchor_from(const Vec3& point, const Vec3& normal) {
  PlaneAnchor a;
  a.point = point;
  a.normal = normal;
  const auto [u, v] = orthonormal_basis(normal);
  a.u = u;
  a.v = v;
  return a;
}

} // namespace

std::vector<double> path_length_gradient(const Vec3& tx, const std::vector<Vec3>& points,
                                         const std::vector<std::pair<Vec3, Vec3>>& tangents,
                                         const Vec3& rx) {
  const std::size_t n = points.size();
  std::vector<double> grad(2 * n, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    const Vec3& prev = k == 0 ? tx : points[k - 1];
    const Vec3& next = k + 1 == n ? rx : points[k + 1];
    // d f / d I_k = unit(I_k - prev) + unit(I_k - next), projected on the plane
    const Vec3 g = normalized(points[k] - prev) + normalized(points[k] - next);
    grad[2 * k] = dot(g, tangents[k].first);
    grad[2 * k + 1] = dot(g, tangents[k].second);
  }
  return grad;
}

std::optional<PropagationPath> refine_specular(const PropagationPath& coarse, const Scene& scene,
                                               const std::vector<DiscretizedPointSet>& dps_list,
                                               const AccelStructure& accel,
                                               const IntersectionConfig& isect_config,
                                               const RefinementConfig& config,
                                               RefineStats* stats) {
  const std::size_t n = coarse.interactions.size();
  if (n == 0) return std::nullopt;
  for (const Interaction& it : coarse.interactions)
    if (it.kind != InteractionKind::Specular) return std::nullopt;

  const Vec3 tx = scene.transmitters.at(static_cast<std::size_t>(coarse.tx_index));
  const Vec3 rx = scene.receivers.at(static_cast<std::size_t>(coarse.rx_index));
  const double cos_angle_threshold = std::cos(config.angle_threshold_deg * kPi / 180.0);

  std::vector<PlaneAnchor> anchors(n);
  for (std::size_t k = 0; k < n; ++k) {
    anchors[k] = anchor_from(coarse.interactions[k].point, coarse.interactions[k].normal);
    anchors[k].surface_label = coarse.interactions[k].surface_label;
    anchors[k].material_label = coarse.interactions[k].material_label;
    anchors[k].voxel = coarse.interactions[k].voxel;
  }

  RefineStats local;
  RefineStats& st = stats ? *stats : local;
  st = {};

  std::vector<double> coords(2 * n, 0.0);
  std::vector<Vec3> points(n);
  std::vector<SurfaceHit> validated(n);

  for (int attempt = 0; attempt <= config.retry_count; ++attempt) {
    st.attempts = attempt + 1;
    std::fill(coords.begin(), coords.end(), 0.0);
    const Stage1Result s1 = minimize_on_planes(tx, rx, anchors, coords, config);
    st.stage1_iterations = s1.iterations;
    st.converged = s1.exit == Stage1Exit::Converged;
    if (s1.exit == Stage1Exit::Degenerate) return std::nullopt;
    if (s1.exit != Stage1Exit::Converged) return std::nullopt;

    for (std::size_t k = 0; k < n; ++k)
      points[k] = point_of(anchors[k], coords[2 * k], coords[2 * k + 1]);

    // The receiver-side leg has no validating cast of its own; checking it
    // first skips the per-interaction casts for blocked receivers.
    const Vec3 from = points[n - 1] + isect_config.self_intersection_bias * anchors[n - 1].normal;
    if (!test_visibility(from, rx, accel, dps_list, scene, isect_config)) return std::nullopt;

    // Stage 2: re-cast every leg and require the surface to agree with the
    // plane the optimizer used. Hits far beyond the target cannot validate
    // (nor re-anchor usefully), so the casts are bounded.
    bool all_valid = true;
    bool all_fresh = true;
    std::vector<std::size_t> failing;
    for (std::size_t k = 0; k < n; ++k) {
      Vec3 origin = k == 0 ? tx : points[k - 1];
      if (k > 0) origin += isect_config.self_intersection_bias * anchors[k - 1].normal;
      const Vec3 to_target = points[k] - origin;
      const double dist = norm(to_target);
      if (dist < kDegenerateSegment) return std::nullopt;
      const Ray ray{origin, to_target / dist};
      const double reach = dist + std::max(10.0 * config.distance_threshold, 0.1);
      const auto hit = cast_ray(ray, accel, dps_list, scene, isect_config, 0.0, reach);
      if (!hit) return std::nullopt; // nothing to re-anchor to
      const bool angle_ok = dot(hit->normal, anchors[k].normal) > cos_angle_threshold;
      const double plane_dist = std::abs(dot(anchors[k].normal, hit->position - anchors[k].point));
      const bool dist_ok = plane_dist < config.distance_threshold;
      validated[k] = *hit;
      all_fresh &= plane_dist < kFreshAnchorPlane;
      if (!angle_ok || !dist_ok) {
        all_valid = false;
        failing.push_back(k);
      }
    }

    // A valid path whose anchors came from patches away from the converged
    // points gets re-anchored there and polished, so the final geometry sits
    // on the surface at the reflection points themselves. Accept once the
    // anchors are self-consistent (or the retry budget runs out).
    if (all_valid && (all_fresh || attempt == config.retry_count)) {
      PropagationPath refined = coarse;
      for (std::size_t k = 0; k < n; ++k) {
        Interaction& it = refined.interactions[k];
        it.point = points[k];
        it.normal = validated[k].normal;
        it.surface_label = validated[k].surface_label;
        it.material_label = validated[k].material_label;
        it.voxel = validated[k].voxel;
      }
      refined.refined = true;
      refined.length_m = path_length(tx, refined.interactions, rx);
      return refined;
    }

    // Re-anchor to the surfaces actually hit: the failing interactions after
    // an invalid pass, every interaction on a polishing pass.
    if (all_valid) {
      failing.resize(n);
      for (std::size_t k = 0; k < n; ++k) failing[k] = k;
    }
    double moved = 0.0;
    for (const std::size_t k : failing) {
      moved = std::max(moved, distance(anchors[k].point, validated[k].position));
      moved = std::max(moved, norm(anchors[k].normal - validated[k].normal));
      PlaneAnchor fresh = anchor_from(validated[k].position, validated[k].normal);
      fresh.surface_label = validated[k].surface_label;
      fresh.material_label = validated[k].material_label;
      fresh.voxel = validated[k].voxel;
      anchors[k] = fresh;
    }
    if (!all_valid && moved < kReanchorFixpoint)
      return std::nullopt; // retrying cannot change the outcome
  }
  return std::nullopt;
}

std::optional<PropagationPath> refine_diffraction(const PropagationPath& coarse,
                                                  const Scene& scene,
                                                  const std::vector<DiscretizedPointSet>& dps_list,
                                                  const AccelStructure& accel,
                                                  const IntersectionConfig& isect_config,
                                                  const RefinementConfig& config,
                                                  RefineStats* stats) {
  if (coarse.interactions.size() != 1 ||
      coarse.interactions[0].kind != InteractionKind::Diffraction ||
      coarse.interactions[0].edge_index < 0)
    return std::nullopt;

  const EdgeSegment& edge = scene.edges.at(static_cast<std::size_t>(coarse.interactions[0].edge_index));
  const Vec3 tx = scene.transmitters.at(static_cast<std::size_t>(coarse.tx_index));
  const Vec3 rx = scene.receivers.at(static_cast<std::size_t>(coarse.rx_index));

  const double edge_len = distance(edge.start, edge.end);
  const Vec3 edge_dir = (edge.end - edge.start) / edge_len;

  RefineStats local;
  RefineStats& st = stats ? *stats : local;
  st = {.attempts = 1, .stage1_iterations = 0, .converged = false};

  // Arc-length parameter along the edge, clamped to [0, edge_len].
  double s = std::clamp(dot(coarse.interactions[0].point - edge.start, edge_dir), 0.0, edge_len);
  auto point_at = [&](double u) { return edge.start + u * edge_dir; };
  auto length_at = [&](double u) {
    const Vec3 p = point_at(u);
    return distance(tx, p) + distance(p, rx);
  };
  auto gradient_at = [&](double u) {
    const Vec3 p = point_at(u);
    const double d_tx = distance(tx, p), d_rx = distance(p, rx);
    if (d_tx < kDegenerateSegment || d_rx < kDegenerateSegment)
      return std::numeric_limits<double>::quiet_NaN();
    return dot(edge_dir, (p - tx) / d_tx + (p - rx) / d_rx);
  };

  double current = length_at(s);
  double step = config.step_size;
  for (int iter = 0; iter < config.max_iterations; ++iter) {
    st.stage1_iterations = iter + 1;
    const double g = gradient_at(s);
    if (std::isnan(g)) return std::nullopt;
    // Projected gradient: zero when pushing against a clamped endpoint.
    const double pg = (s <= 0.0 && g > 0.0) || (s >= edge_len && g < 0.0) ? 0.0 : g;
    if (pg * pg < config.convergence_threshold) {
      st.converged = true;
      st.stage1_iterations = iter;
      break;
    }
    auto probe = [&](double w) { return std::clamp(s - w * pg, 0.0, edge_len); };
    double mid = step;
    double mid_value = 0.0;
    bool moved = false;
    while (mid >= kMinLineSearchStep) {
      mid_value = length_at(probe(mid));
      if (mid_value < current) {
        moved = true;
        break;
      }
      mid *= 0.5;
    }
    if (!moved) {
      st.converged = true; // pinned by the clamp or at the minimum
      break;
    }
    double lo = 0.0, yl = current, hi = -1.0, yh = 0.0;
    for (double w = mid * 2.0; w <= 1e3 * config.step_size; w *= 2.0) {
      const double value = length_at(probe(w));
      if (value < mid_value) {
        lo = mid;
        yl = mid_value;
        mid = w;
        mid_value = value;
      } else {
        hi = w;
        yh = value;
        break;
      }
    }
    if (hi > 0.0) {
      const double d1 = mid - lo, d2 = mid - hi;
      const double num = d1 * d1 * (mid_value - yh) - d2 * d2 * (mid_value - yl);
      const double den = d1 * (mid_value - yh) - d2 * (mid_value - yl);
      if (std::abs(den) > 1e-300) {
        const double vertex = mid - 0.5 * num / den;
        if (vertex > lo && vertex < hi && vertex >= kMinLineSearchStep) {
          const double value = length_at(probe(vertex));
          if (value < mid_value) {
            mid = vertex;
            mid_value = value;
          }
        }
      }
    }
    s = probe(mid);
    current = mid_value;
    step = mid;
  }
  if (!st.converged) return std::nullopt;

  const Vec3 apex = point_at(s);
  if (!test_visibility(tx, apex, accel, dps_list, scene, isect_config)) return std::nullopt;
  if (!test_visibility(apex, rx, accel, dps_list, scene, isect_config)) return std::nullopt;

  PropagationPath refined = coarse;
  refined.interactions[0].point = apex;
  refined.refined = true;
  refined.length_m = current;
  return refined;
}

} // namespace pcrt
