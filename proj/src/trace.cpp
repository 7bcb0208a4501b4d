// SPDX-License-Identifier: Apache-2.0
#include "pcrt/trace.hpp"

#include <atomic>
#include <stdexcept>

namespace pcrt {

double polyline_length(const std::vector<Vec3>& chain) {
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < chain.size(); ++i) total += distance(chain[i], chain[i + 1]);
  return total;
}

double path_length(const Vec3& tx, const std::vector<Interaction>& interactions, const Vec3& rx) {
  double total = 0.0;
  Vec3 prev = tx;
  for (const Interaction& it : interactions) {
    total += distance(prev, it.point);
    prev = it.point;
  }
  return total + distance(prev, rx);
}

std::vector<PropagationPath> trace_los(const Scene& scene, const AccelStructure& accel,
                                       const std::vector<DiscretizedPointSet>& dps_list,
                                       const IntersectionConfig& isect_config, int tx_index) {
  const Vec3 tx = scene.transmitters.at(static_cast<std::size_t>(tx_index));
  std::vector<PropagationPath> out;
  for (std::size_t r = 0; r < scene.receivers.size(); ++r) {
    if (!test_visibility(tx, scene.receivers[r], accel, dps_list, scene, isect_config)) continue;
    PropagationPath p;
    p.tx_index = tx_index;
    p.rx_index = static_cast<int>(r);
    p.refined = true; // nothing to refine on a straight segment
    p.length_m = distance(tx, scene.receivers[r]);
    out.push_back(std::move(p));
  }
  return out;
}

TraceResult trace_bounces(const Scene& scene, const std::vector<DiscretizedPointSet>& dps_list,
                          const AccelStructure& accel, const VisibilityMatrix& vis, int tx_index,
                          const TraceConfig& config, const IntersectionConfig& isect_config,
                          ThreadPool& pool) {
  if (config.max_depth < 1 || config.max_depth > 8)
    throw std::invalid_argument("max_depth must be in [1, 8]");
  const Vec3 tx = scene.transmitters.at(static_cast<std::size_t>(tx_index));
  const std::size_t launches = dps_list.size();
  const double bias = isect_config.self_intersection_bias;
  const double bounce_t_min = isect_config.visibility_slack();

  std::vector<std::vector<PropagationPath>> per_launch(launches);
  std::vector<std::atomic<std::size_t>> alive(static_cast<std::size_t>(config.max_depth));

  pool.parallel_for(launches, 16, [&](std::size_t begin, std::size_t end) {
    std::vector<Interaction> chain;
    for (std::size_t launch = begin; launch < end; ++launch) {
      chain.clear();
      const Vec3 target = dps_list[launch].reception_point;
      if (distance(target, tx) <= 0.0) continue;
      Ray ray{tx, normalized(target - tx)};
      double t_min = 0.0;

      for (int depth = 1; depth <= config.max_depth; ++depth) {
        const auto hit = cast_ray(ray, accel, dps_list, scene, isect_config, t_min);
        if (!hit) break; // the ray left the cloud; this launch dies
        alive[static_cast<std::size_t>(depth - 1)].fetch_add(1, std::memory_order_relaxed);

        Interaction interaction;
        interaction.kind = InteractionKind::Specular;
        interaction.point = hit->position;
        interaction.normal = hit->normal;
        interaction.surface_label = hit->surface_label;
        interaction.material_label = hit->material_label;
        interaction.voxel = hit->voxel;
        chain.push_back(interaction);

        for (std::size_t rx = 0; rx < scene.receivers.size(); ++rx) {
          if (!vis.visible(rx, hit->dps_index)) continue;
          PropagationPath cand;
          cand.tx_index = tx_index;
          cand.rx_index = static_cast<int>(rx);
          cand.interactions = chain;
          cand.length_m = path_length(tx, cand.interactions, scene.receivers[rx]);
          per_launch[launch].push_back(std::move(cand));

          if (config.enable_scattering) {
            const Vec3 from = hit->position + bias * hit->normal;
            if (test_visibility(from, scene.receivers[rx], accel, dps_list, scene,
                                isect_config)) {
              PropagationPath scatter;
              scatter.tx_index = tx_index;
              scatter.rx_index = static_cast<int>(rx);
              scatter.interactions = chain;
              scatter.interactions.back().kind = InteractionKind::Scatter;
              scatter.refined = true; // scatter geometry is final at emission
              scatter.length_m = scatter.interactions.empty()
                                     ? 0.0
                                     : path_length(tx, scatter.interactions, scene.receivers[rx]);
              per_launch[launch].push_back(std::move(scatter));
            }
          }
        }

        ray.origin = hit->position + bias * hit->normal;
        ray.dir = reflect(ray.dir, hit->normal);
        t_min = bounce_t_min;
      }
    }
  });

  TraceResult result;
  result.alive_per_depth.reserve(alive.size());
  for (const auto& a : alive) {
    const std::size_t count = a.load(std::memory_order_relaxed);
    if (count > launches)
      throw std::logic_error("trace invariant violated: ray population grew");
    result.alive_per_depth.push_back(count);
  }
  std::size_t total = 0;
  for (const auto& v : per_launch) total += v.size();
  result.paths.reserve(total);
  // Launch order is DPS order, inner order is (depth, rx): reproducible.
  for (auto& v : per_launch)
    for (auto& p : v) result.paths.push_back(std::move(p));
  return result;
}

std::vector<PropagationPath> trace_diffraction(const Scene& scene, int tx_index,
                                               const TraceConfig& config) {
  std::vector<PropagationPath> out;
  if (!config.enable_diffraction) return out;
  for (std::size_t e = 0; e < scene.edges.size(); ++e) {
    const EdgeSegment& edge = scene.edges[e];
    Interaction interaction;
    interaction.kind = InteractionKind::Diffraction;
    interaction.point = (edge.start + edge.end) * 0.5;
    interaction.normal = normalized(edge.normal_a + edge.normal_b);
    interaction.material_label = edge.material_a;
    interaction.edge_index = static_cast<std::int32_t>(e);
    for (std::size_t rx = 0; rx < scene.receivers.size(); ++rx) {
      PropagationPath cand;
      cand.tx_index = tx_index;
      cand.rx_index = static_cast<int>(rx);
      cand.interactions = {interaction};
      cand.length_m = path_length(scene.transmitters.at(static_cast<std::size_t>(tx_index)),
                                  cand.interactions, scene.receivers[rx]);
      out.push_back(std::move(cand));
    }
  }
  return out;
}

} // namespace pcrt
