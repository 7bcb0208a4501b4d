// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <set>

#include "pcrt/dedup.hpp"
#include "pcrt/refine.hpp"
#include "pcrt/synthgen.hpp"
#include "pcrt/trace.hpp"

using namespace pcrt;

namespace {

struct World {
  Scene scene;
  std::vector<DiscretizedPointSet> dps;
  AccelStructure accel;
  VisibilityMatrix vis;
  IntersectionConfig isect;
};

World make_world(Scene scene, ThreadPool& pool, IntersectionConfig isect = {},
                 double voxel = 0.0625) {
  World w{std::move(scene), {}, {}, {}, isect};
  w.dps = build_grid(w.scene, {voxel}, isect.point_radius);
  w.accel = AccelStructure::build(w.dps);
  w.vis = VisibilityMatrix::build(w.scene, w.dps, w.accel, isect, pool);
  return w;
}

World synth_world(SynthShape shape, double density, ThreadPool& pool, double noise = 0.0,
                  IntersectionConfig isect = {}) {
  SynthSpec spec;
  spec.shape = shape;
  spec.density = density;
  spec.noise = noise;
  return make_world(generate(spec), pool, isect);
}

std::set<std::uint64_t> trajectory_set(const std::vector<PropagationPath>& paths) {
  std::set<std::uint64_t> out;
  for (const auto& p : paths) out.insert(hash_path(p));
  return out;
}

} // namespace

TEST_CASE("trace_los matches per-receiver visibility") {
  ThreadPool pool(2);

  SUBCASE("open plane: one LOS path per receiver") {
    World w = synth_world(SynthShape::Plane, 2500, pool);
    w.scene.receivers.push_back({0.5, 0.5, 2.0});
    const auto los = trace_los(w.scene, w.accel, w.dps, IntersectionConfig{}, 0);
    CHECK(los.size() == 2);
    for (const auto& p : los) {
      CHECK(p.interactions.empty());
      CHECK(p.refined);
    }
  }

  SUBCASE("corridor: both preset receivers are blocked") {
    // Sparse sampling needs a matching disk radius for watertight coverage.
    IntersectionConfig isect;
    isect.point_radius = 0.06;
    World w = synth_world(SynthShape::CorridorBox, 400, pool, 0.0, isect);
    const auto los = trace_los(w.scene, w.accel, w.dps, isect, 0);
    CHECK(los.empty());
    for (std::size_t r = 0; r < w.scene.receivers.size(); ++r)
      CHECK(!test_visibility(w.scene.transmitters[0], w.scene.receivers[r], w.accel, w.dps,
                             w.scene, isect));
  }
}

TEST_CASE("plane bounce tracing emits a coarse candidate near the mirror point") {
  ThreadPool pool(2);
  World w = synth_world(SynthShape::Plane, 6400, pool);
  TraceConfig cfg;
  cfg.max_depth = 1;
  const auto result =
      trace_bounces(w.scene, w.dps, w.accel, w.vis, 0, cfg, IntersectionConfig{}, pool);

  bool near_mirror = false;
  std::size_t scatter_count = 0;
  for (const auto& p : result.paths) {
    REQUIRE(p.interactions.size() == 1);
    if (p.interactions[0].kind == InteractionKind::Scatter) {
      ++scatter_count;
      CHECK(p.refined);
    } else {
      near_mirror |= norm(p.interactions[0].point - Vec3{0, 0, 0}) < 0.1;
    }
  }
  CHECK(near_mirror);
  CHECK(scatter_count > 0); // plane DPSs see the receiver
}

TEST_CASE("corner at depth 2 produces two-interaction chains and a constant ray population") {
  ThreadPool pool(2);
  World w = synth_world(SynthShape::Corner, 6400, pool);
  TraceConfig cfg;
  cfg.max_depth = 2;
  const auto result =
      trace_bounces(w.scene, w.dps, w.accel, w.vis, 0, cfg, IntersectionConfig{}, pool);

  bool chain2 = false;
  for (const auto& p : result.paths) chain2 |= p.interactions.size() == 2;
  CHECK(chain2);

  REQUIRE(result.alive_per_depth.size() == 2);
  CHECK(result.alive_per_depth[0] <= w.dps.size());
  CHECK(result.alive_per_depth[1] <= result.alive_per_depth[0]);
}

TEST_CASE("specular chain points lie on surfaces and scatter is always final") {
  ThreadPool pool(2);
  World w = synth_world(SynthShape::Corner, 6400, pool);
  TraceConfig cfg;
  cfg.max_depth = 3;
  const auto result =
      trace_bounces(w.scene, w.dps, w.accel, w.vis, 0, cfg, IntersectionConfig{}, pool);
  REQUIRE(!result.paths.empty());

  for (const auto& p : result.paths) {
    for (std::size_t k = 0; k < p.interactions.size(); ++k) {
      const auto& it = p.interactions[k];
      if (it.kind == InteractionKind::Scatter) CHECK(k + 1 == p.interactions.size());
      // Face planes are z=0 (label 0) and x=0 (label 1): hits stay within r_p.
      const double plane_dist =
          it.surface_label == 0 ? std::abs(it.point.z) : std::abs(it.point.x);
      CHECK(plane_dist < IntersectionConfig{}.point_radius);
    }
  }
}

TEST_CASE("no candidates when no receiver is visible from any DPS") {
  ThreadPool pool(2);
  World w = synth_world(SynthShape::Plane, 2500, pool);

  const std::size_t word_count = (w.scene.receivers.size() * w.dps.size() + 63) / 64;
  const auto all_false = VisibilityMatrix::from_words(w.scene.receivers.size(), w.dps.size(),
                                                      std::vector<std::uint64_t>(word_count, 0));

  TraceConfig cfg;
  cfg.max_depth = 2;
  cfg.enable_scattering = false;
  const auto result =
      trace_bounces(w.scene, w.dps, w.accel, all_false, 0, cfg, IntersectionConfig{}, pool);
  CHECK(result.paths.empty());
  CHECK(result.alive_per_depth[0] > 0); // rays still traced, just nothing emitted
}

TEST_CASE("deeper traces keep the shallow trajectory set (after refine + dedup)") {
  ThreadPool pool(2);
  World w = synth_world(SynthShape::Corner, 6400, pool);
  const IntersectionConfig icfg;
  const RefinementConfig rcfg;

  auto run = [&](int depth) {
    TraceConfig cfg;
    cfg.max_depth = depth;
    cfg.enable_scattering = false;
    auto result = trace_bounces(w.scene, w.dps, w.accel, w.vis, 0, cfg, icfg, pool);
    std::vector<PropagationPath> refined = trace_los(w.scene, w.accel, w.dps, icfg, 0);
    for (const auto& cand : result.paths)
      if (auto r = refine_specular(cand, w.scene, w.dps, w.accel, icfg, rcfg))
        refined.push_back(std::move(*r));
    return dedup_paths(std::move(refined));
  };

  const auto shallow = trajectory_set(run(2));
  const auto deep = trajectory_set(run(5));
  for (const auto h : shallow) CHECK(deep.count(h) == 1);
}

TEST_CASE("diffraction candidates: one per edge-receiver pair at the midpoint") {
  SynthSpec spec;
  spec.shape = SynthShape::Corner;
  spec.density = 400;
  Scene scene = generate(spec);
  scene.receivers.push_back({1.0, 0.5, 1.0});

  TraceConfig cfg;
  cfg.enable_diffraction = true;
  const auto candidates = trace_diffraction(scene, 0, cfg);
  REQUIRE(candidates.size() == scene.edges.size() * scene.receivers.size());
  for (const auto& c : candidates) {
    REQUIRE(c.interactions.size() == 1);
    CHECK(c.interactions[0].kind == InteractionKind::Diffraction);
    CHECK(c.interactions[0].edge_index == 0);
    CHECK(norm(c.interactions[0].point - Vec3{0, 0, 0}) < 1e-12); // midpoint of the preset edge
  }

  cfg.enable_diffraction = false;
  CHECK(trace_diffraction(scene, 0, cfg).empty());

  SynthSpec plane;
  plane.shape = SynthShape::Plane;
  plane.density = 400;
  cfg.enable_diffraction = true;
  CHECK(trace_diffraction(generate(plane), 0, cfg).empty()); // no edges
}

TEST_CASE("max_depth outside the guardrail is rejected") {
  ThreadPool pool(2);
  World w = synth_world(SynthShape::Plane, 400, pool);
  TraceConfig cfg;
  cfg.max_depth = 9;
  CHECK_THROWS_AS(trace_bounces(w.scene, w.dps, w.accel, w.vis, 0, cfg, IntersectionConfig{}, pool),
                  std::invalid_argument);
}
