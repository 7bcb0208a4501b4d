// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "pcrt/geometry.hpp"

namespace pcrt {

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Per-material electromagnetic parameters.
struct MaterialParams {
  double relative_permittivity = 1.0; // >= 1
  double conductivity = 0.0;          // S/m, >= 0
  double scattering_coefficient = 0.0; // in [0, 1]
};

struct AugmentedPoint {
  Vec3 position;
  Vec3 normal; // unit length after load
  std::uint32_t surface_label = 0;  // dense instance id
  std::uint32_t material_label = 0; // dense class id
};

struct EdgeSegment {
  Vec3 start;
  Vec3 end;
  Vec3 normal_a; // unit normals of the two adjacent planes
  Vec3 normal_b;
  std::uint32_t material_a = 0;
  std::uint32_t material_b = 0;
};

struct Diagnostic {
  enum class Severity { Warning, Error };
  Severity severity = Severity::Error;
  std::string entity;    // "point", "edge", "scene", ...
  std::ptrdiff_t index = -1;
  std::string message;
};

/// Immutable after construction; safe for concurrent reads.
///
/// Surface and material labels on points/edges are compacted to dense
/// 0..N-1 ranges on load; surface_ids / material_ids map back to the ids
/// found in the file.
struct Scene {
  std::vector<AugmentedPoint> points;
  std::vector<EdgeSegment> edges;
  std::vector<Vec3> transmitters;
  std::vector<Vec3> receivers;
  std::vector<MaterialParams> materials;    // indexed by dense material label
  std::vector<std::uint32_t> material_ids;  // dense label -> original id
  std::vector<std::uint32_t> surface_ids;   // dense label -> original id
  Aabb bounds;

  std::size_t material_count() const { return materials.size(); }
  std::size_t surface_count() const { return surface_ids.size(); }
};

/// Loads a scene file; JSON or the binary variant (magic "PCRT\x01"),
/// auto-detected. Normals are renormalized; labels compacted; all invariants
/// enforced (ValidationError on violation).
Scene load_scene(const std::string& path);

/// Writes the scene with original label ids. The JSON form round-trips
/// doubles exactly; the binary form stores coordinates as 32-bit floats.
void save_scene(const Scene& scene, const std::string& path, bool binary = false);

/// Invariant check over an arbitrary in-memory scene. Empty result means all
/// invariants hold. Never throws for content problems.
std::vector<Diagnostic> validate_scene(const Scene& scene);

/// Recomputes the bounding box from point/antenna positions.
Aabb compute_bounds(const Scene& scene);

} // namespace pcrt
