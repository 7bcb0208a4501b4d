// SPDX-License-Identifier: Apache-2.0
#include "pcrt/synthgen.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <stdexcept>

#include <json.hpp>

namespace pcrt {

namespace {

struct ShapeDef {
  std::vector<RectFace> faces;
  std::vector<EdgeSegment> edges;
  std::vector<Vec3> transmitters, receivers;
  std::vector<MaterialParams> materials;
};

RectFace make_face(Vec3 origin, Vec3 u_dir, double u_len, Vec3 v_dir, double v_len,
                   std::uint32_t surface, std::uint32_t material) {
  RectFace f;
  f.origin = origin;
  f.u_dir = normalized(u_dir);
  f.v_dir = normalized(v_dir);
  f.u_len = u_len;
  f.v_len = v_len;
  f.normal = cross(f.u_dir, f.v_dir);
  f.surface_label = surface;
  f.material_label = material;
  return f;
}

ShapeDef plane_shape() {
  ShapeDef s;
  s.faces.push_back(make_face({-0.5, -0.5, 0}, {1, 0, 0}, 1, {0, 1, 0}, 1, 0, 0));
  s.transmitters = {{-1, 0, 1}};
  s.receivers = {{1, 0, 1}};
  s.materials = {{4.0, 0.05, 0.3}};
  return s;
}

ShapeDef corner_shape() {
  ShapeDef s;
  // Horizontal face along +x, vertical face along +z; they meet on the y axis.
  s.faces.push_back(make_face({0, -1, 0}, {1, 0, 0}, 2, {0, 1, 0}, 2, 0, 0));
  s.faces.push_back(make_face({0, -1, 0}, {0, 1, 0}, 2, {0, 0, 1}, 2, 1, 1));
  EdgeSegment e;
  e.start = {0, -1, 0};
  e.end = {0, 1, 0};
  e.normal_a = {0, 0, 1};
  e.normal_b = {1, 0, 0};
  e.material_a = 0;
  e.material_b = 1;
  s.edges.push_back(e);
  s.transmitters = {{1.2, 0, 0.4}};
  s.receivers = {{0.6, 0, 0.8}};
  s.materials = {{4.0, 0.05, 0.3}, {3.0, 0.1, 0.4}};
  return s;
}

// Straight 20 m x 2 m x 2.5 m corridor with a partition wall at x = 10
// leaving a 0.4 m gap; the preset antennas are NLOS around that gap.
ShapeDef corridor_shape() {
  ShapeDef s;
  const double L = 20, W = 2, H = 2.5;
  s.faces.push_back(make_face({0, 0, 0}, {1, 0, 0}, L, {0, 1, 0}, W, 0, 1));   // floor
  s.faces.push_back(make_face({0, 0, H}, {0, 1, 0}, W, {1, 0, 0}, L, 1, 1));   // ceiling
  s.faces.push_back(make_face({0, 0, 0}, {0, 0, 1}, H, {1, 0, 0}, L, 2, 0));   // wall y=0
  s.faces.push_back(make_face({0, W, 0}, {1, 0, 0}, L, {0, 0, 1}, H, 3, 0));   // wall y=W
  s.faces.push_back(make_face({0, 0, 0}, {0, 1, 0}, W, {0, 0, 1}, H, 4, 0));   // cap x=0
  s.faces.push_back(make_face({L, 0, 0}, {0, 0, 1}, H, {0, 1, 0}, W, 5, 0));   // cap x=L
  s.faces.push_back(make_face({10, 0, 0}, {0, 1, 0}, 1.6, {0, 0, 1}, H, 6, 0)); // partition
  s.transmitters = {{2, 1, 1.5}};
  s.receivers = {{18, 1.4, 1.2}, {16, 0.5, 1.0}};
  s.materials = {{5.24, 0.5, 0.4}, {3.0, 0.2, 0.35}};
  return s;
}

// 4 m x 5 m x 2.5 m room; floor, ceiling, two wall pairs, and a table top
// carry five distinct materials.
ShapeDef room5_shape() {
  ShapeDef s;
  const double X = 4, Y = 5, Z = 2.5;
  s.faces.push_back(make_face({0, 0, 0}, {1, 0, 0}, X, {0, 1, 0}, Y, 0, 0)); // floor
  s.faces.push_back(make_face({0, 0, Z}, {0, 1, 0}, Y, {1, 0, 0}, X, 1, 1)); // ceiling
  s.faces.push_back(make_face({0, 0, 0}, {0, 1, 0}, Y, {0, 0, 1}, Z, 2, 2)); // wall x=0
  s.faces.push_back(make_face({X, 0, 0}, {0, 0, 1}, Z, {0, 1, 0}, Y, 3, 2)); // wall x=X
  s.faces.push_back(make_face({0, 0, 0}, {0, 0, 1}, Z, {1, 0, 0}, X, 4, 3)); // wall y=0
  s.faces.push_back(make_face({0, Y, 0}, {1, 0, 0}, X, {0, 0, 1}, Z, 5, 3)); // wall y=Y
  s.faces.push_back(make_face({1.5, 1.5, 0.75}, {1, 0, 0}, 1.2, {0, 1, 0}, 0.8, 6, 4)); // table
  s.transmitters = {{0.5, 0.6, 2.0}};
  s.receivers = {{3.5, 4.4, 1.5}, {2.0, 2.5, 1.0}, {1.0, 4.0, 0.5},
                 {3.2, 1.0, 1.8}, {0.8, 3.2, 1.2}, {2.4, 3.6, 0.9}};
  s.materials = {{4.5, 0.30, 0.45},
                 {2.2, 0.10, 0.20},
                 {5.5, 0.60, 0.15},
                 {3.2, 0.20, 0.55},
                 {2.8, 0.08, 0.35}};
  return s;
}

ShapeDef shape_def(SynthShape shape) {
  switch (shape) {
    case SynthShape::Plane: return plane_shape();
    case SynthShape::Corner: return corner_shape();
    case SynthShape::CorridorBox: return corridor_shape();
    case SynthShape::Room5Mat: return room5_shape();
  }
  throw std::invalid_argument("unknown synth shape");
}

Vec3 mirror_across(const Vec3& p, const RectFace& f) {
  const double d = dot(p - f.origin, f.normal);
  return p - 2.0 * d * f.normal;
}

/// Intersection of segment [a, b] with the face plane; fills t in (0,1).
bool plane_segment_hit(const RectFace& f, const Vec3& a, const Vec3& b, double& t, Vec3& point) {
  const double da = dot(a - f.origin, f.normal);
  const double db = dot(b - f.origin, f.normal);
  if (da == db) return false;
  t = da / (da - db);
  if (t <= 1e-12 || t >= 1.0 - 1e-12) return false;
  point = a + t * (b - a);
  return true;
}

bool unoccluded_chain(const std::vector<Vec3>& chain, const std::vector<RectFace>& faces) {
  for (std::size_t i = 0; i + 1 < chain.size(); ++i)
    if (segment_blocked(chain[i], chain[i + 1], faces)) return false;
  return true;
}

void enumerate_pair(const std::vector<RectFace>& faces, const Vec3& tx, const Vec3& rx,
                    int tx_index, int rx_index, int max_depth,
                    std::vector<ExpectedPath>& out) {
  if (!segment_blocked(tx, rx, faces)) {
    ExpectedPath los;
    los.tx_index = tx_index;
    los.rx_index = rx_index;
    los.length = distance(tx, rx);
    out.push_back(los);
  }

  for (const RectFace& f : faces) {
    const double side_tx = dot(tx - f.origin, f.normal);
    const double side_rx = dot(rx - f.origin, f.normal);
    if (side_tx * side_rx <= 0.0) continue; // opposite sides: no reflection
    const Vec3 t1 = mirror_across(tx, f);
    double t;
    Vec3 hit;
    if (!plane_segment_hit(f, t1, rx, t, hit) || !f.contains(hit)) continue;
    if (!unoccluded_chain({tx, hit, rx}, faces)) continue;
    ExpectedPath p;
    p.tx_index = tx_index;
    p.rx_index = rx_index;
    p.points = {hit};
    p.surface_labels = {f.surface_label};
    p.length = distance(tx, hit) + distance(hit, rx);
    out.push_back(p);
  }

  if (max_depth < 2) return;
  for (const RectFace& f : faces) {
    for (const RectFace& g : faces) {
      if (&f == &g) continue;
      const Vec3 t1 = mirror_across(tx, f);
      const Vec3 t2 = mirror_across(t1, g);
      double t;
      Vec3 i2, i1;
      if (!plane_segment_hit(g, t2, rx, t, i2) || !g.contains(i2)) continue;
      if (!plane_segment_hit(f, t1, i2, t, i1) || !f.contains(i1)) continue;
      // Same-side requirements for both reflections.
      if (dot(tx - f.origin, f.normal) * dot(i2 - f.origin, f.normal) <= 0.0) continue;
      if (dot(i1 - g.origin, g.normal) * dot(rx - g.origin, g.normal) <= 0.0) continue;
      if (!unoccluded_chain({tx, i1, i2, rx}, faces)) continue;
      ExpectedPath p;
      p.tx_index = tx_index;
      p.rx_index = rx_index;
      p.points = {i1, i2};
      p.surface_labels = {f.surface_label, g.surface_label};
      p.length = distance(tx, i1) + distance(i1, i2) + distance(i2, rx);
      out.push_back(p);
    }
  }
}

} // namespace

bool segment_blocked(const Vec3& a, const Vec3& b, const std::vector<RectFace>& faces,
                     double end_slack) {
  const double len = distance(a, b);
  if (len <= 0.0) return false;
  for (const RectFace& f : faces) {
    double t;
    Vec3 hit;
    if (!plane_segment_hit(f, a, b, t, hit)) continue;
    if (!f.contains(hit)) continue;
    if (t * len < end_slack || (1.0 - t) * len < end_slack) continue;
    return true;
  }
  return false;
}

Scene generate(const SynthSpec& spec) {
  if (spec.density <= 0.0) throw std::invalid_argument("density must be positive");
  if (spec.noise < 0.0) throw std::invalid_argument("noise must be non-negative");

  const ShapeDef def = shape_def(spec.shape);
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> jitter(-0.3, 0.3);
  std::normal_distribution<double> off_surface(0.0, 1.0);

  Scene scene;
  const double spacing = 1.0 / std::sqrt(spec.density);
  for (const RectFace& f : def.faces) {
    const int nu = std::max<int>(1, static_cast<int>(std::llround(f.u_len / spacing)));
    const int nv = std::max<int>(1, static_cast<int>(std::llround(f.v_len / spacing)));
    const double su = f.u_len / nu, sv = f.v_len / nv;
    for (int i = 0; i < nu; ++i) {
      for (int j = 0; j < nv; ++j) {
        const double u = (i + 0.5 + jitter(rng)) * su;
        const double v = (j + 0.5 + jitter(rng)) * sv;
        Vec3 pos = f.point_at(u, v);
        if (spec.noise > 0.0) pos += f.normal * (spec.noise * off_surface(rng));
        scene.points.push_back({pos, f.normal, f.surface_label, f.material_label});
      }
    }
  }

  scene.edges = def.edges;
  scene.transmitters = def.transmitters;
  scene.receivers = def.receivers;
  scene.materials = def.materials;
  scene.material_ids.resize(scene.materials.size());
  for (std::uint32_t i = 0; i < scene.material_ids.size(); ++i) scene.material_ids[i] = i;
  std::uint32_t max_surface = 0;
  for (const RectFace& f : def.faces) max_surface = std::max(max_surface, f.surface_label);
  scene.surface_ids.resize(max_surface + 1);
  for (std::uint32_t i = 0; i < scene.surface_ids.size(); ++i) scene.surface_ids[i] = i;
  scene.bounds = compute_bounds(scene);
  return scene;
}

GroundTruth ground_truth(const SynthSpec& spec) {
  const ShapeDef def = shape_def(spec.shape);
  GroundTruth gt;
  gt.faces = def.faces;
  for (std::size_t t = 0; t < def.transmitters.size(); ++t)
    for (std::size_t r = 0; r < def.receivers.size(); ++r)
      enumerate_pair(gt.faces, def.transmitters[t], def.receivers[r], static_cast<int>(t),
                     static_cast<int>(r), gt.enumeration_depth, gt.expected_paths);
  return gt;
}

void save_ground_truth(const GroundTruth& gt, const std::string& path) {
  nlohmann::json doc;
  doc["enumeration_depth"] = gt.enumeration_depth;
  doc["faces"] = nlohmann::json::array();
  for (const RectFace& f : gt.faces) {
    doc["faces"].push_back({{"origin", {f.origin.x, f.origin.y, f.origin.z}},
                            {"u_dir", {f.u_dir.x, f.u_dir.y, f.u_dir.z}},
                            {"v_dir", {f.v_dir.x, f.v_dir.y, f.v_dir.z}},
                            {"u_len", f.u_len},
                            {"v_len", f.v_len},
                            {"normal", {f.normal.x, f.normal.y, f.normal.z}},
                            {"surface_label", f.surface_label},
                            {"material_label", f.material_label}});
  }
  doc["expected_paths"] = nlohmann::json::array();
  for (const ExpectedPath& p : gt.expected_paths) {
    nlohmann::json rec;
    rec["tx"] = p.tx_index;
    rec["rx"] = p.rx_index;
    rec["surface_labels"] = p.surface_labels;
    rec["length_m"] = p.length;
    rec["points"] = nlohmann::json::array();
    for (const Vec3& q : p.points) rec["points"].push_back({q.x, q.y, q.z});
    doc["expected_paths"].push_back(rec);
  }
  std::ofstream out(path);
  if (!out) throw IoError("cannot write ground truth file: " + path);
  out << doc.dump(1) << "\n";
}

SynthShape parse_shape(const std::string& name) {
  if (name == "plane") return SynthShape::Plane;
  if (name == "corner") return SynthShape::Corner;
  if (name == "corridor") return SynthShape::CorridorBox;
  if (name == "room5") return SynthShape::Room5Mat;
  throw std::invalid_argument("unknown shape: " + name + " (plane|corner|corridor|room5)");
}

} // namespace pcrt
