// SPDX-License-Identifier: Apache-2.0
#include "pcrt/scene.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

namespace pcrt {

namespace {

constexpr char kBinaryMagic[5] = {'P', 'C', 'R', 'T', '\x01'};
constexpr double kNormalTolerance = 1e-6;
constexpr double kEdgeMinLength = 1e-9;
constexpr double kEdgeParallelTolerance = 1e-4; // rad

using nlohmann::json;

std::string entity_at(const char* what, std::size_t i) {
  std::ostringstream os;
  os << what << " " << i;
  return os.str();
}

/// Raw records straight from a file, labels still original.
struct RawScene {
  std::vector<AugmentedPoint> points;
  std::vector<EdgeSegment> edges;
  std::vector<Vec3> transmitters, receivers;
  std::map<std::uint32_t, MaterialParams> materials;
};

Vec3 vec_from(const json& arr, std::size_t offset) {
  return {arr.at(offset).get<double>(), arr.at(offset + 1).get<double>(),
          arr.at(offset + 2).get<double>()};
}

RawScene parse_json(const std::string& text, const std::string& path) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(path + ": " + e.what());
  }

  RawScene raw;
  try {
    for (const auto& rec : doc.value("points", json::array())) {
      if (!rec.is_array() || rec.size() != 8)
        throw ParseError(path + ": point record must have 8 entries");
      AugmentedPoint p;
      p.position = vec_from(rec, 0);
      p.normal = vec_from(rec, 3);
      p.surface_label = rec.at(6).get<std::uint32_t>();
      p.material_label = rec.at(7).get<std::uint32_t>();
      raw.points.push_back(p);
    }
    for (const auto& rec : doc.value("edges", json::array())) {
      if (!rec.is_array() || rec.size() != 14)
        throw ParseError(path + ": edge record must have 14 entries");
      EdgeSegment e;
      e.start = vec_from(rec, 0);
      e.end = vec_from(rec, 3);
      e.normal_a = vec_from(rec, 6);
      e.normal_b = vec_from(rec, 9);
      e.material_a = rec.at(12).get<std::uint32_t>();
      e.material_b = rec.at(13).get<std::uint32_t>();
      raw.edges.push_back(e);
    }
    for (const auto& rec : doc.value("transmitters", json::array()))
      raw.transmitters.push_back(vec_from(rec, 0));
    for (const auto& rec : doc.value("receivers", json::array()))
      raw.receivers.push_back(vec_from(rec, 0));
    if (doc.contains("materials")) {
      for (const auto& [key, value] : doc.at("materials").items()) {
        MaterialParams m;
        m.relative_permittivity = value.at("relative_permittivity").get<double>();
        m.conductivity = value.at("conductivity_S_per_m").get<double>();
        m.scattering_coefficient = value.at("scattering_coefficient").get<double>();
        raw.materials[static_cast<std::uint32_t>(std::stoul(key))] = m;
      }
    }
  } catch (const json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
  return raw;
}

template <typename T>
void read_raw(std::istream& in, T* out, std::size_t count, const std::string& path) {
  in.read(reinterpret_cast<char*>(out), static_cast<std::streamsize>(sizeof(T) * count));
  if (!in) throw ParseError(path + ": truncated binary scene file");
}

float read_f32(std::istream& in, const std::string& path) {
  float v;
  read_raw(in, &v, 1, path);
  return v;
}

Vec3 read_vec3(std::istream& in, const std::string& path) {
  const float x = read_f32(in, path), y = read_f32(in, path), z = read_f32(in, path);
  return {static_cast<double>(x), static_cast<double>(y), static_cast<double>(z)};
}

std::uint32_t read_u32(std::istream& in, const std::string& path) {
  std::uint32_t v;
  read_raw(in, &v, 1, path);
  return v;
}

std::uint64_t read_u64(std::istream& in, const std::string& path) {
  std::uint64_t v;
  read_raw(in, &v, 1, path);
  return v;
}

RawScene parse_binary(std::istream& in, const std::string& path) {
  RawScene raw;
  const std::uint64_t num_points = read_u64(in, path);
  raw.points.reserve(num_points);
  for (std::uint64_t i = 0; i < num_points; ++i) {
    AugmentedPoint p;
    p.position = read_vec3(in, path);
    p.normal = read_vec3(in, path);
    p.surface_label = read_u32(in, path);
    p.material_label = read_u32(in, path);
    raw.points.push_back(p);
  }
  const std::uint64_t num_edges = read_u64(in, path);
  for (std::uint64_t i = 0; i < num_edges; ++i) {
    EdgeSegment e;
    e.start = read_vec3(in, path);
    e.end = read_vec3(in, path);
    e.normal_a = read_vec3(in, path);
    e.normal_b = read_vec3(in, path);
    e.material_a = read_u32(in, path);
    e.material_b = read_u32(in, path);
    raw.edges.push_back(e);
  }
  const std::uint64_t num_tx = read_u64(in, path);
  for (std::uint64_t i = 0; i < num_tx; ++i) raw.transmitters.push_back(read_vec3(in, path));
  const std::uint64_t num_rx = read_u64(in, path);
  for (std::uint64_t i = 0; i < num_rx; ++i) raw.receivers.push_back(read_vec3(in, path));
  const std::uint64_t num_materials = read_u64(in, path);
  for (std::uint64_t i = 0; i < num_materials; ++i) {
    const std::uint32_t label = read_u32(in, path);
    MaterialParams m;
    m.relative_permittivity = static_cast<double>(read_f32(in, path));
    m.conductivity = static_cast<double>(read_f32(in, path));
    m.scattering_coefficient = static_cast<double>(read_f32(in, path));
    raw.materials[label] = m;
  }
  return raw;
}

/// Compaction: sorted original ids -> dense 0..N-1.
std::vector<std::uint32_t> dense_mapping(const std::set<std::uint32_t>& ids) {
  return {ids.begin(), ids.end()};
}

std::uint32_t dense_index(const std::vector<std::uint32_t>& mapping, std::uint32_t id) {
  const auto it = std::lower_bound(mapping.begin(), mapping.end(), id);
  return static_cast<std::uint32_t>(it - mapping.begin());
}

Scene finalize(RawScene raw, const std::string& path) {
  Scene scene;

  if (raw.points.empty()) throw ValidationError(path + ": scene contains zero points");

  std::set<std::uint32_t> surface_set;
  for (const auto& p : raw.points) surface_set.insert(p.surface_label);
  scene.surface_ids = dense_mapping(surface_set);

  std::set<std::uint32_t> material_set;
  for (const auto& [label, params] : raw.materials) material_set.insert(label);
  scene.material_ids = dense_mapping(material_set);
  scene.materials.resize(scene.material_ids.size());
  for (std::size_t i = 0; i < scene.material_ids.size(); ++i)
    scene.materials[i] = raw.materials.at(scene.material_ids[i]);

  auto require_material = [&](std::uint32_t label, const std::string& where) {
    if (!raw.materials.count(label))
      throw ValidationError(path + ": " + where + " references material label " +
                            std::to_string(label) + " absent from material table");
  };

  scene.points.reserve(raw.points.size());
  for (std::size_t i = 0; i < raw.points.size(); ++i) {
    AugmentedPoint p = raw.points[i];
    if (!is_finite(p.position) || !is_finite(p.normal))
      throw ValidationError(path + ": " + entity_at("point", i) + " has non-finite coordinates");
    const double n = norm(p.normal);
    if (n < kEdgeMinLength)
      throw ValidationError(path + ": " + entity_at("point", i) + " has zero-length normal");
    p.normal = p.normal / n;
    require_material(p.material_label, entity_at("point", i));
    p.surface_label = dense_index(scene.surface_ids, p.surface_label);
    p.material_label = dense_index(scene.material_ids, p.material_label);
    scene.points.push_back(p);
  }

  for (std::size_t i = 0; i < raw.edges.size(); ++i) {
    EdgeSegment e = raw.edges[i];
    if (!is_finite(e.start) || !is_finite(e.end) || !is_finite(e.normal_a) ||
        !is_finite(e.normal_b))
      throw ValidationError(path + ": " + entity_at("edge", i) + " has non-finite coordinates");
    if (distance(e.start, e.end) <= kEdgeMinLength)
      throw ValidationError(path + ": " + entity_at("edge", i) + " has zero length");
    const double na = norm(e.normal_a), nb = norm(e.normal_b);
    if (na < kEdgeMinLength || nb < kEdgeMinLength)
      throw ValidationError(path + ": " + entity_at("edge", i) + " has zero-length face normal");
    e.normal_a = e.normal_a / na;
    e.normal_b = e.normal_b / nb;
    const double c = std::clamp(std::abs(dot(e.normal_a, e.normal_b)), 0.0, 1.0);
    if (std::acos(c) < kEdgeParallelTolerance)
      throw ValidationError(path + ": " + entity_at("edge", i) +
                            " has coplanar face normals (degenerate edge)");
    require_material(e.material_a, entity_at("edge", i));
    require_material(e.material_b, entity_at("edge", i));
    e.material_a = dense_index(scene.material_ids, e.material_a);
    e.material_b = dense_index(scene.material_ids, e.material_b);
    scene.edges.push_back(e);
  }

  scene.transmitters = std::move(raw.transmitters);
  scene.receivers = std::move(raw.receivers);
  for (const auto& a : scene.transmitters)
    if (!is_finite(a)) throw ValidationError(path + ": non-finite transmitter position");
  for (const auto& a : scene.receivers)
    if (!is_finite(a)) throw ValidationError(path + ": non-finite receiver position");

  scene.bounds = compute_bounds(scene);
  return scene;
}

} // namespace

Aabb compute_bounds(const Scene& scene) {
  Aabb box;
  for (const auto& p : scene.points) box.expand(p.position);
  for (const auto& e : scene.edges) {
    box.expand(e.start);
    box.expand(e.end);
  }
  for (const auto& a : scene.transmitters) box.expand(a);
  for (const auto& a : scene.receivers) box.expand(a);
  return box;
}

Scene load_scene(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open scene file: " + path);

  char magic[5] = {};
  in.read(magic, 5);
  if (in.gcount() == 5 && std::memcmp(magic, kBinaryMagic, 5) == 0)
    return finalize(parse_binary(in, path), path);

  in.clear();
  in.seekg(0);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return finalize(parse_json(buffer.str(), path), path);
}

void save_scene(const Scene& scene, const std::string& path, bool binary) {
  auto original_surface = [&](std::uint32_t dense) { return scene.surface_ids.at(dense); };
  auto original_material = [&](std::uint32_t dense) { return scene.material_ids.at(dense); };

  if (binary) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write scene file: " + path);
    out.write(kBinaryMagic, 5);
    auto put_u64 = [&](std::uint64_t v) { out.write(reinterpret_cast<const char*>(&v), 8); };
    auto put_u32 = [&](std::uint32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); };
    auto put_vec = [&](const Vec3& v) {
      const float f[3] = {static_cast<float>(v.x), static_cast<float>(v.y),
                          static_cast<float>(v.z)};
      out.write(reinterpret_cast<const char*>(f), 12);
    };
    put_u64(scene.points.size());
    for (const auto& p : scene.points) {
      put_vec(p.position);
      put_vec(p.normal);
      put_u32(original_surface(p.surface_label));
      put_u32(original_material(p.material_label));
    }
    put_u64(scene.edges.size());
    for (const auto& e : scene.edges) {
      put_vec(e.start);
      put_vec(e.end);
      put_vec(e.normal_a);
      put_vec(e.normal_b);
      put_u32(original_material(e.material_a));
      put_u32(original_material(e.material_b));
    }
    put_u64(scene.transmitters.size());
    for (const auto& a : scene.transmitters) put_vec(a);
    put_u64(scene.receivers.size());
    for (const auto& a : scene.receivers) put_vec(a);
    put_u64(scene.materials.size());
    for (std::size_t i = 0; i < scene.materials.size(); ++i) {
      put_u32(scene.material_ids[i]);
      const auto& m = scene.materials[i];
      const float f[3] = {static_cast<float>(m.relative_permittivity),
                          static_cast<float>(m.conductivity),
                          static_cast<float>(m.scattering_coefficient)};
      out.write(reinterpret_cast<const char*>(f), 12);
    }
    if (!out) throw IoError("failed writing scene file: " + path);
    return;
  }

  json doc;
  doc["points"] = json::array();
  for (const auto& p : scene.points)
    doc["points"].push_back({p.position.x, p.position.y, p.position.z, p.normal.x, p.normal.y,
                             p.normal.z, original_surface(p.surface_label),
                             original_material(p.material_label)});
  doc["edges"] = json::array();
  for (const auto& e : scene.edges)
    doc["edges"].push_back({e.start.x, e.start.y, e.start.z, e.end.x, e.end.y, e.end.z,
                            e.normal_a.x, e.normal_a.y, e.normal_a.z, e.normal_b.x, e.normal_b.y,
                            e.normal_b.z, original_material(e.material_a),
                            original_material(e.material_b)});
  doc["transmitters"] = json::array();
  for (const auto& a : scene.transmitters) doc["transmitters"].push_back({a.x, a.y, a.z});
  doc["receivers"] = json::array();
  for (const auto& a : scene.receivers) doc["receivers"].push_back({a.x, a.y, a.z});
  doc["materials"] = json::object();
  for (std::size_t i = 0; i < scene.materials.size(); ++i) {
    const auto& m = scene.materials[i];
    doc["materials"][std::to_string(scene.material_ids[i])] = {
        {"relative_permittivity", m.relative_permittivity},
        {"conductivity_S_per_m", m.conductivity},
        {"scattering_coefficient", m.scattering_coefficient}};
  }

  std::ofstream out(path);
  if (!out) throw IoError("cannot write scene file: " + path);
  out << doc.dump(1) << "\n";
  if (!out) throw IoError("failed writing scene file: " + path);
}

std::vector<Diagnostic> validate_scene(const Scene& scene) {
  std::vector<Diagnostic> out;
  auto error = [&](std::string entity, std::ptrdiff_t index, std::string message) {
    out.push_back({Diagnostic::Severity::Error, std::move(entity), index, std::move(message)});
  };

  if (scene.points.empty()) error("scene", -1, "scene contains zero points");
  if (scene.transmitters.empty()) error("scene", -1, "no transmitter defined");
  if (scene.receivers.empty()) error("scene", -1, "no receiver defined");

  for (std::size_t i = 0; i < scene.points.size(); ++i) {
    const auto& p = scene.points[i];
    if (!is_finite(p.position) || !is_finite(p.normal)) {
      error("point", static_cast<std::ptrdiff_t>(i), "non-finite coordinates");
      continue;
    }
    if (std::abs(norm(p.normal) - 1.0) > kNormalTolerance)
      error("point", static_cast<std::ptrdiff_t>(i), "normal is not unit length");
    if (p.material_label >= scene.materials.size())
      error("point", static_cast<std::ptrdiff_t>(i), "material label out of range");
    if (p.surface_label >= scene.surface_ids.size())
      error("point", static_cast<std::ptrdiff_t>(i), "surface label out of range");
  }

  for (std::size_t i = 0; i < scene.edges.size(); ++i) {
    const auto& e = scene.edges[i];
    if (!is_finite(e.start) || !is_finite(e.end) || !is_finite(e.normal_a) ||
        !is_finite(e.normal_b)) {
      error("edge", static_cast<std::ptrdiff_t>(i), "non-finite coordinates");
      continue;
    }
    if (distance(e.start, e.end) <= kEdgeMinLength)
      error("edge", static_cast<std::ptrdiff_t>(i), "zero length");
    if (std::abs(norm(e.normal_a) - 1.0) > kNormalTolerance ||
        std::abs(norm(e.normal_b) - 1.0) > kNormalTolerance)
      error("edge", static_cast<std::ptrdiff_t>(i), "face normal is not unit length");
    const double c = std::clamp(std::abs(dot(e.normal_a, e.normal_b)), 0.0, 1.0);
    if (std::acos(c) < kEdgeParallelTolerance)
      error("edge", static_cast<std::ptrdiff_t>(i), "coplanar face normals (degenerate edge)");
    if (e.material_a >= scene.materials.size() || e.material_b >= scene.materials.size())
      error("edge", static_cast<std::ptrdiff_t>(i), "material label out of range");
  }

  return out;
}

} // namespace pcrt
