// SPDX-License-Identifier: Apache-2.0
#include "pcrt/dedup.hpp"

#include <algorithm>
#include <unordered_map>

namespace pcrt {

namespace {

struct Fnv1a {
  std::uint64_t state = 14695981039346656037ull;
  void feed_byte(std::uint8_t b) {
    state ^= b;
    state *= 1099511628211ull;
  }
  void feed_u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) feed_byte(static_cast<std::uint8_t>(v >> (8 * i)));
  }
};

} // namespace

std::uint64_t hash_path(const PropagationPath& path) {
  Fnv1a h;
  h.feed_u64(static_cast<std::uint64_t>(path.tx_index));
  h.feed_u64(static_cast<std::uint64_t>(path.rx_index));
  for (const Interaction& it : path.interactions) {
    h.feed_byte(static_cast<std::uint8_t>(it.kind));
    switch (it.kind) {
      case InteractionKind::Specular:
        h.feed_u64(it.surface_label);
        break;
      case InteractionKind::Diffraction:
        h.feed_u64(static_cast<std::uint64_t>(it.edge_index));
        break;
      case InteractionKind::Scatter:
        h.feed_u64(static_cast<std::uint64_t>(it.voxel.x));
        h.feed_u64(static_cast<std::uint64_t>(it.voxel.y));
        h.feed_u64(static_cast<std::uint64_t>(it.voxel.z));
        break;
    }
  }
  return h.state;
}

std::vector<PropagationPath> dedup_paths(std::vector<PropagationPath> paths) {
  std::unordered_map<std::uint64_t, std::size_t> best; // hash -> index into paths
  for (std::size_t i = 0; i < paths.size(); ++i) {
    paths[i].trajectory_hash = hash_path(paths[i]);
    const auto [it, inserted] = best.emplace(paths[i].trajectory_hash, i);
    if (!inserted && paths[i].length_m < paths[it->second].length_m) it->second = i;
  }

  std::vector<PropagationPath> out;
  out.reserve(best.size());
  for (std::size_t i = 0; i < paths.size(); ++i) {
    const auto it = best.find(paths[i].trajectory_hash);
    if (it != best.end() && it->second == i) out.push_back(std::move(paths[i]));
  }
  std::sort(out.begin(), out.end(), [](const PropagationPath& a, const PropagationPath& b) {
    if (a.rx_index != b.rx_index) return a.rx_index < b.rx_index;
    if (a.length_m != b.length_m) return a.length_m < b.length_m;
    if (a.tx_index != b.tx_index) return a.tx_index < b.tx_index;
    return a.trajectory_hash < b.trajectory_hash;
  });
  return out;
}

} // namespace pcrt
