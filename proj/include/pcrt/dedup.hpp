// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "pcrt/trace.hpp"

namespace pcrt {

/// Trajectory digest: FNV-1a over (tx, rx, ordered (kind, key) tuples) where
/// key is the surface label for specular interactions, the edge index for
/// diffractions, and the voxel coordinate for scatter interactions.
std::uint64_t hash_path(const PropagationPath& path);

/// One representative per trajectory hash: the shortest path of each group.
/// Output sorted by (rx, length); input paths must be refined.
std::vector<PropagationPath> dedup_paths(std::vector<PropagationPath> paths);

} // namespace pcrt
