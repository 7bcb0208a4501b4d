// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <iosfwd>
#include <string>

#include "pcrt/dedup.hpp"
#include "pcrt/em.hpp"
#include "pcrt/learn.hpp"
#include "pcrt/refine.hpp"
#include "pcrt/synthgen.hpp"

namespace pcrt {

/// Union of all stage configs plus I/O locations; mirrors the CLI surface.
struct RunConfig {
  std::string scene_path;
  std::string out_dir = "out";
  std::string ground_truth_path; // cmd_train input (output when self_consistent)
  std::string dump_vis_path;     // optional visibility bitset dump
  VoxelGridConfig grid;
  IntersectionConfig isect;
  TraceConfig trace;
  RefinementConfig refine;
  EmConfig em; // scatter_cell_area follows grid.voxel_size at run time
  TrainConfig train;
  unsigned threads = 0; // 0 = hardware concurrency
  std::uint64_t seed = 0;
  bool self_consistent = false;
  int bench_repeats = 5;
};

/// Loads a JSON config file whose keys mirror the CLI flags; unknown keys are
/// rejected.
void apply_config_file(RunConfig& config, const std::string& path);

struct StageTimings {
  double grid_ms = 0.0;
  double vis_ms = 0.0;
  double trace_refine_ms = 0.0;
  double dedup_ms = 0.0;
  double em_ms = 0.0;
};

/// Scene plus the immutable structures every stage reads.
struct Pipeline {
  Scene scene;
  std::vector<DiscretizedPointSet> dps;
  AccelStructure accel;
  VisibilityMatrix vis;
  double grid_ms = 0.0;
};

Pipeline build_pipeline(Scene scene, const RunConfig& config, ThreadPool& pool);

struct PathComputation {
  std::vector<PropagationPath> paths; // deduped, sorted by (rx, length)
  double trace_refine_ms = 0.0;
  double dedup_ms = 0.0;
  std::size_t coarse_candidates = 0;
  std::size_t refine_converged = 0; // stage-1 convergence among specular candidates
  std::size_t refine_accepted = 0;
};

/// LOS + bounce tracing + refinement + diffraction + dedup for one TX.
PathComputation compute_paths(const Pipeline& pipeline, int tx_index, const TraceConfig& trace_cfg,
                              const IntersectionConfig& isect_cfg,
                              const RefinementConfig& refine_cfg, ThreadPool& pool);

/// Ground-truth CIR container used by cmd_train.
struct GroundTruthCir {
  double center_frequency = 0.0;
  double bandwidth = 0.0;
  int num_freq_samples = 0;
  std::vector<std::vector<std::complex<double>>> taps_per_rx;
};

void save_ground_truth_cir(const GroundTruthCir& gt, const std::string& path);
GroundTruthCir load_ground_truth_cir(const std::string& path);

void write_path_dump(const std::vector<PropagationPath>& paths, const Scene& scene,
                     const EmConfig& em_config, const std::string& path);
void write_cir_csv(const ChannelImpulseResponse& cir, const std::string& path);
void write_cfr_csv(const ChannelImpulseResponse& cir, const std::string& path);
void write_train_log(const TrainResult& result, const Scene& scene, const std::string& path);
void write_materials_json(const std::vector<MaterialParams>& materials, const Scene& scene,
                          const std::string& path);

int cmd_simulate(const RunConfig& config, std::ostream& log);
int cmd_bench(const RunConfig& config, std::ostream& log);
int cmd_train(const RunConfig& config, std::ostream& log);

} // namespace pcrt
