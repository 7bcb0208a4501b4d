// SPDX-License-Identifier: Apache-2.0
#include "pcrt/runner.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>

#include <json.hpp>

namespace pcrt {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

const char* kind_name(InteractionKind kind) {
  switch (kind) {
    case InteractionKind::Specular: return "specular";
    case InteractionKind::Scatter: return "scatter";
    case InteractionKind::Diffraction: return "diffraction";
  }
  return "?";
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory: " + dir);
}

std::string join(const std::string& dir, const std::string& name) {
  return (std::filesystem::path(dir) / name).string();
}

void write_vis_dump(const VisibilityMatrix& vis, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write visibility dump: " + path);
  for (const std::uint64_t word : vis.words()) {
    char bytes[8];
    for (int i = 0; i < 8; ++i) bytes[i] = static_cast<char>((word >> (8 * i)) & 0xff);
    out.write(bytes, 8);
  }
}

/// Deduped paths for every (tx, rx) pair of the scene, grouped by link.
std::vector<std::vector<PropagationPath>> split_by_link(std::vector<PropagationPath> paths,
                                                        std::size_t tx_count,
                                                        std::size_t rx_count) {
  std::vector<std::vector<PropagationPath>> links(tx_count * rx_count);
  for (auto& p : paths)
    links[static_cast<std::size_t>(p.tx_index) * rx_count + static_cast<std::size_t>(p.rx_index)]
        .push_back(std::move(p));
  return links;
}

} // namespace

void apply_config_file(RunConfig& config, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file: " + path);
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(path + ": " + e.what());
  }

  for (const auto& [key, value] : doc.items()) {
    if (key == "voxel_size") config.grid.voxel_size = value.get<double>();
    else if (key == "point_radius") config.isect.point_radius = value.get<double>();
    else if (key == "depth_attenuation") config.isect.depth_attenuation = value.get<double>();
    else if (key == "max_depth") config.trace.max_depth = value.get<int>();
    else if (key == "scattering") config.trace.enable_scattering = value.get<bool>();
    else if (key == "diffraction") config.trace.enable_diffraction = value.get<bool>();
    else if (key == "refine_max_iters") config.refine.max_iterations = value.get<int>();
    else if (key == "refine_retries") config.refine.retry_count = value.get<int>();
    else if (key == "refine_conv_threshold") config.refine.convergence_threshold = value.get<double>();
    else if (key == "refine_angle_threshold_deg") config.refine.angle_threshold_deg = value.get<double>();
    else if (key == "refine_distance_threshold") config.refine.distance_threshold = value.get<double>();
    else if (key == "refine_step_size") config.refine.step_size = value.get<double>();
    else if (key == "center_freq") config.em.center_frequency = value.get<double>();
    else if (key == "bandwidth") config.em.bandwidth = value.get<double>();
    else if (key == "freq_samples") config.em.num_freq_samples = value.get<int>();
    else if (key == "lr") config.train.learning_rate = value.get<double>();
    else if (key == "iterations") config.train.iterations = value.get<int>();
    else if (key == "seed") config.seed = value.get<std::uint64_t>();
    else if (key == "threads") config.threads = value.get<unsigned>();
    else throw ParseError(path + ": unknown config key \"" + key + "\"");
  }
}

Pipeline build_pipeline(Scene scene, const RunConfig& config, ThreadPool& pool) {
  Pipeline p{.scene = std::move(scene), .dps = {}, .accel = {}, .vis = {}, .grid_ms = 0.0};
  const auto t0 = Clock::now();
  p.dps = build_grid(p.scene, config.grid, config.isect.point_radius);
  p.accel = AccelStructure::build(p.dps);
  p.grid_ms = ms_since(t0);
  p.vis = VisibilityMatrix::build(p.scene, p.dps, p.accel, config.isect, pool);
  return p;
}

PathComputation compute_paths(const Pipeline& pipeline, int tx_index, const TraceConfig& trace_cfg,
                              const IntersectionConfig& isect_cfg,
                              const RefinementConfig& refine_cfg, ThreadPool& pool) {
  PathComputation out;
  const auto t0 = Clock::now();

  std::vector<PropagationPath> collected =
      trace_los(pipeline.scene, pipeline.accel, pipeline.dps, isect_cfg, tx_index);
  TraceResult bounced = trace_bounces(pipeline.scene, pipeline.dps, pipeline.accel, pipeline.vis,
                                      tx_index, trace_cfg, isect_cfg, pool);

  // Split coarse specular candidates from already-final scatter paths.
  std::vector<PropagationPath> candidates;
  for (auto& p : bounced.paths) {
    if (p.refined)
      collected.push_back(std::move(p));
    else
      candidates.push_back(std::move(p));
  }
  out.coarse_candidates = candidates.size();

  std::vector<std::optional<PropagationPath>> refined(candidates.size());
  std::vector<std::uint8_t> converged(candidates.size(), 0);
  pool.parallel_for(candidates.size(), 8, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      RefineStats stats;
      refined[i] = refine_specular(candidates[i], pipeline.scene, pipeline.dps, pipeline.accel,
                                   isect_cfg, refine_cfg, &stats);
      converged[i] = stats.converged ? 1 : 0;
    }
  });
  for (std::size_t i = 0; i < refined.size(); ++i) {
    out.refine_converged += converged[i];
    if (refined[i]) {
      ++out.refine_accepted;
      collected.push_back(std::move(*refined[i]));
    }
  }

  if (trace_cfg.enable_diffraction) {
    const auto diff_candidates = trace_diffraction(pipeline.scene, tx_index, trace_cfg);
    out.coarse_candidates += diff_candidates.size();
    for (const auto& cand : diff_candidates) {
      RefineStats stats;
      auto r = refine_diffraction(cand, pipeline.scene, pipeline.dps, pipeline.accel, isect_cfg,
                                  refine_cfg, &stats);
      out.refine_converged += stats.converged ? 1 : 0;
      if (r) {
        ++out.refine_accepted;
        collected.push_back(std::move(*r));
      }
    }
  }
  out.trace_refine_ms = ms_since(t0);

  const auto t1 = Clock::now();
  out.paths = dedup_paths(std::move(collected));
  out.dedup_ms = ms_since(t1);
  return out;
}

void save_ground_truth_cir(const GroundTruthCir& gt, const std::string& path) {
  nlohmann::ordered_json doc;
  doc["center_frequency_hz"] = gt.center_frequency;
  doc["bandwidth_hz"] = gt.bandwidth;
  doc["num_freq_samples"] = gt.num_freq_samples;
  doc["receivers"] = nlohmann::ordered_json::array();
  for (std::size_t r = 0; r < gt.taps_per_rx.size(); ++r) {
    nlohmann::ordered_json rec;
    rec["rx"] = r;
    rec["taps"] = nlohmann::ordered_json::array();
    for (const auto& z : gt.taps_per_rx[r]) rec["taps"].push_back({z.real(), z.imag()});
    doc["receivers"].push_back(std::move(rec));
  }
  std::ofstream out(path);
  if (!out) throw IoError("cannot write ground truth CIR file: " + path);
  out << doc.dump(1) << "\n";
}

GroundTruthCir load_ground_truth_cir(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open ground truth CIR file: " + path);
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(path + ": " + e.what());
  }
  GroundTruthCir gt;
  gt.center_frequency = doc.at("center_frequency_hz").get<double>();
  gt.bandwidth = doc.at("bandwidth_hz").get<double>();
  gt.num_freq_samples = doc.at("num_freq_samples").get<int>();
  for (const auto& rec : doc.at("receivers")) {
    std::vector<std::complex<double>> taps;
    for (const auto& z : rec.at("taps"))
      taps.emplace_back(z.at(0).get<double>(), z.at(1).get<double>());
    gt.taps_per_rx.push_back(std::move(taps));
  }
  return gt;
}

void write_path_dump(const std::vector<PropagationPath>& paths, const Scene& scene,
                     const EmConfig& em_config, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write path dump: " + path);
  const MaterialSet materials = constant_materials(scene.materials);
  for (const auto& p : paths) {
    const Vec3 tx = scene.transmitters.at(static_cast<std::size_t>(p.tx_index));
    const Vec3 rx = scene.receivers.at(static_cast<std::size_t>(p.rx_index));
    const double length = path_length(tx, p.interactions, rx);
    const std::complex<double> a = path_coefficient(p, scene, materials, em_config).value();

    nlohmann::ordered_json rec;
    rec["tx"] = p.tx_index;
    rec["rx"] = p.rx_index;
    rec["kinds"] = nlohmann::ordered_json::array();
    rec["points"] = nlohmann::ordered_json::array();
    rec["surface_labels"] = nlohmann::ordered_json::array();
    rec["material_labels"] = nlohmann::ordered_json::array();
    for (const auto& it : p.interactions) {
      rec["kinds"].push_back(kind_name(it.kind));
      rec["points"].push_back({it.point.x, it.point.y, it.point.z});
      rec["surface_labels"].push_back(it.surface_label);
      rec["material_labels"].push_back(it.material_label);
    }
    rec["length_m"] = length;
    rec["delay_s"] = length / kSpeedOfLight;
    rec["amp"] = std::abs(a);
    rec["phase_rad"] = std::arg(a);
    out << rec.dump() << "\n";
  }
}

void write_cir_csv(const ChannelImpulseResponse& cir, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write CIR file: " + path);
  out << "delay_s,re,im,power_db\n";
  for (std::size_t k = 0; k < cir.impulse.size(); ++k) {
    const std::complex<double> h = cir.impulse[k].value();
    const double power = std::norm(h);
    const double power_db = 10.0 * std::log10(std::max(power, 1e-300));
    out << fmt_double(cir.time_grid[k]) << "," << fmt_double(h.real()) << ","
        << fmt_double(h.imag()) << "," << fmt_double(power_db) << "\n";
  }
}

void write_cfr_csv(const ChannelImpulseResponse& cir, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write CFR file: " + path);
  out << "freq_hz,re,im\n";
  for (std::size_t m = 0; m < cir.cfr.size(); ++m) {
    const std::complex<double> h = cir.cfr[m].value();
    out << fmt_double(cir.freq_grid[m]) << "," << fmt_double(h.real()) << ","
        << fmt_double(h.imag()) << "\n";
  }
}

void write_train_log(const TrainResult& result, const Scene& scene, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write training log: " + path);
  out << "iteration,loss";
  for (std::size_t m = 0; m < scene.materials.size(); ++m) {
    const std::string label = std::to_string(scene.material_ids[m]);
    out << ",eps_r_" << label << ",sigma_" << label << ",scat_" << label;
  }
  out << "\n";
  for (const auto& rec : result.history) {
    out << rec.iteration << "," << fmt_double(rec.loss);
    for (const auto& m : rec.params)
      out << "," << fmt_double(m.relative_permittivity) << "," << fmt_double(m.conductivity)
          << "," << fmt_double(m.scattering_coefficient);
    out << "\n";
  }
}

void write_materials_json(const std::vector<MaterialParams>& materials, const Scene& scene,
                          const std::string& path) {
  nlohmann::ordered_json doc;
  doc["materials"] = nlohmann::ordered_json::object();
  for (std::size_t m = 0; m < materials.size(); ++m) {
    doc["materials"][std::to_string(scene.material_ids[m])] = {
        {"relative_permittivity", materials[m].relative_permittivity},
        {"conductivity_S_per_m", materials[m].conductivity},
        {"scattering_coefficient", materials[m].scattering_coefficient}};
  }
  std::ofstream out(path);
  if (!out) throw IoError("cannot write materials file: " + path);
  out << doc.dump(1) << "\n";
}

int cmd_simulate(const RunConfig& config, std::ostream& log) {
  ThreadPool pool(config.threads);
  RunConfig cfg = config;
  cfg.em.scatter_cell_area = cfg.grid.voxel_size * cfg.grid.voxel_size;

  Pipeline pipeline = build_pipeline(load_scene(cfg.scene_path), cfg, pool);
  ensure_dir(cfg.out_dir);
  if (!cfg.dump_vis_path.empty()) write_vis_dump(pipeline.vis, cfg.dump_vis_path);

  StageTimings timings;
  timings.grid_ms = pipeline.grid_ms;
  timings.vis_ms = pipeline.vis.build_millis();

  std::vector<PropagationPath> all_paths;
  for (std::size_t tx = 0; tx < pipeline.scene.transmitters.size(); ++tx) {
    PathComputation pc = compute_paths(pipeline, static_cast<int>(tx), cfg.trace, cfg.isect,
                                       cfg.refine, pool);
    timings.trace_refine_ms += pc.trace_refine_ms;
    timings.dedup_ms += pc.dedup_ms;
    for (auto& p : pc.paths) all_paths.push_back(std::move(p));
  }
  std::sort(all_paths.begin(), all_paths.end(),
            [](const PropagationPath& a, const PropagationPath& b) {
              if (a.tx_index != b.tx_index) return a.tx_index < b.tx_index;
              if (a.rx_index != b.rx_index) return a.rx_index < b.rx_index;
              if (a.length_m != b.length_m) return a.length_m < b.length_m;
              return a.trajectory_hash < b.trajectory_hash;
            });

  write_path_dump(all_paths, pipeline.scene, cfg.em, join(cfg.out_dir, "paths.jsonl"));

  const auto em_start = Clock::now();
  const MaterialSet materials = constant_materials(pipeline.scene.materials);
  const std::size_t rx_count = pipeline.scene.receivers.size();
  auto links = split_by_link(all_paths, pipeline.scene.transmitters.size(), rx_count);
  for (std::size_t tx = 0; tx < pipeline.scene.transmitters.size(); ++tx) {
    for (std::size_t rx = 0; rx < rx_count; ++rx) {
      const auto& link_paths = links[tx * rx_count + rx];
      const ChannelImpulseResponse cir = synthesize_cir(
          std::span<const PropagationPath>(link_paths), pipeline.scene, materials, cfg.em, &pool);
      const std::string tag = "tx" + std::to_string(tx) + "_rx" + std::to_string(rx);
      write_cir_csv(cir, join(cfg.out_dir, "cir_" + tag + ".csv"));
      write_cfr_csv(cir, join(cfg.out_dir, "cfr_" + tag + ".csv"));
    }
  }
  timings.em_ms = ms_since(em_start);

  const std::size_t link_count = pipeline.scene.transmitters.size() * rx_count;
  const double per_link_ms = (timings.trace_refine_ms + timings.dedup_ms) /
                             static_cast<double>(std::max<std::size_t>(link_count, 1));

  std::ofstream timing(join(cfg.out_dir, "timing.txt"));
  auto report = [&](std::ostream& os) {
    os << "stage timings (ms)\n";
    os << "  grid+accel   " << timings.grid_ms << "\n";
    os << "  visibility   " << timings.vis_ms << "\n";
    os << "  trace+refine " << timings.trace_refine_ms << "\n";
    os << "  dedup        " << timings.dedup_ms << "\n";
    os << "  em           " << timings.em_ms << "\n";
    os << "paths: " << all_paths.size() << " over " << link_count << " links\n";
    os << "path computation per link (ms): " << per_link_ms << "\n";
  };
  report(log);
  if (timing) report(timing);
  return 0;
}

int cmd_bench(const RunConfig& config, std::ostream& log) {
  ThreadPool pool(config.threads);
  RunConfig cfg = config;
  cfg.em.scatter_cell_area = cfg.grid.voxel_size * cfg.grid.voxel_size;

  Pipeline pipeline = build_pipeline(load_scene(cfg.scene_path), cfg, pool);
  ensure_dir(cfg.out_dir);

  std::ofstream csv(join(cfg.out_dir, "bench.csv"));
  if (!csv) throw IoError("cannot write bench.csv");
  csv << "depth,specular_ms,specular_paths,scatter_ms,scatter_paths\n";
  log << "depth  spec ms  spec paths  spec+scat ms  spec+scat paths\n";

  const int repeats = std::max(cfg.bench_repeats, 1);
  for (int depth = 2; depth <= 5; ++depth) {
    double med_ms[2] = {0, 0};
    std::size_t counts[2] = {0, 0};
    for (int mode = 0; mode < 2; ++mode) {
      TraceConfig tc = cfg.trace;
      tc.max_depth = depth;
      tc.enable_scattering = mode == 1;
      tc.enable_diffraction = false;
      std::vector<double> times;
      std::size_t path_count = 0;
      for (int run = -1; run < repeats; ++run) { // run -1 is the warm-up
        PathComputation pc = compute_paths(pipeline, 0, tc, cfg.isect, cfg.refine, pool);
        std::size_t bounce_paths = 0;
        for (const auto& p : pc.paths)
          bounce_paths += p.interactions.empty() ? 0 : 1; // LOS excluded from the count
        if (run >= 0) {
          times.push_back(pc.trace_refine_ms);
          path_count = bounce_paths;
        }
      }
      std::sort(times.begin(), times.end());
      med_ms[mode] = times[times.size() / 2];
      counts[mode] = path_count;
    }
    csv << depth << "," << fmt_double(med_ms[0]) << "," << counts[0] << ","
        << fmt_double(med_ms[1]) << "," << counts[1] << "\n";
    char line[160];
    std::snprintf(line, sizeof(line), "%5d  %7.1f  %10zu  %12.1f  %15zu\n", depth, med_ms[0],
                  counts[0], med_ms[1], counts[1]);
    log << line;
  }
  return 0;
}

int cmd_train(const RunConfig& config, std::ostream& log) {
  ThreadPool pool(config.threads);
  RunConfig cfg = config;
  cfg.em.scatter_cell_area = cfg.grid.voxel_size * cfg.grid.voxel_size;
  cfg.train.seed = cfg.seed;

  Pipeline pipeline = build_pipeline(load_scene(cfg.scene_path), cfg, pool);
  ensure_dir(cfg.out_dir);
  const std::size_t rx_count = pipeline.scene.receivers.size();

  // Geometry is frozen during training: trace once for TX 0.
  PathComputation pc = compute_paths(pipeline, 0, cfg.trace, cfg.isect, cfg.refine, pool);
  std::vector<std::vector<PropagationPath>> paths_per_rx(rx_count);
  for (auto& p : pc.paths) {
    bool diffraction = false;
    for (const auto& it : p.interactions) diffraction |= it.kind == InteractionKind::Diffraction;
    if (diffraction) continue; // zero EM contribution; keep the training sums lean
    paths_per_rx[static_cast<std::size_t>(p.rx_index)].push_back(std::move(p));
  }

  GroundTruthCir gt;
  if (cfg.self_consistent) {
    // Forward model at the scene's own material table is the training target.
    ad::set_active_parameter_count(0);
    const MaterialSet true_materials = constant_materials(pipeline.scene.materials);
    gt.center_frequency = cfg.em.center_frequency;
    gt.bandwidth = cfg.em.bandwidth;
    gt.num_freq_samples = cfg.em.num_freq_samples;
    for (std::size_t rx = 0; rx < rx_count; ++rx) {
      const ChannelImpulseResponse cir =
          synthesize_cir(std::span<const PropagationPath>(paths_per_rx[rx]), pipeline.scene,
                         true_materials, cfg.em, &pool);
      std::vector<std::complex<double>> taps;
      taps.reserve(cir.impulse.size());
      for (const auto& z : cir.impulse) taps.push_back(z.value());
      gt.taps_per_rx.push_back(std::move(taps));
    }
    const std::string gt_path = cfg.ground_truth_path.empty()
                                    ? join(cfg.out_dir, "gt_cir.json")
                                    : cfg.ground_truth_path;
    save_ground_truth_cir(gt, gt_path);
    log << "self-consistent ground truth written to " << gt_path << "\n";
  } else {
    if (cfg.ground_truth_path.empty())
      throw IoError("train requires --ground-truth (or --self-consistent)");
    gt = load_ground_truth_cir(cfg.ground_truth_path);
    if (gt.center_frequency != cfg.em.center_frequency || gt.bandwidth != cfg.em.bandwidth ||
        gt.num_freq_samples != cfg.em.num_freq_samples)
      throw ValidationError("ground truth CIR grid does not match the configured band");
    if (gt.taps_per_rx.size() != rx_count)
      throw ValidationError("ground truth CIR receiver count does not match the scene");
  }

  TrainResult result = train(paths_per_rx, gt.taps_per_rx, pipeline.scene.materials.size(),
                             pipeline.scene, cfg.train, cfg.em, &pool);

  write_train_log(result, pipeline.scene, join(cfg.out_dir, "train_log.csv"));
  write_materials_json(result.final_params, pipeline.scene,
                       join(cfg.out_dir, "materials_out.json"));

  if (!result.history.empty()) {
    log << "iterations: " << result.history.size() << " (skipped " << result.skipped_iterations
        << ")\n";
    log << "loss: " << result.history.front().loss << " -> " << result.history.back().loss
        << "\n";
  }
  for (std::size_t m = 0; m < result.final_params.size(); ++m) {
    const auto& p = result.final_params[m];
    log << "material " << pipeline.scene.material_ids[m] << ": eps_r " << p.relative_permittivity
        << " sigma " << p.conductivity << " S " << p.scattering_coefficient << "\n";
  }
  return 0;
}

} // namespace pcrt
