// SPDX-License-Identifier: Apache-2.0
//
// pcrt: point-cloud radio propagation ray tracer.

#include <algorithm>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "pcrt/runner.hpp"

namespace {

using pcrt::RunConfig;

void add_grid_flags(CLI::App* app, RunConfig& cfg) {
  app->add_option("--voxel-size", cfg.grid.voxel_size, "Voxel size rho (m)")
      ->capture_default_str();
  app->add_option("--point-radius", cfg.isect.point_radius, "Disk radius r_p (m)")
      ->capture_default_str();
  app->add_option("--depth-attenuation", cfg.isect.depth_attenuation,
                  "Depth attenuation lambda_d (1/m)")
      ->capture_default_str();
}

void add_trace_flags(CLI::App* app, RunConfig& cfg) {
  app->add_option("--max-depth", cfg.trace.max_depth, "Maximum interaction depth")
      ->capture_default_str();
  app->add_flag("--scattering,!--no-scattering", cfg.trace.enable_scattering,
                "Diffuse scattering (last interaction)")
      ->capture_default_str();
  app->add_flag("--diffraction,!--no-diffraction", cfg.trace.enable_diffraction,
                "Single-bounce edge diffraction")
      ->capture_default_str();
  app->add_option("--refine-max-iters", cfg.refine.max_iterations, "Refinement iteration cap xi")
      ->capture_default_str();
  app->add_option("--refine-retries", cfg.refine.retry_count, "Refinement retry cap kappa")
      ->capture_default_str();
  app->add_option("--refine-conv-threshold", cfg.refine.convergence_threshold,
                  "Convergence threshold t_c on |grad|^2")
      ->capture_default_str();
  app->add_option("--refine-angle-threshold-deg", cfg.refine.angle_threshold_deg,
                  "Validation angle threshold t_a (deg)")
      ->capture_default_str();
  app->add_option("--refine-distance-threshold", cfg.refine.distance_threshold,
                  "Validation distance threshold t_d (m)")
      ->capture_default_str();
}

void add_em_flags(CLI::App* app, RunConfig& cfg) {
  app->add_option("--center-freq", cfg.em.center_frequency, "Center frequency (Hz)")
      ->capture_default_str();
  app->add_option("--bandwidth", cfg.em.bandwidth, "Bandwidth (Hz)")->capture_default_str();
  app->add_option("--freq-samples", cfg.em.num_freq_samples, "CFR sample count")
      ->capture_default_str();
}

void add_common_flags(CLI::App* app, RunConfig& cfg) {
  app->add_option("--threads", cfg.threads, "Worker threads (0 = hardware)")
      ->capture_default_str();
  app->add_option("--seed", cfg.seed, "Seed for all randomness")->capture_default_str();
  app->add_option("--out", cfg.out_dir, "Output directory")->capture_default_str();
}

} // namespace

int main(int argc, char** argv) {
  RunConfig cfg;

  // The config file provides defaults; explicit flags override it, so apply
  // it before CLI11 sees the command line.
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    try {
      if (arg == "--config" && i + 1 < argc)
        pcrt::apply_config_file(cfg, argv[i + 1]);
      else if (arg.rfind("--config=", 0) == 0)
        pcrt::apply_config_file(cfg, arg.substr(9));
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << "\n";
      return 1;
    }
  }

  CLI::App app{"Radio propagation ray tracing on augmented point clouds"};
  app.require_subcommand(1);
  std::string config_path;
  app.add_option("--config", config_path, "JSON config file (flags override it)");

  std::string shape_name = "plane";
  std::string gt_out_path;
  pcrt::SynthSpec synth;
  bool voxelize_stats = false;
  std::vector<double> cast_from{0, 0, 0}, cast_dir{0, 0, -1};

  auto* validate = app.add_subcommand("validate-scene", "Check scene invariants");
  validate->add_option("--scene", cfg.scene_path, "Scene file")->required();

  auto* voxelize = app.add_subcommand("voxelize", "Build the DPS grid and report stats");
  voxelize->add_option("--scene", cfg.scene_path, "Scene file")->required();
  voxelize->add_flag("--stats", voxelize_stats, "Print per-DPS statistics");
  add_grid_flags(voxelize, cfg);

  auto* cast = app.add_subcommand("cast", "Debug single-ray cast");
  cast->add_option("--scene", cfg.scene_path, "Scene file")->required();
  cast->add_option("--from", cast_from, "Ray origin x,y,z")->delimiter(',')->expected(3);
  cast->add_option("--dir", cast_dir, "Ray direction x,y,z")->delimiter(',')->expected(3);
  add_grid_flags(cast, cfg);

  auto* simulate = app.add_subcommand("simulate", "Trace, refine, dedup, and evaluate CIRs");
  simulate->add_option("--scene", cfg.scene_path, "Scene file")->required();
  simulate->add_option("--dump-vis", cfg.dump_vis_path, "Write the visibility bitset");
  add_grid_flags(simulate, cfg);
  add_trace_flags(simulate, cfg);
  add_em_flags(simulate, cfg);
  add_common_flags(simulate, cfg);

  auto* bench = app.add_subcommand("bench", "Depth-scaling benchmark (depths 2-5)");
  bench->add_option("--scene", cfg.scene_path, "Scene file")->required();
  bench->add_option("--repeats", cfg.bench_repeats, "Timed repetitions per depth")
      ->capture_default_str();
  add_grid_flags(bench, cfg);
  add_trace_flags(bench, cfg);
  add_common_flags(bench, cfg);

  auto* train = app.add_subcommand("train", "Learn material parameters from CIRs");
  train->add_option("--scene", cfg.scene_path, "Scene file")->required();
  train->add_option("--ground-truth", cfg.ground_truth_path, "Ground-truth CIR file");
  train->add_flag("--self-consistent", cfg.self_consistent,
                  "Generate ground truth from the scene's material table");
  train->add_option("--lr", cfg.train.learning_rate, "Adam learning rate")
      ->capture_default_str();
  train->add_option("--iterations", cfg.train.iterations, "Training iterations")
      ->capture_default_str();
  add_grid_flags(train, cfg);
  add_trace_flags(train, cfg);
  add_em_flags(train, cfg);
  add_common_flags(train, cfg);

  auto* synthgen = app.add_subcommand("synthgen", "Generate a synthetic scene");
  synthgen->add_option("--shape", shape_name, "plane|corner|corridor|room5")
      ->capture_default_str();
  synthgen->add_option("--density", synth.density, "Points per m^2")->capture_default_str();
  synthgen->add_option("--noise", synth.noise, "Gaussian noise std along normals (m)")
      ->capture_default_str();
  synthgen->add_option("--seed", synth.seed, "Sampling seed")->capture_default_str();
  synthgen->add_option("--out", cfg.scene_path, "Scene file to write")->required();
  synthgen->add_option("--ground-truth", gt_out_path, "Analytic ground-truth JSON to write");

  CLI11_PARSE(app, argc, argv);

  try {
    if (app.got_subcommand(validate)) {
      const pcrt::Scene scene = pcrt::load_scene(cfg.scene_path);
      const auto diagnostics = pcrt::validate_scene(scene);
      for (const auto& d : diagnostics)
        std::cout << (d.severity == pcrt::Diagnostic::Severity::Error ? "error" : "warning")
                  << " [" << d.entity << " " << d.index << "] " << d.message << "\n";
      std::cout << scene.points.size() << " points, " << scene.edges.size() << " edges, "
                << diagnostics.size() << " diagnostics\n";
      return diagnostics.empty() ? 0 : 1;
    }
    if (app.got_subcommand(voxelize)) {
      const pcrt::Scene scene = pcrt::load_scene(cfg.scene_path);
      const auto dps = pcrt::build_grid(scene, cfg.grid, cfg.isect.point_radius);
      std::size_t min_pts = SIZE_MAX, max_pts = 0, total = 0, bytes = 0;
      for (const auto& d : dps) {
        min_pts = std::min(min_pts, d.point_indices.size());
        max_pts = std::max(max_pts, d.point_indices.size());
        total += d.point_indices.size();
        bytes += sizeof(d) + d.point_indices.size() * (sizeof(std::uint32_t) + 2 * sizeof(pcrt::Vec3));
      }
      std::cout << dps.size() << " DPS, points per DPS min/mean/max " << min_pts << "/"
                << (static_cast<double>(total) / dps.size()) << "/" << max_pts
                << ", approx memory " << (bytes / (1024.0 * 1024.0)) << " MiB\n";
      (void)voxelize_stats;
      return 0;
    }
    if (app.got_subcommand(cast)) {
      const pcrt::Scene scene = pcrt::load_scene(cfg.scene_path);
      const auto dps = pcrt::build_grid(scene, cfg.grid, cfg.isect.point_radius);
      const auto accel = pcrt::AccelStructure::build(dps);
      const pcrt::Ray ray{{cast_from[0], cast_from[1], cast_from[2]},
                          pcrt::normalized({cast_dir[0], cast_dir[1], cast_dir[2]})};
      const auto hit = pcrt::cast_ray(ray, accel, dps, scene, cfg.isect);
      if (!hit) {
        std::cout << "miss\n";
        return 0;
      }
      std::cout << "hit at (" << hit->position.x << ", " << hit->position.y << ", "
                << hit->position.z << ") distance " << hit->distance << " normal ("
                << hit->normal.x << ", " << hit->normal.y << ", " << hit->normal.z
                << ") surface " << hit->surface_label << " material " << hit->material_label
                << "\n";
      return 0;
    }
    if (app.got_subcommand(simulate)) return pcrt::cmd_simulate(cfg, std::cout);
    if (app.got_subcommand(bench)) return pcrt::cmd_bench(cfg, std::cout);
    if (app.got_subcommand(train)) return pcrt::cmd_train(cfg, std::cout);
    if (app.got_subcommand(synthgen)) {
      synth.shape = pcrt::parse_shape(shape_name);
      const pcrt::Scene scene = pcrt::generate(synth);
      pcrt::save_scene(scene, cfg.scene_path);
      if (!gt_out_path.empty()) pcrt::save_ground_truth(pcrt::ground_truth(synth), gt_out_path);
      std::cout << "wrote " << scene.points.size() << " points to " << cfg.scene_path << "\n";
      return 0;
    }
  } catch (const pcrt::IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
