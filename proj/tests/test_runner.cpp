// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <unistd.h>

#include "pcrt/runner.hpp"

using namespace pcrt;

namespace {

std::string temp_dir(const char* name) {
  const auto dir = std::filesystem::temp_directory_path() /
                   (std::string("pcrt_runner_") + name + "_" + std::to_string(::getpid()));
  std::filesystem::create_directories(dir);
  return dir.string();
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string make_corner_scene(const std::string& dir) {
  SynthSpec spec;
  spec.shape = SynthShape::Corner;
  spec.density = 2500;
  const std::string path = dir + "/corner.json";
  save_scene(generate(spec), path);
  return path;
}

} // namespace

TEST_CASE("config file keys map onto the run configuration; unknown keys rejected") {
  const std::string dir = temp_dir("config");
  const std::string path = dir + "/config.json";
  {
    std::ofstream out(path);
    out << R"({"voxel_size": 0.25, "point_radius": 0.02, "max_depth": 3,
               "scattering": false, "lr": 0.5, "iterations": 7, "seed": 99,
               "refine_conv_threshold": 0.001})";
  }
  RunConfig cfg;
  apply_config_file(cfg, path);
  CHECK(cfg.grid.voxel_size == 0.25);
  CHECK(cfg.isect.point_radius == 0.02);
  CHECK(cfg.trace.max_depth == 3);
  CHECK(cfg.trace.enable_scattering == false);
  CHECK(cfg.train.learning_rate == 0.5);
  CHECK(cfg.train.iterations == 7);
  CHECK(cfg.seed == 99);
  CHECK(cfg.refine.convergence_threshold == 0.001);

  {
    std::ofstream out(path);
    out << R"({"voxel_sizee": 0.25})";
  }
  CHECK_THROWS_AS(apply_config_file(cfg, path), ParseError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("simulate writes the expected artifacts for the corner scene") {
  const std::string dir = temp_dir("simulate");
  RunConfig cfg;
  cfg.scene_path = make_corner_scene(dir);
  cfg.out_dir = dir + "/out";
  cfg.trace.max_depth = 2;
  cfg.trace.enable_scattering = false;
  cfg.threads = 2;

  std::ostringstream log;
  CHECK(cmd_simulate(cfg, log) == 0);

  const std::string dump = read_file(cfg.out_dir + "/paths.jsonl");
  // Exactly the image-method set: LOS + 2 single + 1 double bounce.
  CHECK(std::count(dump.begin(), dump.end(), '\n') == 4);
  CHECK(std::filesystem::exists(cfg.out_dir + "/cir_tx0_rx0.csv"));
  CHECK(std::filesystem::exists(cfg.out_dir + "/cfr_tx0_rx0.csv"));
  CHECK(std::filesystem::exists(cfg.out_dir + "/timing.txt"));

  const std::string cir = read_file(cfg.out_dir + "/cir_tx0_rx0.csv");
  CHECK(cir.rfind("delay_s,re,im,power_db\n", 0) == 0);
  CHECK(std::count(cir.begin(), cir.end(), '\n') == 130); // header + 129 taps

  SUBCASE("a second run is byte-identical") {
    RunConfig cfg2 = cfg;
    cfg2.out_dir = dir + "/out2";
    std::ostringstream log2;
    CHECK(cmd_simulate(cfg2, log2) == 0);
    CHECK(read_file(cfg2.out_dir + "/paths.jsonl") == dump);
    CHECK(read_file(cfg2.out_dir + "/cir_tx0_rx0.csv") == cir);
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("missing scene file surfaces as IoError (CLI exit code 2)") {
  RunConfig cfg;
  cfg.scene_path = "/nonexistent/scene.json";
  std::ostringstream log;
  CHECK_THROWS_AS(cmd_simulate(cfg, log), IoError);
}

TEST_CASE("self-consistent training on a coarse corner run recovers loss decrease") {
  const std::string dir = temp_dir("train");
  RunConfig cfg;
  cfg.scene_path = make_corner_scene(dir);
  cfg.out_dir = dir + "/out";
  cfg.grid.voxel_size = 0.25;
  cfg.trace.max_depth = 1;
  cfg.self_consistent = true;
  cfg.train.iterations = 60;
  cfg.threads = 2;
  cfg.seed = 5;

  std::ostringstream log;
  CHECK(cmd_train(cfg, log) == 0);
  CHECK(std::filesystem::exists(cfg.out_dir + "/train_log.csv"));
  CHECK(std::filesystem::exists(cfg.out_dir + "/materials_out.json"));
  CHECK(std::filesystem::exists(cfg.out_dir + "/gt_cir.json"));

  const std::string log_csv = read_file(cfg.out_dir + "/train_log.csv");
  CHECK(std::count(log_csv.begin(), log_csv.end(), '\n') == 61); // header + 60 iterations

  // The ground-truth file round-trips.
  const GroundTruthCir gt = load_ground_truth_cir(cfg.out_dir + "/gt_cir.json");
  CHECK(gt.num_freq_samples == 129);
  CHECK(gt.taps_per_rx.size() == 1);

  SUBCASE("re-running with the same seed reproduces the log bytes") {
    RunConfig cfg2 = cfg;
    cfg2.out_dir = dir + "/out2";
    std::ostringstream log2;
    CHECK(cmd_train(cfg2, log2) == 0);
    CHECK(read_file(cfg2.out_dir + "/train_log.csv") == log_csv);
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("train without ground truth or self-consistency is an error") {
  const std::string dir = temp_dir("train_err");
  RunConfig cfg;
  cfg.scene_path = make_corner_scene(dir);
  cfg.out_dir = dir + "/out";
  std::ostringstream log;
  CHECK_THROWS_AS(cmd_train(cfg, log), IoError);
  std::filesystem::remove_all(dir);
}
