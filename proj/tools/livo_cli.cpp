// livo: simulate datasets, replay them through the estimator, evaluate
// trajectories and run the Jacobian checks.
//
// Exit codes: 0 success, 1 input error, 2 numerical failure.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "livo/config.hpp"
#include "livo/errors.hpp"
#include "livo/jacobian_check.hpp"
#include "livo/metrics.hpp"
#include "livo/pipeline.hpp"

namespace fs = std::filesystem;

namespace {

void configure_logging() {
  spdlog::set_pattern("[%l] %v");
  if (const char* level = std::getenv("LIVO_LOG")) {
    spdlog::set_level(spdlog::level::from_str(level));
  } else {
    spdlog::set_level(spdlog::level::info);
  }
}

int cmd_simulate(const std::optional<fs::path>& config, const fs::path& out,
                 std::optional<std::uint64_t> seed, const livo::RunOptions& opts) {
  livo::SimConfig cfg;
  if (config) cfg = livo::sim_config_from(livo::IniDocument::load(*config));
  if (seed) cfg.seed = *seed;
  livo::simulate_to(cfg, out, opts);
  std::cout << "wrote " << (out / "dataset.txt").string() << " and "
            << (out / "config.ini").string() << "\n";
  return 0;
}

int cmd_run(const fs::path& dataset, std::optional<fs::path> config, const fs::path& out,
            const livo::RunOptions& opts) {
  if (!config) config = dataset.parent_path() / "config.ini";
  const livo::RunResult r = livo::run_pipeline(dataset, *config, out, opts);
  if (r.metrics) livo::write_metrics(std::cout, *r.metrics);
  std::cout << "trajectory: " << (out / "trajectory.txt").string() << " (" << r.trajectory.size()
            << " poses)\n";
  return 0;
}

int cmd_eval(const fs::path& est, const fs::path& gt, const std::optional<fs::path>& out) {
  const livo::MetricsReport report = livo::evaluate(livo::read_tum(est), livo::read_tum(gt));
  livo::write_metrics(std::cout, report);
  if (out) {
    fs::create_directories(*out);
    std::ofstream os(*out / "metrics.txt");
    livo::write_metrics(os, report);
  }
  return 0;
}

int cmd_jacobian_check(int instances, std::uint64_t seed) {
  const auto reports = livo::run_jacobian_suites(instances, seed);
  bool ok = true;
  for (const auto& r : reports) {
    std::printf("%-32s instances=%d max_rel_err=%.3e %s\n", r.name.c_str(), r.instances,
                r.max_relative_error, r.passed() ? "ok" : "FAIL");
    ok = ok && r.passed();
  }
  return ok ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  configure_logging();

  CLI::App app{"LiDAR-inertial-visual odometry toolkit"};
  app.require_subcommand(1);

  std::optional<fs::path> config;
  fs::path output_dir = "out";
  std::optional<std::uint64_t> seed;
  livo::RunOptions opts;

  auto* sim = app.add_subcommand("simulate", "Simulate a dataset from a scenario config");
  sim->add_option("--config", config, "Scenario config (INI)")->check(CLI::ExistingFile);
  sim->add_option("--output-dir", output_dir, "Directory for dataset.txt and config.ini");
  sim->add_option("--seed", seed, "Override the scenario seed");
  sim->add_flag("--disable-camera", opts.disable_camera, "Black out the camera for the whole run");
  sim->add_flag("--disable-lidar", opts.disable_lidar, "Black out the LiDAR for the whole run");

  fs::path dataset;
  auto* run = app.add_subcommand("run", "Replay a dataset through the estimator");
  run->add_option("dataset", dataset, "Dataset file")->required()->check(CLI::ExistingFile);
  run->add_option("--config", config, "Estimator config (default: config.ini next to dataset)");
  run->add_option("--output-dir", output_dir, "Directory for outputs");
  run->add_option("--seed", seed, "Accepted for symmetry; replay is deterministic");
  run->add_flag("--disable-camera", opts.disable_camera, "Ignore camera records");
  run->add_flag("--disable-lidar", opts.disable_lidar, "Ignore LiDAR records");

  fs::path est_path, gt_path;
  std::optional<fs::path> eval_out;
  auto* eval = app.add_subcommand("eval", "Compare an estimated trajectory with ground truth");
  eval->add_option("estimate", est_path, "Estimated trajectory (TUM)")->required();
  eval->add_option("groundtruth", gt_path, "Ground-truth trajectory (TUM)")->required();
  eval->add_option("--output-dir", eval_out, "Also write metrics.txt here");

  int instances = 100;
  std::uint64_t jac_seed = 7;
  auto* jac = app.add_subcommand("jacobian-check", "Finite-difference checks of all Jacobians");
  jac->add_option("--instances", instances, "Random instances per suite")
      ->check(CLI::PositiveNumber);
  jac->add_option("--seed", jac_seed, "Sampler seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*sim) return cmd_simulate(config, output_dir, seed, opts);
    if (*run) return cmd_run(dataset, config, output_dir, opts);
    if (*eval) return cmd_eval(est_path, gt_path, eval_out);
    if (*jac) return cmd_jacobian_check(instances, jac_seed);
  } catch (const livo::NumericalFailure& e) {
    spdlog::error("numerical failure: {}", e.what());
    return 2;
  } catch (const livo::InvalidRotation& e) {
    spdlog::error("numerical failure: {}", e.what());
    return 2;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
  return 1;
}
