#pragma once

// Offline replay: dataset in, trajectory / map / diagnostics / metrics out.

#include <filesystem>
#include <optional>

#include "livo/dataset.hpp"
#include "livo/metrics.hpp"
#include "livo/odometry.hpp"
#include "livo/sim_world.hpp"

namespace livo {

struct RunOptions {
  bool disable_camera = false;
  bool disable_lidar = false;
};

struct RunResult {
  Trajectory trajectory;    // one pose per IMU record
  Trajectory ground_truth;  // from GT records, empty if none
  std::optional<MetricsReport> metrics;
  HealthSummary health;
  std::vector<UpdateDiagnostics> diagnostics;
  std::vector<Vec3> map_points;
  std::size_t keyframes = 0;
  std::size_t refinements = 0;
};

/// Replays `streams` through a fresh estimator. The filter starts at the
/// first GT record (pose and velocity, zero biases); without GT it starts at
/// rest at the origin. Throws NumericalFailure if the state diverges.
RunResult replay(const SensorStreams& streams, EstimatorConfig cfg,
                 const RunOptions& options = {});

/// Reads the dataset and config, replays, and writes trajectory.txt,
/// diagnostics.csv, map.txt and, when GT is present, groundtruth.txt and
/// metrics.txt into `output_dir`.
RunResult run_pipeline(const std::filesystem::path& dataset,
                       const std::filesystem::path& config,
                       const std::filesystem::path& output_dir, const RunOptions& options = {});

/// Simulates a dataset and writes dataset.txt and a matching config.ini
/// (truth geometry, estimator noise) into `output_dir`. The disable flags
/// black out that sensor for the whole run.
void simulate_to(SimConfig cfg, const std::filesystem::path& output_dir,
                 const RunOptions& options = {});

/// Pose at the GT record as a trajectory row.
StampedPose to_pose(const GroundTruthSample& g);

void write_diagnostics(const std::filesystem::path& path,
                       const std::vector<UpdateDiagnostics>& diagnostics);
void write_map(const std::filesystem::path& path, const std::vector<Vec3>& points);

}  // namespace livo
