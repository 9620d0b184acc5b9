#include "livo/pipeline.hpp"

#include <cstdio>
#include <fstream>

#include <spdlog/spdlog.h>

#include "livo/config.hpp"
#include "livo/errors.hpp"

namespace livo {

StampedPose to_pose(const GroundTruthSample& g) { return StampedPose{g.t, g.rot(), g.pos}; }

RunResult replay(const SensorStreams& streams, EstimatorConfig cfg, const RunOptions& options) {
  if (options.disable_camera) cfg.use_camera = false;
  if (options.disable_lidar) cfg.use_lidar = false;
  if (streams.lidar.empty() && streams.camera.empty() && !streams.imu.empty()) {
    spdlog::warn("dataset has no LiDAR or camera records; output is IMU dead reckoning");
  }

  RunResult out;
  for (const GroundTruthSample& g : streams.ground_truth) out.ground_truth.push_back(to_pose(g));

  Estimator est(cfg);
  const std::vector<RecordRef> order = replay_order(streams);
  if (order.empty()) throw InputError("dataset contains no records");

  NavState x0;
  x0.rot_imu_cam = cfg.rot_imu_cam;
  x0.pos_imu_cam = cfg.pos_imu_cam;
  double t0 = order.front().t;
  if (!streams.ground_truth.empty()) {
    const GroundTruthSample& g = streams.ground_truth.front();
    t0 = g.t;
    x0.rot_world_imu = g.rot();
    x0.pos_world_imu = g.pos;
    x0.vel_world = g.vel;
  } else {
    spdlog::warn("no ground truth in dataset; starting at rest at the origin");
  }
  est.initialize(t0, x0);

  // A pose is emitted for each IMU record once every record sharing its
  // timestamp has been applied, so the row is the posterior at that time.
  bool has_pending = false;
  double pending_t = 0.0;
  auto flush = [&]() {
    if (!has_pending) return;
    const NavState& x = est.state();
    out.trajectory.push_back(StampedPose{pending_t, x.rot_world_imu, x.pos_world_imu});
    has_pending = false;
  };

  for (const RecordRef& r : order) {
    if (has_pending && r.t > pending_t) flush();
    if (r.t < t0) continue;
    switch (r.kind) {
      case RecordKind::kGroundTruth:
        break;
      case RecordKind::kImu:
        est.process_imu(streams.imu[r.index]);
        pending_t = r.t;
        has_pending = true;
        break;
      case RecordKind::kLidar:
        est.process_lidar(streams.lidar[r.index]);
        break;
      case RecordKind::kCamera:
        est.process_camera(streams.camera[r.index]);
        break;
    }
  }
  flush();
  est.finish();

  out.health = est.health();
  out.diagnostics = est.diagnostics();
  out.map_points = est.map().points();
  out.keyframes = est.keyframe_count();
  out.refinements = est.refinements_merged();

  if (!out.ground_truth.empty()) {
    try {
      out.metrics = evaluate(out.trajectory, out.ground_truth);
    } catch (const InputError& e) {
      spdlog::warn("metrics skipped: {}", e.what());
    }
  }
  return out;
}

void write_diagnostics(const std::filesystem::path& path,
                       const std::vector<UpdateDiagnostics>& diagnostics) {
  std::ofstream os(path);
  if (!os) throw InputError("cannot open " + path.string() + " for writing");
  os << "t,kind,iterations,converged,residuals,final_delta_norm,elapsed_ms,map_points,landmarks\n";
  char buf[256];
  for (const UpdateDiagnostics& d : diagnostics) {
    std::snprintf(buf, sizeof(buf), "%.9f,%s,%d,%d,%zu,%.6e,%.3f,%zu,%zu\n", d.t,
                  d.kind == UpdateKind::kLidar ? "lidar" : "camera", d.iterations,
                  d.converged ? 1 : 0, d.residuals, d.final_delta_norm, d.elapsed_ms,
                  d.map_points, d.landmarks);
    os << buf;
  }
}

void write_map(const std::filesystem::path& path, const std::vector<Vec3>& points) {
  std::ofstream os(path);
  if (!os) throw InputError("cannot open " + path.string() + " for writing");
  os << "# x y z\n";
  char buf[96];
  for (const Vec3& p : points) {
    std::snprintf(buf, sizeof(buf), "%.6f %.6f %.6f\n", p.x(), p.y(), p.z());
    os << buf;
  }
}

RunResult run_pipeline(const std::filesystem::path& dataset, const std::filesystem::path& config,
                       const std::filesystem::path& output_dir, const RunOptions& options) {
  const IniDocument ini = IniDocument::load(config);
  const EstimatorConfig cfg = estimator_config_from(ini);
  const SensorStreams streams = read_dataset(dataset);
  spdlog::info("loaded {}: {} IMU, {} LiDAR, {} camera, {} GT records", dataset.string(),
               streams.imu.size(), streams.lidar.size(), streams.camera.size(),
               streams.ground_truth.size());

  RunResult result = replay(streams, cfg, options);

  std::filesystem::create_directories(output_dir);
  write_tum(output_dir / "trajectory.txt", result.trajectory);
  write_diagnostics(output_dir / "diagnostics.csv", result.diagnostics);
  write_map(output_dir / "map.txt", result.map_points);
  if (!result.ground_truth.empty()) write_tum(output_dir / "groundtruth.txt", result.ground_truth);
  if (result.metrics) {
    std::ofstream os(output_dir / "metrics.txt");
    write_metrics(os, *result.metrics);
    spdlog::info("ATE {:.4f} m over {} poses", result.metrics->ate_rmse, result.metrics->matched);
  }
  spdlog::info("covariance health: max asymmetry {:.3e}, min eigenvalue {:.3e}",
               result.health.max_asymmetry, result.health.min_eigenvalue);
  return result;
}

void simulate_to(SimConfig cfg, const std::filesystem::path& output_dir,
                 const RunOptions& options) {
  const Interval whole{0.0, cfg.trajectory.duration};
  if (options.disable_camera) cfg.blackout.camera = {whole};
  if (options.disable_lidar) cfg.blackout.lidar = {whole};

  const SensorStreams streams = simulate(cfg);
  std::filesystem::create_directories(output_dir);
  write_dataset(output_dir / "dataset.txt", streams);

  std::ofstream os(output_dir / "config.ini");
  if (!os) throw InputError("cannot write " + (output_dir / "config.ini").string());
  os << render_config(cfg).dump();
  spdlog::info("simulated {} s {}: {} IMU, {} LiDAR, {} camera records", cfg.trajectory.duration,
               to_string(cfg.trajectory.kind), streams.imu.size(), streams.lidar.size(),
               streams.camera.size());
}

}  // namespace livo
