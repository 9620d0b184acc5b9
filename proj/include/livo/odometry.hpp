#pragma once

// The estimator: IMU propagation, LiDAR and camera iterated updates, map and
// landmark maintenance, and the asynchronous sliding-window refiner.

#include <cstdint>
#include <future>
#include <optional>
#include <vector>

#include "livo/feature_tracker.hpp"
#include "livo/ieskf.hpp"
#include "livo/lidar_frontend.hpp"
#include "livo/point_map.hpp"
#include "livo/sliding_window.hpp"
#include "livo/state.hpp"
#include "livo/visual_frontend.hpp"

namespace livo {

struct EstimatorConfig {
  FilterConfig filter;
  NoiseParams imu_noise;
  InitialUncertainty initial;

  CameraIntrinsics K;
  double pixel_sigma = 1.0;
  Mat3 rot_imu_cam = Mat3::Identity();  // initial guess, refined online
  Vec3 pos_imu_cam = Vec3::Zero();

  AssociationParams association;
  double map_voxel = 0.1;          // m
  double scan_voxel = 0.3;         // m, update-time downsampling of each scan
  double min_point_sigma = 0.01;   // m, floor on per-point noise
  double lidar_innovation_gate = 3.0;  // sigmas; <= 0 disables

  TrackerParams tracker;
  WindowOptions window;
  bool window_enabled = true;

  bool use_lidar = true;
  bool use_camera = true;
};

enum class UpdateKind { kLidar, kCamera };

struct UpdateDiagnostics {
  double t = 0.0;
  UpdateKind kind = UpdateKind::kLidar;
  int iterations = 0;
  bool converged = false;
  std::size_t residuals = 0;
  double final_delta_norm = 0.0;
  double elapsed_ms = 0.0;
  std::size_t map_points = 0;
  std::size_t landmarks = 0;
};

/// Worst covariance health seen over a run.
struct HealthSummary {
  double max_asymmetry = 0.0;
  double min_eigenvalue = 0.0;
  std::size_t checks = 0;

  bool healthy(double tolerance = 1e-9) const {
    return max_asymmetry < tolerance && min_eigenvalue > -tolerance;
  }
};

class Estimator {
 public:
  explicit Estimator(EstimatorConfig cfg);
  ~Estimator();
  Estimator(const Estimator&) = delete;
  Estimator& operator=(const Estimator&) = delete;

  /// Starts the filter at time `t` with the given state and the configured
  /// initial covariance. Biases are taken from `x0` as given.
  void initialize(double t, const NavState& x0);
  bool initialized() const { return initialized_; }

  /// Propagates to `s.t` holding the previous sample (or its mean with `s`,
  /// see FilterConfig::average_imu_interval), then stores `s` as the input
  /// for the next interval.
  void process_imu(const ImuSample& s);
  void process_lidar(const LidarFrame& frame);
  void process_camera(const CameraFrame& frame);

  /// Waits for a running window refinement and merges it.
  void finish();

  double time() const { return t_; }
  const NavState& state() const { return x_; }
  const StateCovariance& covariance() const { return cov_; }
  const PointMap& map() const { return map_; }
  const FeatureTracker& tracker() const { return tracker_; }
  const std::vector<UpdateDiagnostics>& diagnostics() const { return diagnostics_; }
  const HealthSummary& health() const { return health_; }
  std::size_t keyframe_count() const { return static_cast<std::size_t>(next_keyframe_id_); }
  std::size_t refinements_merged() const { return refinements_merged_; }

 private:
  void propagate_to(double t);
  void check_health();
  void handle_keyframe(const CameraFrame& frame);
  void merge_pending_refinement();
  std::vector<LidarPoint> prepare_scan(const LidarFrame& frame) const;
  WindowContext window_context() const;

  EstimatorConfig cfg_;
  bool initialized_ = false;
  double t_ = 0.0;
  NavState x_;
  StateCovariance cov_ = StateCovariance::Identity();
  std::optional<ImuSample> last_imu_;

  PointMap map_;
  FeatureTracker tracker_;
  SlidingWindow window_;
  std::vector<ImuSample> imu_since_keyframe_;
  std::int64_t next_keyframe_id_ = 0;
  bool lidar_since_camera_ = false;
  std::future<OptimizeResult> refinement_;
  std::size_t refinements_merged_ = 0;

  std::vector<UpdateDiagnostics> diagnostics_;
  HealthSummary health_;
};

}  // namespace livo
