#pragma once

// Sliding-window refinement of keyframe poses and visual landmarks.
//
// Variables: per keyframe (theta, p, v) with R <- R Exp(theta), and one 3D
// point per landmark. Biases are held at the keyframe estimates. Factors:
//   - reprojection of each landmark into each observing keyframe, camera
//     extrinsics fixed at the filter estimate;
//   - IMU preintegration between consecutive keyframes;
//   - stiff pose priors on keyframes whose pose came from a LiDAR update.
// The problem is solved by Levenberg-Marquardt with the landmarks eliminated
// through the Schur complement.

#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "livo/feature_tracker.hpp"
#include "livo/preintegration.hpp"
#include "livo/visual_frontend.hpp"

namespace livo {

using Mat6 = Eigen::Matrix<double, 6, 6>;

struct KeyframeNode {
  std::int64_t id = 0;
  double t = 0.0;
  Mat3 rot = Mat3::Identity();  // G_R_I
  Vec3 pos = Vec3::Zero();
  Vec3 vel = Vec3::Zero();
  Vec3 bias_gyro = Vec3::Zero();
  Vec3 bias_accel = Vec3::Zero();
  std::vector<FeatureObservation> observations;
};

struct LidarPosePrior {
  std::int64_t keyframe_id = 0;
  Mat3 rot = Mat3::Identity();
  Vec3 pos = Vec3::Zero();
  Mat6 cov = Mat6::Identity() * 1e-4;  // (theta, p)
};

struct PreintegrationFactor {
  std::int64_t from = 0;
  std::int64_t to = 0;
  PreintegratedImu preint;
};

struct ReprojectionFactor {
  std::int64_t keyframe_id = 0;
  std::int64_t landmark_id = 0;
  Vec2 pixel = Vec2::Zero();
  Mat2 noise_cov = Mat2::Identity();
};

struct WindowLandmark {
  std::int64_t id = 0;
  Vec3 position = Vec3::Zero();
  Mat3 cov = Mat3::Identity();
};

struct WindowProblem {
  std::vector<KeyframeNode> keyframes;  // ascending id
  std::map<std::int64_t, WindowLandmark> landmarks;
  std::vector<ReprojectionFactor> reprojections;
  std::vector<PreintegrationFactor> preintegrations;
  std::vector<LidarPosePrior> pose_priors;

  Mat3 rot_imu_cam = Mat3::Identity();
  Vec3 pos_imu_cam = Vec3::Zero();
  Vec3 gravity_world = Vec3(0.0, 0.0, -9.81);
  CameraIntrinsics K;
};

struct WindowOptions {
  std::size_t window_size = 10;
  double prior_sigma_rot = 1e-2;  // rad
  double prior_sigma_pos = 1e-2;  // m
  double lambda_initial = 1e-4;
  double lambda_up = 10.0;
  double lambda_down = 0.5;
  int max_iterations = 20;
  /// Relative cost decrease below which an accepted step ends the solve.
  double relative_tolerance = 1e-10;
};

/// Everything the window needs about one keyframe at insertion time.
struct KeyframeInput {
  KeyframeNode node;
  bool lidar_constrained = false;
  /// IMU samples in [t_previous_keyframe, t). Empty for the first keyframe.
  std::vector<ImuSample> imu_since_previous;
  /// Preintegration of imu_since_previous up to node.t, linearized at the
  /// previous keyframe's biases. Recomputed by build_window when missing or
  /// when those biases moved by more than 1e-3.
  std::optional<PreintegratedImu> preint;
};

struct WindowContext {
  Mat3 rot_imu_cam = Mat3::Identity();
  Vec3 pos_imu_cam = Vec3::Zero();
  Vec3 gravity_world = Vec3(0.0, 0.0, -9.81);
  CameraIntrinsics K;
  NoiseParams imu_noise;
};

/// Assembles the window from keyframes (ascending id) and the landmark store.
/// Landmarks seen by fewer than two window keyframes are left out, as are
/// observations that fall behind the camera. If no keyframe is LiDAR
/// constrained, the oldest one receives the pose prior to fix the gauge.
WindowProblem build_window(std::span<const KeyframeInput> keyframes, const LandmarkStore& store,
                           const WindowContext& ctx, const WindowOptions& options = {});

/// Sum of squared whitened residuals over every factor. Returns +inf if a
/// landmark falls behind an observing camera.
double window_cost(const WindowProblem& problem);

struct OptimizeResult {
  std::vector<KeyframeNode> keyframes;
  std::map<std::int64_t, WindowLandmark> landmarks;  // refined, with marginal cov
  std::vector<double> cost_history;                  // initial cost, then each accepted step
  int iterations = 0;
  bool converged = false;
};

OptimizeResult optimize(const WindowProblem& problem, const WindowOptions& options = {});

/// Replaces position and covariance of every refined landmark still present
/// in `store`; landmarks evicted since the snapshot are skipped. Returns the
/// number merged.
std::size_t merge_back(const OptimizeResult& refined, LandmarkStore& store);

/// Keyframe bookkeeping for the estimator: keeps the newest `window_size`
/// keyframes.
class SlidingWindow {
 public:
  explicit SlidingWindow(WindowOptions options = {}) : options_(options) {}

  /// Preintegrates the new keyframe's IMU samples at the previous keyframe's
  /// biases and evicts the oldest keyframe beyond window_size.
  void add(KeyframeInput input, const NoiseParams& imu_noise);
  std::size_t size() const { return keyframes_.size(); }
  const std::deque<KeyframeInput>& keyframes() const { return keyframes_; }

  WindowProblem build(const LandmarkStore& store, const WindowContext& ctx) const;

 private:
  WindowOptions options_;
  std::deque<KeyframeInput> keyframes_;
};

}  // namespace livo
