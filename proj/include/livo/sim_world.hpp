#pragma once

// Deterministic synthetic room world and sensor streams.
//
// The world is an axis-aligned box room; its six faces are the LiDAR planes
// and visual landmarks are scattered on them. Trajectories are analytic so
// IMU readings come from exact derivatives. Every noise draw comes from a
// generator seeded by (seed, sensor, sample index), so dropping frames in a
// blackout does not shift any other sensor's noise.

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Geometry>

#include "livo/lidar_frontend.hpp"
#include "livo/state.hpp"
#include "livo/visual_frontend.hpp"

namespace livo {

enum class TrajectoryKind { kStationary, kCircle, kFigureEight, kAggressiveSinusoid };

std::string to_string(TrajectoryKind kind);
/// Accepts "stationary", "circle", "figure-eight", "aggressive-sinusoid".
/// Throws ContractViolation otherwise.
TrajectoryKind trajectory_kind_from_string(const std::string& name);

struct TrajectorySpec {
  TrajectoryKind kind = TrajectoryKind::kCircle;
  double amplitude = 4.0;      // m
  double angular_rate = 0.5;   // rad/s, base angular frequency of the path
  double duration = 10.0;      // s
  Vec3 center = Vec3::Zero();  // m
  double yaw_amplitude = 0.6;  // rad, aggressive spec only
  double yaw_frequency = 1.4;  // Hz, aggressive spec only
};

struct TrajectoryPoint {
  Mat3 rot = Mat3::Identity();  // G_R_I
  Vec3 pos = Vec3::Zero();
  Vec3 vel = Vec3::Zero();
  Vec3 acc = Vec3::Zero();        // world frame
  Vec3 omega_body = Vec3::Zero();  // I frame
};

TrajectoryPoint evaluate_trajectory(const TrajectorySpec& spec, double t);

/// Rectangle n^T x = offset spanned by center + a*axis_u + b*axis_v with
/// |a| <= half_u, |b| <= half_v.
struct Plane {
  Vec3 normal;
  double offset = 0.0;
  Vec3 center;
  Vec3 axis_u;
  Vec3 axis_v;
  double half_u = 0.0;
  double half_v = 0.0;
};

struct WorldSpec {
  Vec3 room_min = Vec3(-10.0, -8.0, -1.5);
  Vec3 room_max = Vec3(10.0, 8.0, 2.5);
  int wall_landmarks = 800;
  int floor_landmarks = 200;
  int ceiling_landmarks = 200;
};

struct WorldModel {
  std::vector<Plane> planes;
  std::vector<Vec3> landmarks;  // index == feature id
};

WorldModel make_room_world(const WorldSpec& spec, std::uint64_t seed);

struct Interval {
  double start = 0.0;
  double end = 0.0;
  bool contains(double t) const { return t >= start && t <= end; }
};

struct BlackoutSchedule {
  std::vector<Interval> camera;
  std::vector<Interval> lidar;

  bool camera_blocked(double t) const;
  bool lidar_blocked(double t) const;
};

struct SimConfig {
  TrajectorySpec trajectory;
  WorldSpec world;
  NoiseParams imu_noise;
  Vec3 initial_bias_gyro = Vec3::Zero();
  Vec3 initial_bias_accel = Vec3::Zero();
  Vec3 gravity_world = Vec3(0.0, 0.0, -9.81);
  double imu_rate_hz = 200.0;
  double lidar_rate_hz = 10.0;
  double camera_rate_hz = 20.0;

  double lidar_sigma = 0.02;  // m
  int lidar_points_per_plane = 100;
  double lidar_fov_deg = 70.0;  // full cone angle around LiDAR +x
  double min_range = 0.5;
  double max_range = 50.0;
  Mat3 rot_imu_lidar = Mat3::Identity();
  Vec3 pos_imu_lidar = Vec3::Zero();

  double pixel_sigma = 1.0;
  double camera_fov_deg = 80.0;  // full cone angle around the optical axis
  CameraIntrinsics K;
  Mat3 rot_imu_cam = default_rot_imu_cam();
  Vec3 pos_imu_cam = Vec3(0.05, 0.0, 0.02);

  BlackoutSchedule blackout;
  std::uint64_t seed = 1;

  /// Camera looks along body +x with image x to the body's right.
  static Mat3 default_rot_imu_cam();
};

/// Orientation is kept as the quaternion that goes into the dataset file so
/// that write/read round trips are exact.
struct GroundTruthSample {
  double t = 0.0;
  Eigen::Quaterniond quat = Eigen::Quaterniond::Identity();  // G_R_I
  Vec3 pos = Vec3::Zero();
  Vec3 vel = Vec3::Zero();

  Mat3 rot() const { return quat.toRotationMatrix(); }
};

struct SensorStreams {
  std::vector<ImuSample> imu;
  std::vector<LidarFrame> lidar;
  std::vector<CameraFrame> camera;
  std::vector<GroundTruthSample> ground_truth;
};

/// Sample timestamps i / rate for i = 0 .. floor(duration * rate).
std::vector<double> sample_times(double duration, double rate_hz);

std::vector<ImuSample> synthesize_imu(const SimConfig& cfg);
std::vector<LidarFrame> synthesize_lidar(const SimConfig& cfg, const WorldModel& world);
std::vector<CameraFrame> synthesize_camera(const SimConfig& cfg, const WorldModel& world);
std::vector<GroundTruthSample> ground_truth(const SimConfig& cfg);

/// The full dataset: world from the seed, then all four streams.
SensorStreams simulate(const SimConfig& cfg);

/// Peak |omega| over the trajectory sampled at the IMU rate.
double peak_angular_rate(const TrajectorySpec& spec, double rate_hz = 200.0);

}  // namespace livo
