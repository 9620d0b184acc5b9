#pragma once

// Full filter state, its 21-dim tangent error and the fixed configuration.

#include <Eigen/Core>

#include "livo/types.hpp"

namespace livo {

/// Offsets of each 3-vector block inside ErrorVector and every 21-column
/// Jacobian. This is the only place the ordering is defined.
namespace block {
inline constexpr int kRot = 0;        // G_R_I
inline constexpr int kPos = 3;        // G_p_I
inline constexpr int kExtRot = 6;     // I_R_C
inline constexpr int kExtPos = 9;     // I_p_C
inline constexpr int kVel = 12;       // G_v
inline constexpr int kBiasGyro = 15;  // b_g
inline constexpr int kBiasAccel = 18; // b_a
}  // namespace block

inline constexpr int kStateDim = 21;
inline constexpr int kNoiseDim = 12;

using ErrorVector = Eigen::Matrix<double, kStateDim, 1>;
using StateCovariance = Eigen::Matrix<double, kStateDim, kStateDim>;
using StateMatrix = Eigen::Matrix<double, kStateDim, kStateDim>;
using NoiseVector = Eigen::Matrix<double, kNoiseDim, 1>;
using NoiseCovariance = Eigen::Matrix<double, kNoiseDim, kNoiseDim>;

struct NavState {
  Mat3 rot_world_imu = Mat3::Identity();
  Vec3 pos_world_imu = Vec3::Zero();
  Mat3 rot_imu_cam = Mat3::Identity();
  Vec3 pos_imu_cam = Vec3::Zero();
  Vec3 vel_world = Vec3::Zero();
  Vec3 bias_gyro = Vec3::Zero();
  Vec3 bias_accel = Vec3::Zero();

  bool all_finite() const;
};

/// Blockwise x [+] delta; rotations are perturbed on the right.
NavState state_boxplus(const NavState& x, const ErrorVector& delta);

/// x1 [-] x2, the inverse of state_boxplus.
ErrorVector state_boxminus(const NavState& x1, const NavState& x2);

struct ImuSample {
  double t = 0.0;
  Vec3 gyro = Vec3::Zero();   // rad/s
  Vec3 accel = Vec3::Zero();  // m/s^2, specific force
};

/// Per-sample standard deviations of the IMU noise w = (n_g, n_a, n_bg, n_ba).
struct NoiseParams {
  double sigma_gyro = 0.005;
  double sigma_accel = 0.05;
  double sigma_bias_gyro_walk = 1e-4;
  double sigma_bias_accel_walk = 1e-3;

  /// Diagonal 12x12 Q in the order of w.
  NoiseCovariance process_noise() const;
};

struct FilterConfig {
  Vec3 gravity_world = Vec3(0.0, 0.0, -9.81);
  Mat3 rot_imu_lidar = Mat3::Identity();
  Vec3 pos_imu_lidar = Vec3::Zero();
  int max_update_iterations = 5;
  double convergence_threshold = 1e-6;
  double imu_rate_hz = 200.0;
  double camera_rate_hz = 20.0;
  double lidar_rate_hz = 10.0;
  /// Hold the mean of the two samples bounding each IMU interval instead of
  /// the earlier one.
  bool average_imu_interval = true;
};

/// Standard deviations of the diagonal initial covariance.
struct InitialUncertainty {
  double rotation = 1e-2;
  double position = 1e-2;
  double extrinsic_rotation = 1e-4;
  double extrinsic_position = 1e-4;
  double velocity = 1e-1;
  double bias_gyro = 1e-3;
  double bias_accel = 1e-3;

  StateCovariance covariance() const;
};

/// (S + S^T) / 2.
StateCovariance symmetrize(const StateCovariance& S);

struct CovarianceHealth {
  double asymmetry = 0.0;       // max |S - S^T|
  double min_eigenvalue = 0.0;  // of the symmetric part

  bool healthy(double tolerance = 1e-9) const {
    return asymmetry < tolerance && min_eigenvalue > -tolerance;
  }
};

CovarianceHealth covariance_health(const StateCovariance& S);

}  // namespace livo
