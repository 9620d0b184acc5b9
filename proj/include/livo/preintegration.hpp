#pragma once

// IMU preintegration between two keyframes.
//
// Increments are expressed in the body frame of the first keyframe and do
// not depend on its global pose or on gravity:
//
//   R_j = R_i dR
//   v_j = v_i + g dt + R_i dv
//   p_j = p_i + v_i dt + 1/2 g dt^2 + R_i dp

#include <optional>
#include <span>

#include <Eigen/Core>

#include "livo/state.hpp"

namespace livo {

using Mat9 = Eigen::Matrix<double, 9, 9>;

struct PreintegratedImu {
  Mat3 delta_rot = Mat3::Identity();
  Vec3 delta_vel = Vec3::Zero();
  Vec3 delta_pos = Vec3::Zero();
  double duration = 0.0;
  Mat9 noise_cov = Mat9::Zero();  // order (dtheta, dv, dp)
  Vec3 bias_gyro = Vec3::Zero();  // linearization point
  Vec3 bias_accel = Vec3::Zero();
};

/// Midpoint integration of `samples`. Sample k covers [t_k, t_{k+1}); the
/// last one is held until `t_end` (default: its own timestamp, i.e. it only
/// contributes as the right end of the previous interval).
/// Throws ContractViolation on an empty list or non-increasing timestamps.
PreintegratedImu preintegrate(std::span<const ImuSample> samples, const Vec3& bias_gyro,
                              const Vec3& bias_accel, const NoiseParams& noise,
                              std::optional<double> t_end = std::nullopt);

/// a then b, where b starts where a ends. Noise is propagated as well.
PreintegratedImu compose(const PreintegratedImu& a, const PreintegratedImu& b);

/// True when the stored linearization biases differ from the given ones by
/// more than `tolerance` in any component.
bool needs_repreintegration(const PreintegratedImu& p, const Vec3& bias_gyro,
                            const Vec3& bias_accel, double tolerance = 1e-3);

}  // namespace livo
