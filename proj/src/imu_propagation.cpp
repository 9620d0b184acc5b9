#include "livo/imu_propagation.hpp"

#include <cmath>

#include "livo/errors.hpp"
#include "livo/manifold.hpp"

namespace livo {

ErrorVector process_model(const NavState& x, const ImuSample& u, const NoiseVector& w,
                          double dt, const Vec3& gravity_world) {
  const Vec3 n_g = w.segment<3>(0);
  const Vec3 n_a = w.segment<3>(3);
  const Vec3 n_bg = w.segment<3>(6);
  const Vec3 n_ba = w.segment<3>(9);

  ErrorVector f = ErrorVector::Zero();
  f.segment<3>(block::kRot) = u.gyro - x.bias_gyro - n_g;
  f.segment<3>(block::kPos) = x.vel_world;
  f.segment<3>(block::kVel) = x.rot_world_imu * (u.accel - x.bias_accel - n_a) + gravity_world;
  f.segment<3>(block::kBiasGyro) = n_bg;
  f.segment<3>(block::kBiasAccel) = n_ba;
  return dt * f;
}

NavState propagate_state(const NavState& x, const ImuSample& u, double dt,
                         const Vec3& gravity_world) {
  if (!(dt > 0.0) || dt > 0.1) {
    throw ContractViolation("propagate_state: dt must lie in (0, 0.1], got " + std::to_string(dt));
  }
  if (!x.all_finite() || !u.gyro.allFinite() || !u.accel.allFinite()) {
    throw ContractViolation("propagate_state: non-finite state or IMU sample");
  }
  NavState out =
      state_boxplus(x, process_model(x, u, NoiseVector::Zero(), dt, gravity_world));
  out.rot_world_imu = normalize_rotation(out.rot_world_imu);
  return out;
}

ProcessJacobians error_jacobians(const NavState& x, const ImuSample& u, double dt) {
  const Vec3 omega = u.gyro - x.bias_gyro;
  const Vec3 acc = u.accel - x.bias_accel;
  const Mat3& R = x.rot_world_imu;
  const Mat3 I = Mat3::Identity();
  // The bias/noise term enters the rotation as Exp(w dt - (db + n) dt), so
  // its linearization carries J_r(w dt) * dt.
  const Mat3 Jr_dt = right_jacobian(omega * dt) * dt;

  ProcessJacobians J;
  J.F_x.setIdentity();
  J.F_x.block<3, 3>(block::kRot, block::kRot) = exp_so3(-omega * dt);
  J.F_x.block<3, 3>(block::kRot, block::kBiasGyro) = -Jr_dt;
  J.F_x.block<3, 3>(block::kPos, block::kVel) = I * dt;
  J.F_x.block<3, 3>(block::kVel, block::kRot) = -R * skew(acc) * dt;
  J.F_x.block<3, 3>(block::kVel, block::kBiasAccel) = -R * dt;

  J.F_w.setZero();
  J.F_w.block<3, 3>(block::kRot, 0) = -Jr_dt;
  J.F_w.block<3, 3>(block::kVel, 3) = -R * dt;
  J.F_w.block<3, 3>(block::kBiasGyro, 6) = I * dt;
  J.F_w.block<3, 3>(block::kBiasAccel, 9) = I * dt;
  return J;
}

StateCovariance propagate_covariance(const StateCovariance& S, const StateMatrix& F_x,
                                     const Eigen::Matrix<double, kStateDim, kNoiseDim>& F_w,
                                     const NoiseCovariance& Q) {
  return symmetrize(F_x * S * F_x.transpose() + F_w * Q * F_w.transpose());
}

}  // namespace livo
