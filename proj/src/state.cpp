#include "livo/state.hpp"

#include <Eigen/Eigenvalues>

#include "livo/manifold.hpp"

namespace livo {

bool NavState::all_finite() const {
  return rot_world_imu.allFinite() && pos_world_imu.allFinite() && rot_imu_cam.allFinite() &&
         pos_imu_cam.allFinite() && vel_world.allFinite() && bias_gyro.allFinite() &&
         bias_accel.allFinite();
}

NavState state_boxplus(const NavState& x, const ErrorVector& d) {
  NavState out;
  out.rot_world_imu = x.rot_world_imu * exp_so3(d.segment<3>(block::kRot));
  out.pos_world_imu = x.pos_world_imu + d.segment<3>(block::kPos);
  out.rot_imu_cam = x.rot_imu_cam * exp_so3(d.segment<3>(block::kExtRot));
  out.pos_imu_cam = x.pos_imu_cam + d.segment<3>(block::kExtPos);
  out.vel_world = x.vel_world + d.segment<3>(block::kVel);
  out.bias_gyro = x.bias_gyro + d.segment<3>(block::kBiasGyro);
  out.bias_accel = x.bias_accel + d.segment<3>(block::kBiasAccel);
  return out;
}

ErrorVector state_boxminus(const NavState& x1, const NavState& x2) {
  ErrorVector d;
  d.segment<3>(block::kRot) = log_so3(x2.rot_world_imu.transpose() * x1.rot_world_imu);
  d.segment<3>(block::kPos) = x1.pos_world_imu - x2.pos_world_imu;
  d.segment<3>(block::kExtRot) = log_so3(x2.rot_imu_cam.transpose() * x1.rot_imu_cam);
  d.segment<3>(block::kExtPos) = x1.pos_imu_cam - x2.pos_imu_cam;
  d.segment<3>(block::kVel) = x1.vel_world - x2.vel_world;
  d.segment<3>(block::kBiasGyro) = x1.bias_gyro - x2.bias_gyro;
  d.segment<3>(block::kBiasAccel) = x1.bias_accel - x2.bias_accel;
  return d;
}

NoiseCovariance NoiseParams::process_noise() const {
  NoiseVector diag;
  diag << Vec3::Constant(sigma_gyro * sigma_gyro), Vec3::Constant(sigma_accel * sigma_accel),
      Vec3::Constant(sigma_bias_gyro_walk * sigma_bias_gyro_walk),
      Vec3::Constant(sigma_bias_accel_walk * sigma_bias_accel_walk);
  return diag.asDiagonal();
}

StateCovariance InitialUncertainty::covariance() const {
  ErrorVector sd;
  sd << Vec3::Constant(rotation), Vec3::Constant(position), Vec3::Constant(extrinsic_rotation),
      Vec3::Constant(extrinsic_position), Vec3::Constant(velocity), Vec3::Constant(bias_gyro),
      Vec3::Constant(bias_accel);
  return sd.cwiseProduct(sd).asDiagonal();
}

StateCovariance symmetrize(const StateCovariance& S) { return 0.5 * (S + S.transpose()); }

CovarianceHealth covariance_health(const StateCovariance& S) {
  CovarianceHealth h;
  h.asymmetry = (S - S.transpose()).cwiseAbs().maxCoeff();
  Eigen::SelfAdjointEigenSolver<StateCovariance> es(symmetrize(S), Eigen::EigenvaluesOnly);
  h.min_eigenvalue = es.eigenvalues().minCoeff();
  return h;
}

}  // namespace livo
