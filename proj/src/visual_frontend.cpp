#include "livo/visual_frontend.hpp"

#include <Eigen/QR>
#include <algorithm>
#include <cmath>
#include <numbers>

#include "livo/manifold.hpp"

namespace livo {

bool CameraIntrinsics::valid() const {
  return fx > 0.0 && fy > 0.0 && width > 0 && height > 0 && cx >= 0.0 && cx <= width &&
         cy >= 0.0 && cy <= height;
}

bool CameraIntrinsics::in_image(const Vec2& px) const {
  return px.x() >= 0.0 && px.y() >= 0.0 && px.x() <= width && px.y() <= height;
}

CameraPose camera_pose(const NavState& x) {
  CameraPose pose;
  pose.rot_cam_world = (x.rot_world_imu * x.rot_imu_cam).transpose();
  pose.translation = -x.rot_imu_cam.transpose() * x.pos_world_imu - x.pos_imu_cam;
  return pose;
}

Vec2 project(const Vec3& p_cam, const CameraIntrinsics& K) {
  if (!(p_cam.z() > kMinDepth)) {
    throw BehindCameraError("project: point is behind the camera (z = " +
                            std::to_string(p_cam.z()) + ")");
  }
  return Vec2(K.fx * p_cam.x() / p_cam.z() + K.cx, K.fy * p_cam.y() / p_cam.z() + K.cy);
}

Mat23 projection_jacobian(const Vec3& p_cam, const CameraIntrinsics& K) {
  const double iz = 1.0 / p_cam.z();
  Mat23 J;
  J << K.fx * iz, 0.0, -K.fx * p_cam.x() * iz * iz,
       0.0, K.fy * iz, -K.fy * p_cam.y() * iz * iz;
  return J;
}

Vec3 world_to_camera(const NavState& x, const Vec3& p_world) {
  return (x.rot_world_imu * x.rot_imu_cam).transpose() * p_world -
         x.rot_imu_cam.transpose() * x.pos_world_imu - x.pos_imu_cam;
}

Vec2 reprojection_residual(const NavState& x, const FeatureObservation& obs, const Landmark& lm,
                           const CameraIntrinsics& K) {
  return obs.pixel - project(world_to_camera(x, lm.position_world), K);
}

VisualJacobians visual_jacobians(const NavState& x, const FeatureObservation& obs,
                                 const Landmark& lm, const CameraIntrinsics& K) {
  const Vec3 p_cam = world_to_camera(x, lm.position_world);
  if (!(p_cam.z() > kMinDepth)) {
    throw BehindCameraError("visual_jacobians: landmark behind the camera");
  }
  const Mat23 F_A = projection_jacobian(p_cam, K);
  const Mat3& R_I = x.rot_world_imu;
  const Mat3& R_C = x.rot_imu_cam;
  const Vec3& P = lm.position_world;

  Eigen::Matrix<double, 3, kStateDim> F_B = Eigen::Matrix<double, 3, kStateDim>::Zero();
  F_B.block<3, 3>(0, block::kRot) = R_C.transpose() * skew(R_I.transpose() * P);
  F_B.block<3, 3>(0, block::kPos) = -R_C.transpose();
  F_B.block<3, 3>(0, block::kExtRot) =
      skew((R_I * R_C).transpose() * P) - skew(R_C.transpose() * x.pos_world_imu);
  F_B.block<3, 3>(0, block::kExtPos) = -Mat3::Identity();

  const Mat3 F_C = (R_I * R_C).transpose();

  VisualJacobians J;
  J.H = -F_A * F_B;
  J.F_P = -F_A * F_C;
  J.noise_cov = obs.noise_cov + J.F_P * lm.cov * J.F_P.transpose();
  return J;
}

ResidualBlock visual_residual_block(const NavState& x, const FeatureObservation& obs,
                                    const Landmark& lm, const CameraIntrinsics& K) {
  const VisualJacobians J = visual_jacobians(x, obs, lm, K);
  ResidualBlock b;
  b.kind = MeasurementKind::kVisual;
  b.residual = reprojection_residual(x, obs, lm, K);
  b.jacobian = J.H;
  b.noise_cov = J.noise_cov;
  return b;
}

TriangulatedPoint triangulate(const ViewObservation& a, const ViewObservation& b,
                              const CameraIntrinsics& K, const TriangulationParams& params) {
  const double baseline = (a.pose.center() - b.pose.center()).norm();
  if (!(baseline > params.min_baseline)) {
    throw TriangulationError(TriangulationError::Kind::kInsufficientBaseline,
                             "triangulate: baseline " + std::to_string(baseline) +
                                 " m below minimum");
  }

  auto bearing = [&](const Vec2& px) {
    return Vec3((px.x() - K.cx) / K.fx, (px.y() - K.cy) / K.fy, 1.0);
  };
  const Vec3 ba = bearing(a.pixel);
  const Vec3 bb = bearing(b.pixel);
  const Vec3 ray_a = a.pose.rot_cam_world.transpose() * ba.normalized();
  const Vec3 ray_b = b.pose.rot_cam_world.transpose() * bb.normalized();
  const double angle = std::acos(std::clamp(ray_a.dot(ray_b), -1.0, 1.0));
  if (angle < params.min_ray_angle_deg * std::numbers::pi / 180.0) {
    throw TriangulationError(TriangulationError::Kind::kInsufficientBaseline,
                             "triangulate: rays are parallel within tolerance");
  }

  // Each view contributes x/z = bx and y/z = by, linear in the world point.
  Eigen::Matrix<double, 4, 3> A;
  Eigen::Matrix<double, 4, 1> rhs;
  auto add_rows = [&](int row, const CameraPose& pose, const Vec3& bearing_cam) {
    const Mat3& M = pose.rot_cam_world;
    const Vec3& t = pose.translation;
    A.row(row) = M.row(0) - bearing_cam.x() * M.row(2);
    rhs[row] = bearing_cam.x() * t.z() - t.x();
    A.row(row + 1) = M.row(1) - bearing_cam.y() * M.row(2);
    rhs[row + 1] = bearing_cam.y() * t.z() - t.y();
  };
  add_rows(0, a.pose, ba);
  add_rows(2, b.pose, bb);
  const Vec3 p = A.colPivHouseholderQr().solve(rhs);

  const double depth_a = a.pose.apply(p).z();
  const double depth_b = b.pose.apply(p).z();
  if (!(depth_a > kMinDepth) || !(depth_b > kMinDepth) || !p.allFinite()) {
    throw TriangulationError(TriangulationError::Kind::kDivergentRays,
                             "triangulate: intersection lies behind a camera");
  }

  const double depth = 0.5 * (depth_a + depth_b);
  const double sigma = params.sigma_scale * depth * depth / baseline;
  return TriangulatedPoint{p, Mat3::Identity() * sigma * sigma};
}

}  // namespace livo
