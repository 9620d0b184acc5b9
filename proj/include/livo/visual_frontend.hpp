#pragma once

// Pinhole reprojection measurement model and two-view triangulation.
//
// The world-to-camera map is taken literally from the filter's measurement
// equation:
//
//   C_P = (G_R_I I_R_C)^T G_P - I_R_C^T G_p_I - I_p_C
//
// i.e. an affine map C_P = M G_P + t with M = (G_R_I I_R_C)^T and
// t = -I_R_C^T G_p_I - I_p_C. CameraPose stores exactly (M, t) so the
// simulator, triangulation and the window optimizer all share one chain.

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "livo/residual_block.hpp"
#include "livo/state.hpp"

namespace livo {

struct CameraIntrinsics {
  double fx = 400.0;
  double fy = 400.0;
  double cx = 320.0;
  double cy = 240.0;
  int width = 640;
  int height = 480;

  bool valid() const;
  bool in_image(const Vec2& px) const;
};

struct FeatureObservation {
  std::int64_t feature_id = 0;
  Vec2 pixel = Vec2::Zero();
  Mat2 noise_cov = Mat2::Identity();
};

struct CameraFrame {
  double t = 0.0;
  std::vector<FeatureObservation> observations;
  bool is_keyframe = false;
};

struct Landmark {
  std::int64_t feature_id = 0;
  Vec3 position_world = Vec3::Zero();
  Mat3 cov = Mat3::Identity();
  std::vector<std::int64_t> observing_keyframes;
};

struct CameraPose {
  Mat3 rot_cam_world = Mat3::Identity();  // M
  Vec3 translation = Vec3::Zero();        // t

  Vec3 apply(const Vec3& p_world) const { return rot_cam_world * p_world + translation; }
  /// World point mapped to the camera origin.
  Vec3 center() const { return -rot_cam_world.transpose() * translation; }
};

CameraPose camera_pose(const NavState& x);

class BehindCameraError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr double kMinDepth = 1e-6;

/// Pinhole projection; throws BehindCameraError for z <= kMinDepth.
Vec2 project(const Vec3& p_cam, const CameraIntrinsics& K);

/// d project / d p_cam (2x3).
Mat23 projection_jacobian(const Vec3& p_cam, const CameraIntrinsics& K);

Vec3 world_to_camera(const NavState& x, const Vec3& p_world);

/// observed pixel - projection.
Vec2 reprojection_residual(const NavState& x, const FeatureObservation& obs, const Landmark& lm,
                           const CameraIntrinsics& K);

struct VisualJacobians {
  Eigen::Matrix<double, 2, kStateDim> H;  // d r_c / d dx
  Mat23 F_P;                              // d r_c / d G_P
  Mat2 noise_cov;                         // Sigma_n + F_P Sigma_P F_P^T
};

VisualJacobians visual_jacobians(const NavState& x, const FeatureObservation& obs,
                                 const Landmark& lm, const CameraIntrinsics& K);

ResidualBlock visual_residual_block(const NavState& x, const FeatureObservation& obs,
                                    const Landmark& lm, const CameraIntrinsics& K);

struct TriangulationParams {
  double min_baseline = 0.05;        // m, between camera centers
  double min_ray_angle_deg = 0.5;
  /// Landmark sigma = sigma_scale * depth^2 / baseline (isotropic).
  double sigma_scale = 0.005;
};

struct ViewObservation {
  CameraPose pose;
  Vec2 pixel;
};

struct TriangulatedPoint {
  Vec3 position_world;
  Mat3 cov;
};

class TriangulationError : public std::runtime_error {
 public:
  enum class Kind { kInsufficientBaseline, kDivergentRays };
  TriangulationError(Kind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

/// Linear least-squares intersection of the two back-projected rays.
TriangulatedPoint triangulate(const ViewObservation& a, const ViewObservation& b,
                              const CameraIntrinsics& K, const TriangulationParams& params = {});

}  // namespace livo
