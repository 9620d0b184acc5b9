#pragma once

// Point-to-plane LiDAR measurement model.

#include <span>
#include <stdexcept>
#include <vector>

#include "livo/point_map.hpp"
#include "livo/residual_block.hpp"
#include "livo/state.hpp"

namespace livo {

struct LidarPoint {
  Vec3 position_lidar = Vec3::Zero();
  Mat3 noise_cov = Mat3::Identity() * 0.02 * 0.02;
};

/// Motion-compensated planar feature points, all stamped at `t`.
struct LidarFrame {
  double t = 0.0;
  std::vector<LidarPoint> points;
};

struct PlaneFit {
  Vec3 normal = Vec3::UnitZ();  // unit length
  Vec3 point_on_plane = Vec3::Zero();
  double fit_rms = 0.0;
  double max_residual = 0.0;  // largest |distance| of a fitted point
};

class PlaneFitError : public std::runtime_error {
 public:
  enum class Kind { kInsufficientNeighbors, kDegenerate };
  PlaneFitError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

struct AssociationParams {
  std::size_t neighbors = 5;
  double max_neighbor_distance = 1.0;  // m
  double max_fit_residual = 0.05;      // m, every neighbor within this of the plane
};

enum class AssociationStatus {
  kAccepted,
  kNoAssociation,  // map holds fewer than `neighbors` points
  kTooFar,
  kBadFit,
  kDegenerate,
};

struct AssociationResult {
  AssociationStatus status = AssociationStatus::kNoAssociation;
  PlaneFit plane;

  bool accepted() const { return status == AssociationStatus::kAccepted; }
};

/// G_p = G_R_I (I_R_L L_p + I_p_L) + G_p_I.
Vec3 transform_to_world(const NavState& x, const FilterConfig& cfg, const LidarPoint& p);

/// Least-squares plane through at least 5 points: centroid plus the
/// smallest-eigenvalue eigenvector of the scatter matrix. The normal is
/// oriented so its largest-magnitude component is positive.
/// Throws PlaneFitError.
PlaneFit fit_plane(std::span<const Vec3> points);

/// Fits a plane to the k nearest map points around `world_point`.
AssociationResult associate(const PointMap& map, const Vec3& world_point,
                            const AssociationParams& params = {});

/// Signed point-to-plane distance u^T (G_p - q).
double lidar_residual(const NavState& x, const FilterConfig& cfg, const LidarPoint& p,
                      const PlaneFit& plane);

struct LidarJacobian {
  Eigen::Matrix<double, 1, kStateDim> H;
  double noise_var = 0.0;  // u^T F_p Sigma_n F_p^T u
};

LidarJacobian lidar_jacobian(const NavState& x, const FilterConfig& cfg, const LidarPoint& p,
                             const PlaneFit& plane);

/// Associates every point of `frame` at state `x` and linearizes the accepted
/// ones. Points without a valid plane are skipped.
std::vector<ResidualBlock> lidar_residual_blocks(const NavState& x, const FilterConfig& cfg,
                                                 std::span<const LidarPoint> points,
                                                 const PointMap& map,
                                                 const AssociationParams& params);

}  // namespace livo
