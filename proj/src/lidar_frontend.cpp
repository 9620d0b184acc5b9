#include "livo/lidar_frontend.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <optional>

#include "livo/manifold.hpp"

namespace livo {

namespace {

constexpr std::size_t kMinPlanePoints = 5;

// Returns nullopt for a rank-deficient point set.
std::optional<PlaneFit> fit_plane_impl(std::span<const Vec3> points) {
  Vec3 centroid = Vec3::Zero();
  for (const Vec3& p : points) centroid += p;
  centroid /= static_cast<double>(points.size());

  Mat3 scatter = Mat3::Zero();
  for (const Vec3& p : points) scatter += (p - centroid) * (p - centroid).transpose();

  Eigen::SelfAdjointEigenSolver<Mat3> es(scatter);
  const Vec3 ev = es.eigenvalues();  // ascending
  if (!(ev[2] > 0.0) || ev[1] <= 1e-10 * ev[2]) return std::nullopt;

  PlaneFit fit;
  fit.normal = es.eigenvectors().col(0).normalized();
  Eigen::Index k = 0;
  fit.normal.cwiseAbs().maxCoeff(&k);
  if (fit.normal[k] < 0.0) fit.normal = -fit.normal;
  fit.point_on_plane = centroid;

  double sq = 0.0;
  for (const Vec3& p : points) {
    const double d = fit.normal.dot(p - centroid);
    sq += d * d;
    fit.max_residual = std::max(fit.max_residual, std::abs(d));
  }
  fit.fit_rms = std::sqrt(sq / static_cast<double>(points.size()));
  return fit;
}

}  // namespace

Vec3 transform_to_world(const NavState& x, const FilterConfig& cfg, const LidarPoint& p) {
  return x.rot_world_imu * (cfg.rot_imu_lidar * p.position_lidar + cfg.pos_imu_lidar) +
         x.pos_world_imu;
}

PlaneFit fit_plane(std::span<const Vec3> points) {
  if (points.size() < kMinPlanePoints) {
    throw PlaneFitError(PlaneFitError::Kind::kInsufficientNeighbors,
                        "fit_plane: need at least 5 points, got " +
                            std::to_string(points.size()));
  }
  auto fit = fit_plane_impl(points);
  if (!fit) {
    throw PlaneFitError(PlaneFitError::Kind::kDegenerate,
                        "fit_plane: points do not span a plane");
  }
  return *fit;
}

AssociationResult associate(const PointMap& map, const Vec3& world_point,
                            const AssociationParams& params) {
  AssociationResult result;
  const std::size_t k = std::max(params.neighbors, kMinPlanePoints);
  if (map.size() < k) return result;

  const auto nn = map.knn(world_point, k);
  if (nn.size() < k) return result;
  if (nn.back().sq_distance > params.max_neighbor_distance * params.max_neighbor_distance) {
    result.status = AssociationStatus::kTooFar;
    return result;
  }

  std::vector<Vec3> neighbors;
  neighbors.reserve(k);
  for (const auto& n : nn) neighbors.push_back(map.points()[n.index]);
  auto fit = fit_plane_impl(neighbors);
  if (!fit) {
    result.status = AssociationStatus::kDegenerate;
    return result;
  }
  if (fit->max_residual > params.max_fit_residual) {
    result.status = AssociationStatus::kBadFit;
    return result;
  }
  result.status = AssociationStatus::kAccepted;
  result.plane = *fit;
  return result;
}

double lidar_residual(const NavState& x, const FilterConfig& cfg, const LidarPoint& p,
                      const PlaneFit& plane) {
  return plane.normal.dot(transform_to_world(x, cfg, p) - plane.point_on_plane);
}

LidarJacobian lidar_jacobian(const NavState& x, const FilterConfig& cfg, const LidarPoint& p,
                             const PlaneFit& plane) {
  const Vec3 p_imu = cfg.rot_imu_lidar * p.position_lidar + cfg.pos_imu_lidar;
  const Eigen::RowVector3d u = plane.normal.transpose();

  LidarJacobian J;
  J.H.setZero();
  J.H.segment<3>(block::kRot) = -u * x.rot_world_imu * skew(p_imu);
  J.H.segment<3>(block::kPos) = u;

  // d r_l / d L_p = u^T G_R_I I_R_L
  const Eigen::RowVector3d F_p = u * x.rot_world_imu * cfg.rot_imu_lidar;
  J.noise_var = F_p * p.noise_cov * F_p.transpose();
  return J;
}

std::vector<ResidualBlock> lidar_residual_blocks(const NavState& x, const FilterConfig& cfg,
                                                 std::span<const LidarPoint> points,
                                                 const PointMap& map,
                                                 const AssociationParams& params) {
  std::vector<ResidualBlock> blocks;
  blocks.reserve(points.size());
  for (const LidarPoint& p : points) {
    const AssociationResult assoc = associate(map, transform_to_world(x, cfg, p), params);
    if (!assoc.accepted()) continue;
    const LidarJacobian J = lidar_jacobian(x, cfg, p, assoc.plane);
    ResidualBlock b;
    b.kind = MeasurementKind::kLidar;
    b.residual.resize(1);
    b.residual[0] = lidar_residual(x, cfg, p, assoc.plane);
    b.jacobian = J.H;
    b.noise_cov.resize(1, 1);
    b.noise_cov(0, 0) = J.noise_var;
    blocks.push_back(std::move(b));
  }
  return blocks;
}

}  // namespace livo
