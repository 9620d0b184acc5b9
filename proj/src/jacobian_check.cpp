#include "livo/jacobian_check.hpp"

#include <algorithm>
#include <random>

#include "livo/ieskf.hpp"
#include "livo/imu_propagation.hpp"
#include "livo/lidar_frontend.hpp"
#include "livo/manifold.hpp"
#include "livo/visual_frontend.hpp"

namespace livo {

double relative_error(const Eigen::MatrixXd& analytic, const Eigen::MatrixXd& numeric) {
  const double scale = std::max(numeric.cwiseAbs().maxCoeff(), 1e-9);
  return (analytic - numeric).cwiseAbs().maxCoeff() / scale;
}

Eigen::MatrixXd numerical_jacobian(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& f,
                                   Eigen::Index input_dim, double step) {
  const Eigen::VectorXd f0 = f(Eigen::VectorXd::Zero(input_dim));
  Eigen::MatrixXd J(f0.size(), input_dim);
  for (Eigen::Index i = 0; i < input_dim; ++i) {
    Eigen::VectorXd d = Eigen::VectorXd::Zero(input_dim);
    d[i] = step;
    J.col(i) = (f(d) - f(-d)) / (2.0 * step);
  }
  return J;
}

namespace {

class Sampler {
 public:
  explicit Sampler(std::uint64_t seed) : rng_(seed) {}

  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
  Vec3 vec(double half) { return Vec3(uniform(-half, half), uniform(-half, half), uniform(-half, half)); }

  Mat3 rotation() {
    Vec3 axis = vec(1.0);
    while (axis.norm() < 1e-3) axis = vec(1.0);
    return exp_so3(axis.normalized() * uniform(0.0, 3.0));
  }

  NavState state() {
    NavState x;
    x.rot_world_imu = rotation();
    x.pos_world_imu = vec(5.0);
    x.rot_imu_cam = rotation();
    x.pos_imu_cam = vec(0.2);
    x.vel_world = vec(3.0);
    x.bias_gyro = vec(0.05);
    x.bias_accel = vec(0.2);
    return x;
  }

 private:
  std::mt19937_64 rng_;
};

ErrorVector as_error(const Eigen::VectorXd& d) { return ErrorVector(d); }

}  // namespace

std::vector<JacobianReport> run_jacobian_suites(int instances, std::uint64_t seed, double step) {
  Sampler s(seed);
  const Vec3 g(0.0, 0.0, -9.81);
  JacobianReport fx{"F_x (process, error state)", instances, 0.0};
  JacobianReport fw{"F_w (process, noise)", instances, 0.0};
  JacobianReport hcal{"prior transform", instances, 0.0};
  JacobianReport hl{"H_l (point-to-plane)", instances, 0.0};
  JacobianReport hc{"H_c (reprojection, state)", instances, 0.0};
  JacobianReport fp{"F_P (reprojection, landmark)", instances, 0.0};

  for (int n = 0; n < instances; ++n) {
    // Process model.
    {
      const NavState x = s.state();
      ImuSample u;
      u.gyro = s.vec(3.0);
      u.accel = s.vec(10.0);
      const double dt = s.uniform(1e-3, 0.1);
      auto step_state = [&](const NavState& xi, const NoiseVector& w) {
        return state_boxplus(xi, process_model(xi, u, w, dt, g));
      };
      const NavState x_next = step_state(x, NoiseVector::Zero());
      const ProcessJacobians J = error_jacobians(x, u, dt);

      const Eigen::MatrixXd num_x = numerical_jacobian(
          [&](const Eigen::VectorXd& d) -> Eigen::VectorXd {
            return state_boxminus(step_state(state_boxplus(x, as_error(d)), NoiseVector::Zero()),
                                  x_next);
          },
          kStateDim, step);
      fx.max_relative_error = std::max(fx.max_relative_error, relative_error(J.F_x, num_x));

      const Eigen::MatrixXd num_w = numerical_jacobian(
          [&](const Eigen::VectorXd& w) -> Eigen::VectorXd {
            return state_boxminus(step_state(x, NoiseVector(w)), x_next);
          },
          kNoiseDim, step);
      fw.max_relative_error = std::max(fw.max_relative_error, relative_error(J.F_w, num_w));
    }

    // Prior transform: d/d delta of (x_check [+] delta) [-] x_hat.
    {
      const NavState x_hat = s.state();
      ErrorVector offset = ErrorVector::Zero();
      offset.segment<3>(block::kRot) = s.vec(0.8);
      offset.segment<3>(block::kExtRot) = s.vec(0.8);
      offset.segment<3>(block::kPos) = s.vec(0.5);
      const NavState x_check = state_boxplus(x_hat, offset);
      const PriorTransform T = prior_transform(x_check, x_hat);
      const Eigen::MatrixXd num = numerical_jacobian(
          [&](const Eigen::VectorXd& d) -> Eigen::VectorXd {
            return state_boxminus(state_boxplus(x_check, as_error(d)), x_hat);
          },
          kStateDim, step);
      hcal.max_relative_error = std::max(hcal.max_relative_error, relative_error(T.H_cal, num));
    }

    // LiDAR point-to-plane.
    {
      const NavState x = s.state();
      FilterConfig cfg;
      cfg.rot_imu_lidar = s.rotation();
      cfg.pos_imu_lidar = s.vec(0.3);
      LidarPoint p;
      p.position_lidar = s.vec(10.0);
      PlaneFit plane;
      plane.normal = s.vec(1.0).normalized();
      plane.point_on_plane = transform_to_world(x, cfg, p) + s.vec(0.3);
      const LidarJacobian J = lidar_jacobian(x, cfg, p, plane);
      const Eigen::MatrixXd num = numerical_jacobian(
          [&](const Eigen::VectorXd& d) -> Eigen::VectorXd {
            return Eigen::VectorXd::Constant(
                1, lidar_residual(state_boxplus(x, as_error(d)), cfg, p, plane));
          },
          kStateDim, step);
      hl.max_relative_error = std::max(hl.max_relative_error, relative_error(J.H, num));
    }

    // Camera reprojection; the landmark is placed in front of the camera.
    {
      const NavState x = s.state();
      CameraIntrinsics K;
      const CameraPose cam = camera_pose(x);
      const Vec3 p_cam(s.uniform(-2.0, 2.0), s.uniform(-1.5, 1.5), s.uniform(2.0, 12.0));
      Landmark lm;
      lm.feature_id = n;
      lm.position_world = cam.rot_cam_world.transpose() * (p_cam - cam.translation);
      lm.cov = Mat3::Identity() * 0.01;
      FeatureObservation obs;
      obs.feature_id = n;
      obs.pixel = project(p_cam, K) + Vec2(s.uniform(-3, 3), s.uniform(-3, 3));

      const VisualJacobians J = visual_jacobians(x, obs, lm, K);
      const Eigen::MatrixXd num_x = numerical_jacobian(
          [&](const Eigen::VectorXd& d) -> Eigen::VectorXd {
            return reprojection_residual(state_boxplus(x, as_error(d)), obs, lm, K);
          },
          kStateDim, step);
      hc.max_relative_error = std::max(hc.max_relative_error, relative_error(J.H, num_x));

      const Eigen::MatrixXd num_p = numerical_jacobian(
          [&](const Eigen::VectorXd& d) -> Eigen::VectorXd {
            Landmark moved = lm;
            moved.position_world += Vec3(d);
            return reprojection_residual(x, obs, moved, K);
          },
          3, step);
      fp.max_relative_error = std::max(fp.max_relative_error, relative_error(J.F_P, num_p));
    }
  }
  return {fx, fw, hcal, hl, hc, fp};
}

}  // namespace livo
