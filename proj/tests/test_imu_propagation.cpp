#include <gtest/gtest.h>

#include <random>

#include "livo/errors.hpp"
#include "livo/imu_propagation.hpp"
#include "livo/jacobian_check.hpp"
#include "livo/manifold.hpp"

using namespace livo;

namespace {

const Vec3 kGravity(0.0, 0.0, -9.81);

// Second evaluator of dt * f written directly from the kinematic model.
ErrorVector reference_f(const NavState& x, const ImuSample& u, const NoiseVector& w, double dt) {
  ErrorVector f = ErrorVector::Zero();
  f.segment<3>(0) = (u.gyro - x.bias_gyro - w.segment<3>(0)) * dt;
  f.segment<3>(3) = x.vel_world * dt;
  f.segment<3>(12) =
      (x.rot_world_imu * (u.accel - x.bias_accel - w.segment<3>(3)) + kGravity) * dt;
  f.segment<3>(15) = w.segment<3>(6) * dt;
  f.segment<3>(18) = w.segment<3>(9) * dt;
  return f;
}

NavState random_state(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  auto v = [&](double s) -> Vec3 { return Vec3(u(rng), u(rng), u(rng)) * s; };
  NavState x;
  x.rot_world_imu = exp_so3(v(2.0));
  x.pos_world_imu = v(5.0);
  x.rot_imu_cam = exp_so3(v(2.0));
  x.pos_imu_cam = v(0.2);
  x.vel_world = v(3.0);
  x.bias_gyro = v(0.05);
  x.bias_accel = v(0.2);
  return x;
}

ImuSample level_rest() {
  ImuSample u;
  u.accel = -kGravity;
  return u;
}

}  // namespace

TEST(ProcessModel, EquilibriumAndBiasCancellation) {
  NavState x;
  const ErrorVector f0 = process_model(x, level_rest(), NoiseVector::Zero(), 0.005, kGravity);
  EXPECT_TRUE(f0.isZero(1e-15));

  std::mt19937_64 rng(21);
  x = random_state(rng);
  ImuSample u;
  u.gyro = x.bias_gyro;
  u.accel = x.bias_accel + x.rot_world_imu.transpose() * (-kGravity);
  const ErrorVector f = process_model(x, u, NoiseVector::Zero(), 0.01, kGravity);
  EXPECT_TRUE(f.segment<3>(block::kRot).isZero(1e-15));
  EXPECT_TRUE(f.segment<3>(block::kPos).isApprox(x.vel_world * 0.01));
  EXPECT_TRUE(f.segment<3>(block::kVel).isZero(1e-12));
  EXPECT_TRUE(f.segment<6>(block::kExtRot).isZero());
}

TEST(ProcessModel, MatchesReferenceEvaluator) {
  std::mt19937_64 rng(22);
  std::normal_distribution<double> n(0.0, 0.1);
  for (int i = 0; i < 100; ++i) {
    const NavState x = random_state(rng);
    ImuSample u;
    u.gyro = Vec3(n(rng), n(rng), n(rng)) * 10.0;
    u.accel = Vec3(n(rng), n(rng), n(rng)) * 50.0;
    NoiseVector w;
    for (int k = 0; k < kNoiseDim; ++k) w[k] = n(rng);
    EXPECT_TRUE(process_model(x, u, w, 0.005, kGravity).isApprox(reference_f(x, u, w, 0.005), 1e-14));
  }
}

TEST(PropagateState, EquilibriumDoesNotDrift) {
  NavState x;
  for (int i = 0; i < 1000; ++i) x = propagate_state(x, level_rest(), 0.005, kGravity);
  EXPECT_LT(x.pos_world_imu.norm(), 1e-12);
  EXPECT_LT(x.vel_world.norm(), 1e-12);
}

TEST(PropagateState, ConstantYawRate) {
  NavState x;
  ImuSample u = level_rest();
  u.gyro = Vec3(0, 0, 1.0);
  for (int i = 0; i < 200; ++i) x = propagate_state(x, u, 0.005, kGravity);
  EXPECT_LT(log_so3(exp_so3(Vec3(0, 0, 1.0)).transpose() * x.rot_world_imu).norm(), 1e-3);
}

TEST(PropagateState, FreeFall) {
  NavState x;
  ImuSample u;
  for (int i = 0; i < 200; ++i) x = propagate_state(x, u, 0.005, kGravity);
  EXPECT_TRUE(x.vel_world.isApprox(kGravity, 1e-12));
  // Position integrates the velocity held over each step: g dt^2 (0 + 1 + ... + 199).
  EXPECT_TRUE(x.pos_world_imu.isApprox(kGravity * 0.005 * 0.005 * 19900.0, 1e-12));
}

TEST(PropagateState, RejectsBadStep) {
  NavState x;
  EXPECT_THROW(propagate_state(x, level_rest(), 0.0, kGravity), ContractViolation);
  EXPECT_THROW(propagate_state(x, level_rest(), 0.2, kGravity), ContractViolation);
  ImuSample bad = level_rest();
  bad.gyro.x() = std::numeric_limits<double>::infinity();
  EXPECT_THROW(propagate_state(x, bad, 0.005, kGravity), ContractViolation);
}

TEST(ErrorJacobians, ZeroInputLayout) {
  NavState x;
  ImuSample u;
  const double dt = 0.01;
  const ProcessJacobians J = error_jacobians(x, u, dt);
  StateMatrix expected = StateMatrix::Identity();
  expected.block<3, 3>(block::kPos, block::kVel) = Mat3::Identity() * dt;
  expected.block<3, 3>(block::kRot, block::kBiasGyro) = -Mat3::Identity() * dt;
  expected.block<3, 3>(block::kVel, block::kBiasAccel) = -Mat3::Identity() * dt;
  EXPECT_TRUE(J.F_x.isApprox(expected, 1e-15));
}

TEST(ErrorJacobians, MatchFiniteDifferences) {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  for (int i = 0; i < 100; ++i) {
    const NavState x = random_state(rng);
    ImuSample u;
    u.gyro = Vec3(u01(rng) - 0.5, u01(rng) - 0.5, u01(rng) - 0.5) * 6.0;
    u.accel = Vec3(u01(rng) - 0.5, u01(rng) - 0.5, u01(rng) - 0.5) * 20.0;
    const double dt = 0.001 + 0.099 * u01(rng);
    auto step = [&](const NavState& xi, const NoiseVector& w) {
      return state_boxplus(xi, reference_f(xi, u, w, dt));
    };
    const NavState next = step(x, NoiseVector::Zero());
    const ProcessJacobians J = error_jacobians(x, u, dt);

    const Eigen::MatrixXd num_x = numerical_jacobian(
        [&](const Eigen::VectorXd& d) -> Eigen::VectorXd {
          return state_boxminus(step(state_boxplus(x, ErrorVector(d)), NoiseVector::Zero()), next);
        },
        kStateDim);
    EXPECT_LT(relative_error(J.F_x, num_x), 1e-4);

    const Eigen::MatrixXd num_w = numerical_jacobian(
        [&](const Eigen::VectorXd& w) -> Eigen::VectorXd {
          return state_boxminus(step(x, NoiseVector(w)), next);
        },
        kNoiseDim);
    EXPECT_LT(relative_error(J.F_w, num_w), 1e-4);
  }
}

TEST(PropagateCovariance, Reductions) {
  std::mt19937_64 rng(24);
  const NavState x = random_state(rng);
  ImuSample u = level_rest();
  u.gyro = Vec3(0.3, -0.2, 0.5);
  const ProcessJacobians J = error_jacobians(x, u, 0.005);
  const StateCovariance P = InitialUncertainty{}.covariance();

  const StateCovariance same =
      propagate_covariance(P, StateMatrix::Identity(), J.F_w, NoiseCovariance::Zero());
  EXPECT_TRUE(same.isApprox(P));

  const StateCovariance injected = propagate_covariance(StateCovariance::Zero(), J.F_x, J.F_w,
                                                        NoiseCovariance::Identity());
  EXPECT_TRUE(injected.isApprox(J.F_w * J.F_w.transpose(), 1e-14));

  double last = -1.0;
  for (double scale : {0.0, 0.5, 1.0, 2.0, 10.0}) {
    const double tr = propagate_covariance(P, J.F_x, J.F_w,
                                           NoiseParams{}.process_noise() * scale).trace();
    EXPECT_GE(tr, last);
    last = tr;
  }
  EXPECT_EQ((same - same.transpose()).cwiseAbs().maxCoeff(), 0.0);
}
