#include <gtest/gtest.h>

#include <random>

#include "livo/manifold.hpp"
#include "livo/state.hpp"

using namespace livo;

namespace {

NavState random_state(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  auto v = [&](double s) -> Vec3 { return Vec3(u(rng), u(rng), u(rng)) * s; };
  NavState x;
  x.rot_world_imu = exp_so3(v(1.7));
  x.pos_world_imu = v(10.0);
  x.rot_imu_cam = exp_so3(v(1.7));
  x.pos_imu_cam = v(0.3);
  x.vel_world = v(3.0);
  x.bias_gyro = v(0.01);
  x.bias_accel = v(0.1);
  return x;
}

ErrorVector random_error(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  ErrorVector d;
  for (int i = 0; i < kStateDim; ++i) d[i] = u(rng);
  return d;
}

}  // namespace

TEST(NavState, BoxplusZeroIsIdentity) {
  std::mt19937_64 rng(11);
  const NavState x = random_state(rng);
  const NavState y = state_boxplus(x, ErrorVector::Zero());
  EXPECT_TRUE(y.rot_world_imu.isApprox(x.rot_world_imu));
  EXPECT_TRUE(state_boxminus(x, x).isZero());
}

TEST(NavState, RoundTripPerBlock) {
  std::mt19937_64 rng(12);
  for (int i = 0; i < 1000; ++i) {
    const NavState x = random_state(rng);
    const ErrorVector d = random_error(rng);
    EXPECT_LT((state_boxminus(state_boxplus(x, d), x) - d).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(NavState, BlockOrderMatchesLayout) {
  NavState x;
  ErrorVector d = ErrorVector::Zero();
  d.segment<3>(block::kVel) = Vec3(1, 2, 3);
  d.segment<3>(block::kExtPos) = Vec3(4, 5, 6);
  d[block::kBiasAccel + 2] = 7.0;
  const NavState y = state_boxplus(x, d);
  EXPECT_EQ(y.vel_world, Vec3(1, 2, 3));
  EXPECT_EQ(y.pos_imu_cam, Vec3(4, 5, 6));
  EXPECT_EQ(y.bias_accel.z(), 7.0);
  EXPECT_TRUE(y.pos_world_imu.isZero());
  EXPECT_TRUE(y.rot_world_imu.isIdentity());
}

TEST(NavState, RotationIsRightPerturbation) {
  NavState x;
  x.rot_world_imu = exp_so3(Vec3(0.2, -0.1, 0.4));
  ErrorVector d = ErrorVector::Zero();
  d.segment<3>(block::kRot) = Vec3(0.0, 0.0, 0.3);
  EXPECT_TRUE(state_boxplus(x, d).rot_world_imu.isApprox(x.rot_world_imu * exp_so3(Vec3(0, 0, 0.3))));
}

TEST(NavState, FiniteCheck) {
  NavState x;
  EXPECT_TRUE(x.all_finite());
  x.bias_gyro.x() = std::numeric_limits<double>::quiet_NaN();
  EXPECT_FALSE(x.all_finite());
}

TEST(Covariance, InitialIsDiagonalWithConfiguredSigmas) {
  const StateCovariance P = InitialUncertainty{}.covariance();
  EXPECT_TRUE(P.isApprox(StateCovariance(P.diagonal().asDiagonal())));
  EXPECT_DOUBLE_EQ(P(block::kVel, block::kVel), 1e-2);
  EXPECT_DOUBLE_EQ(P(block::kRot, block::kRot), 1e-4);
  EXPECT_DOUBLE_EQ(P(block::kBiasAccel + 2, block::kBiasAccel + 2), 1e-6);
}

TEST(Covariance, HealthReportsAsymmetryAndNegativeEigenvalues) {
  StateCovariance S = StateCovariance::Identity();
  S(0, 1) = 1e-6;
  const CovarianceHealth h = covariance_health(S);
  EXPECT_NEAR(h.asymmetry, 1e-6, 1e-18);
  EXPECT_FALSE(h.healthy());
  EXPECT_TRUE(covariance_health(symmetrize(S)).healthy());

  StateCovariance N = StateCovariance::Identity();
  N(4, 4) = -1e-6;
  EXPECT_NEAR(covariance_health(N).min_eigenvalue, -1e-6, 1e-15);
}

TEST(NoiseParams, ProcessNoiseOrder) {
  NoiseParams n{0.1, 0.2, 0.3, 0.4};
  const NoiseCovariance Q = n.process_noise();
  EXPECT_DOUBLE_EQ(Q(0, 0), 0.01);
  EXPECT_DOUBLE_EQ(Q(3, 3), 0.04);
  EXPECT_DOUBLE_EQ(Q(6, 6), 0.09);
  EXPECT_DOUBLE_EQ(Q(11, 11), 0.16);
}
