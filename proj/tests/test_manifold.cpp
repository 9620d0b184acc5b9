#include <gtest/gtest.h>

#include <Eigen/Geometry>
#include <cmath>
#include <random>

#include "livo/errors.hpp"
#include "livo/jacobian_check.hpp"
#include "livo/manifold.hpp"

using namespace livo;

namespace {

// Independent rotation oracle: unit quaternion from axis-angle.
Mat3 quaternion_exp(const Vec3& r) {
  const double a = r.norm();
  if (a == 0.0) return Mat3::Identity();
  return Eigen::Quaterniond(Eigen::AngleAxisd(a, r / a)).toRotationMatrix();
}

Vec3 random_vector(std::mt19937_64& rng, double max_norm) {
  std::normal_distribution<double> n(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, max_norm);
  Vec3 v(n(rng), n(rng), n(rng));
  return v.normalized() * u(rng);
}

}  // namespace

TEST(Skew, MatchesCrossProduct) {
  EXPECT_TRUE(skew(Vec3::Zero()).isZero());
  Mat3 expected;
  expected << 0, 0, 0, 0, 0, -1, 0, 1, 0;
  EXPECT_TRUE(skew(Vec3(1, 0, 0)).isApprox(expected));
  const Vec3 v(1, 2, 3);
  EXPECT_TRUE((skew(v) * v).isZero(1e-15));
  EXPECT_TRUE(vee(skew(v)).isApprox(v));
}

TEST(ExpSo3, QuarterTurnAboutZ) {
  Mat3 expected;
  expected << 0, -1, 0, 1, 0, 0, 0, 0, 1;
  EXPECT_TRUE(exp_so3(Vec3(0, 0, M_PI / 2)).isApprox(expected, 1e-15));
  EXPECT_TRUE(exp_so3(Vec3::Zero()).isIdentity());
  const Vec3 r(0.3, -0.2, 0.1);
  EXPECT_TRUE((exp_so3(r) * exp_so3(-r)).isIdentity(1e-15));
}

TEST(ExpSo3, AgreesWithQuaternionOracle) {
  std::mt19937_64 rng(1);
  for (int i = 0; i < 1000; ++i) {
    const Vec3 r = random_vector(rng, 3.1);
    EXPECT_LT((exp_so3(r) - quaternion_exp(r)).cwiseAbs().maxCoeff(), 1e-14);
  }
  // Taylor branch.
  for (double a : {1e-12, 1e-9, 1e-7, 9e-6}) {
    const Vec3 r = Vec3(0.6, -0.8, 0.0) * a;
    EXPECT_LT((exp_so3(r) - quaternion_exp(r)).cwiseAbs().maxCoeff(), 1e-16);
  }
}

TEST(LogSo3, InvertsExp) {
  Mat3 R;
  R << 0, -1, 0, 1, 0, 0, 0, 0, 1;
  EXPECT_TRUE(log_so3(R).isApprox(Vec3(0, 0, M_PI / 2), 1e-14));
  EXPECT_TRUE(log_so3(Mat3::Identity()).isZero());

  std::mt19937_64 rng(2);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const Vec3 r = random_vector(rng, 3.0);
    worst = std::max(worst, (log_so3(quaternion_exp(r)) - r).cwiseAbs().maxCoeff());
  }
  EXPECT_LT(worst, 1e-9);
}

TEST(LogSo3, NearPiIsCanonical) {
  for (double eps : {1e-3, 1e-6, 1e-9}) {
    const Vec3 axis = Vec3(1, 2, -2).normalized();
    const Vec3 r = axis * (M_PI - eps);
    const Vec3 back = log_so3(exp_so3(r));
    EXPECT_LE(back.norm(), M_PI + 1e-12);
    EXPECT_LT((exp_so3(back) - exp_so3(r)).cwiseAbs().maxCoeff(), 1e-9);
  }
  // Exactly pi: the first nonzero component of the axis is positive.
  const Vec3 r = log_so3(exp_so3(Vec3(-1, 1, 0).normalized() * M_PI));
  EXPECT_NEAR(r.norm(), M_PI, 1e-9);
  EXPECT_GT(r.x(), 0.0);
}

TEST(LogSo3, RejectsNonRotations) {
  Mat3 scaled = Mat3::Identity() * 1.1;
  EXPECT_THROW(log_so3(scaled), InvalidRotation);
  Mat3 reflection = Mat3::Identity();
  reflection(2, 2) = -1.0;
  EXPECT_THROW(log_so3(reflection), InvalidRotation);
}

TEST(RightJacobian, FirstOrderIdentity) {
  // Exp(r + d) ~= Exp(r) Exp(J_r d), checked by finite differences.
  std::mt19937_64 rng(3);
  for (int i = 0; i < 200; ++i) {
    const Vec3 r = random_vector(rng, 3.0);
    const Mat3 R = exp_so3(r);
    const Eigen::MatrixXd num = numerical_jacobian(
        [&](const Eigen::VectorXd& d) -> Eigen::VectorXd {
          return log_so3(R.transpose() * exp_so3(r + Vec3(d)));
        },
        3);
    EXPECT_LT(relative_error(right_jacobian(r), num), 1e-4) << r.transpose();
  }
}

TEST(RightJacobian, QuarterTurnClosedForm) {
  const Vec3 r(0, 0, M_PI / 2);
  const Eigen::MatrixXd num = numerical_jacobian(
      [&](const Eigen::VectorXd& d) -> Eigen::VectorXd {
        return log_so3(exp_so3(r).transpose() * exp_so3(r + Vec3(d)));
      },
      3);
  EXPECT_LT((right_jacobian(r) - num).cwiseAbs().maxCoeff(), 1e-5);
  EXPECT_TRUE(right_jacobian(Vec3::Zero()).isIdentity());
}

TEST(RightJacobianInverse, InvertsRightJacobian) {
  const Vec3 r0(0.5, 0.4, -0.3);
  EXPECT_TRUE((right_jacobian(r0) * right_jacobian_inv(r0)).isIdentity(1e-12));
  std::mt19937_64 rng(4);
  for (int i = 0; i < 1000; ++i) {
    const Vec3 r = random_vector(rng, 3.0);
    EXPECT_TRUE((right_jacobian(r) * right_jacobian_inv(r)).isIdentity(1e-9));
  }
  const Vec3 tiny(0, 0, 1e-8);
  EXPECT_LT((right_jacobian_inv(tiny) - (Mat3::Identity() + 0.5 * skew(tiny))).norm(), 1e-12);
}

TEST(RightJacobianInverse, FirstOrderIdentity) {
  // Log(Exp(r) Exp(d)) ~= r + J_r^-1 d.
  std::mt19937_64 rng(5);
  for (int i = 0; i < 200; ++i) {
    const Vec3 r = random_vector(rng, 3.0);
    const Eigen::MatrixXd num = numerical_jacobian(
        [&](const Eigen::VectorXd& d) -> Eigen::VectorXd {
          return log_so3(exp_so3(r) * exp_so3(Vec3(d)));
        },
        3);
    EXPECT_LT(relative_error(right_jacobian_inv(r), num), 1e-4);
  }
}

TEST(Perturbation, AdjointAndRotatedVector) {
  std::mt19937_64 rng(6);
  for (int i = 0; i < 100; ++i) {
    const Mat3 R = exp_so3(random_vector(rng, 3.0));
    const Vec3 d = random_vector(rng, 1.0);
    EXPECT_TRUE((R * exp_so3(d) * R.transpose()).isApprox(exp_so3(R * d), 1e-12));

    // d/dd of R Exp(d) v at 0 is -R [v]x.
    const Vec3 v = random_vector(rng, 5.0);
    const Eigen::MatrixXd num = numerical_jacobian(
        [&](const Eigen::VectorXd& dd) -> Eigen::VectorXd { return R * exp_so3(Vec3(dd)) * v; },
        3);
    EXPECT_LT(relative_error(-R * skew(v), num), 1e-4);
  }
}

TEST(NormalizeRotation, RemovesDriftFromLongProducts) {
  std::mt19937_64 rng(7);
  Mat3 R = Mat3::Identity();
  for (int i = 0; i < 100000; ++i) {
    R = R * exp_so3(random_vector(rng, 0.1));
    if (i % 1000 == 999) R = normalize_rotation(R);
  }
  EXPECT_TRUE(is_rotation(R, 1e-12));
}

TEST(Compound, BoxplusExample) {
  CompoundElement<1> x(Mat3::Identity(), Eigen::Matrix<double, 1, 1>(1.0));
  CompoundElement<1>::Tangent d;
  d << 0, 0, M_PI / 2, 2;
  const CompoundElement<1> y = boxplus(x, d);
  EXPECT_TRUE(y.rotation.isApprox(exp_so3(Vec3(0, 0, M_PI / 2))));
  EXPECT_DOUBLE_EQ(y.euclid[0], 3.0);
  EXPECT_TRUE(boxminus(y, x).isApprox(d, 1e-14));
  EXPECT_TRUE(boxminus(x, x).isZero());
  EXPECT_DOUBLE_EQ(boxminus(x, y)[3], -boxminus(y, x)[3]);
}

TEST(Compound, RoundTripAndDimensionCheck) {
  std::mt19937_64 rng(8);
  for (int i = 0; i < 1000; ++i) {
    CompoundElement<3> x(exp_so3(random_vector(rng, 3.0)), random_vector(rng, 10.0));
    CompoundElement<3>::Tangent d;
    d << random_vector(rng, 3.0), random_vector(rng, 5.0);
    EXPECT_LT((boxminus(boxplus(x, d), x) - d).cwiseAbs().maxCoeff(), 1e-9);
  }
  CompoundElement<Eigen::Dynamic> dyn(Mat3::Identity(), Eigen::VectorXd::Zero(2));
  Eigen::VectorXd wrong = Eigen::VectorXd::Zero(4);
  EXPECT_THROW(boxplus(dyn, wrong), ContractViolation);
}
