#include "livo/manifold.hpp"

#include <Eigen/LU>
#include <Eigen/SVD>
#include <algorithm>

namespace livo {

namespace {

// Coefficients of the Rodrigues-type series, stable for all angles < pi.
// sin(t)/t
double sinc(double t) {
  if (t < kSmallAngle) {
    const double t2 = t * t;
    return 1.0 - t2 / 6.0 + t2 * t2 / 120.0;
  }
  return std::sin(t) / t;
}

// (1 - cos t) / t^2
double cosc(double t) {
  if (t < kSmallAngle) {
    const double t2 = t * t;
    return 0.5 - t2 / 24.0 + t2 * t2 / 720.0;
  }
  const double s = std::sin(0.5 * t);
  return 2.0 * s * s / (t * t);
}

// (t - sin t) / t^3
double sinc3(double t) {
  if (t < kSmallAngle) {
    const double t2 = t * t;
    return 1.0 / 6.0 - t2 / 120.0 + t2 * t2 / 5040.0;
  }
  return (t - std::sin(t)) / (t * t * t);
}

}  // namespace

Mat3 skew(const Vec3& v) {
  Mat3 m;
  m << 0.0, -v.z(), v.y(),
       v.z(), 0.0, -v.x(),
       -v.y(), v.x(), 0.0;
  return m;
}

Vec3 vee(const Mat3& m) { return Vec3(m(2, 1), m(0, 2), m(1, 0)); }

Mat3 exp_so3(const Vec3& r) {
  const double t = r.norm();
  const Mat3 K = skew(r);
  return Mat3::Identity() + sinc(t) * K + cosc(t) * K * K;
}

bool is_rotation(const Mat3& R, double tolerance) {
  if (!R.allFinite()) return false;
  const double ortho = (R.transpose() * R - Mat3::Identity()).cwiseAbs().maxCoeff();
  return ortho <= tolerance && std::abs(R.determinant() - 1.0) <= tolerance;
}

Vec3 log_so3(const Mat3& R) {
  if (!is_rotation(R)) {
    throw InvalidRotation("log_so3: input is not a rotation matrix within tolerance");
  }
  const Vec3 w = vee(R - R.transpose());  // 2 sin(t) * axis
  const double c = std::clamp(0.5 * (R.trace() - 1.0), -1.0, 1.0);
  const double s = 0.5 * w.norm();
  const double t = std::atan2(s, c);

  if (c > -0.95) {
    // Away from pi the antisymmetric part determines the axis reliably.
    return (0.5 / sinc(t)) * w;
  }

  // Near pi: read the axis off the symmetric part, largest diagonal first.
  const Mat3 S = 0.5 * (R + R.transpose()) - c * Mat3::Identity();  // (1-c) a a^T
  Eigen::Index k = 0;
  S.diagonal().maxCoeff(&k);
  Vec3 axis = S.col(k) / std::sqrt(std::max(S(k, k), 1e-300));
  axis.normalize();
  if (axis.dot(w) < 0.0) axis = -axis;
  if (w.norm() < 1e-15) {
    // Exactly pi: both signs are valid; pick the one with positive leading entry.
    for (int i = 0; i < 3; ++i) {
      if (std::abs(axis[i]) > 1e-12) {
        if (axis[i] < 0.0) axis = -axis;
        break;
      }
    }
  }
  return t * axis;
}

Mat3 right_jacobian(const Vec3& r) {
  const double t = r.norm();
  const Mat3 K = skew(r);
  return Mat3::Identity() - cosc(t) * K + sinc3(t) * K * K;
}

Mat3 right_jacobian_inv(const Vec3& r) {
  const double t = r.norm();
  const Mat3 K = skew(r);
  double coeff;
  if (t < kSmallAngle) {
    const double t2 = t * t;
    coeff = 1.0 / 12.0 + t2 / 720.0 + t2 * t2 / 30240.0;
  } else {
    coeff = 1.0 / (t * t) - (1.0 + std::cos(t)) / (2.0 * t * std::sin(t));
  }
  return Mat3::Identity() + 0.5 * K + coeff * K * K;
}

Mat3 normalize_rotation(const Mat3& R) {
  Eigen::JacobiSVD<Mat3> svd(R, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 U = svd.matrixU();
  const Mat3 V = svd.matrixV();
  if ((U * V.transpose()).determinant() < 0.0) U.col(2) = -U.col(2);
  return U * V.transpose();
}

}  // namespace livo
