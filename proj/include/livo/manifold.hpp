#pragma once

// SO(3) and SO(3) x R^n algebra used by every estimator module.
//
// Rotation vectors follow the Rodrigues convention: Exp(r) rotates by |r|
// radians about r/|r|. Perturbations are applied on the right, so
// boxplus(R, d) = R * Exp(d) and boxminus(R1, R2) = Log(R2^T R1).

#include <cmath>
#include <type_traits>

#include "livo/errors.hpp"
#include "livo/types.hpp"

namespace livo {

/// Below this angle Exp, J_r and J_r^-1 switch to their Taylor series.
inline constexpr double kSmallAngle = 1e-5;

/// Orthonormality tolerance accepted by log_so3 before it throws.
inline constexpr double kRotationTolerance = 1e-6;

/// Cross-product matrix: skew(v) * w == v.cross(w).
Mat3 skew(const Vec3& v);

/// Inverse of skew() for an antisymmetric input.
Vec3 vee(const Mat3& m);

Mat3 exp_so3(const Vec3& r);

/// Canonical rotation vector with |r| <= pi. At exactly pi the axis sign is
/// chosen so that its first nonzero component is positive.
/// Throws InvalidRotation when R is not orthonormal with det +1.
Vec3 log_so3(const Mat3& R);

/// J_r(r): Exp(r + d) ~= Exp(r) Exp(J_r(r) d).
Mat3 right_jacobian(const Vec3& r);

/// J_r^-1(r): Exp(r) Exp(d) ~= Exp(r + J_r^-1(r) d). Valid for |r| < pi.
Mat3 right_jacobian_inv(const Vec3& r);

/// Nearest rotation in the Frobenius sense (SVD projection).
Mat3 normalize_rotation(const Mat3& R);

bool is_rotation(const Mat3& R, double tolerance = kRotationTolerance);

/// Element of SO(3) x R^N. N may be Eigen::Dynamic, in which case the
/// Euclidean size is fixed at construction and checked on every operation.
template <int N>
struct CompoundElement {
  static constexpr int kTangentDim = (N == Eigen::Dynamic) ? Eigen::Dynamic : 3 + N;
  using Euclid = Eigen::Matrix<double, N, 1>;
  using Tangent = Eigen::Matrix<double, kTangentDim, 1>;

  Mat3 rotation = Mat3::Identity();
  Euclid euclid;

  CompoundElement() {
    if constexpr (N != Eigen::Dynamic) euclid.setZero();
  }
  CompoundElement(const Mat3& r, const Euclid& a) : rotation(r), euclid(a) {}

  Eigen::Index euclid_dim() const { return euclid.size(); }
};

template <int N>
CompoundElement<N> boxplus(const CompoundElement<N>& x,
                           const typename CompoundElement<N>::Tangent& delta) {
  if (delta.size() != 3 + x.euclid_dim()) {
    throw ContractViolation("boxplus: tangent dimension " + std::to_string(delta.size()) +
                            " does not match element dimension " +
                            std::to_string(3 + x.euclid_dim()));
  }
  CompoundElement<N> out;
  out.rotation = x.rotation * exp_so3(delta.template head<3>());
  out.euclid = x.euclid + delta.tail(x.euclid_dim());
  return out;
}

template <int N>
typename CompoundElement<N>::Tangent boxminus(const CompoundElement<N>& x1,
                                              const CompoundElement<N>& x2) {
  if (x1.euclid_dim() != x2.euclid_dim()) {
    throw ContractViolation("boxminus: euclidean dimensions differ");
  }
  typename CompoundElement<N>::Tangent out(3 + x1.euclid_dim());
  out.template head<3>() = log_so3(x2.rotation.transpose() * x1.rotation);
  out.tail(x1.euclid_dim()) = x1.euclid - x2.euclid;
  return out;
}

}  // namespace livo
