#pragma once

// Zero-order-hold IMU process model and its error-state linearization.
//
//   x_{i+1} = x_i [+] (dt * f(x_i, u_i, w_i))
//
// with f stacked in ErrorVector order:
//   rotation     w_m - b_g - n_g
//   position     v
//   extrinsics   0, 0
//   velocity     R (a_m - b_a - n_a) + g
//   biases       n_bg, n_ba

#include <Eigen/Core>

#include "livo/state.hpp"

namespace livo {

/// dt * f(x, u, w).
ErrorVector process_model(const NavState& x, const ImuSample& u, const NoiseVector& w,
                          double dt, const Vec3& gravity_world);

/// x [+] (dt * f(x, u, 0)). Requires 0 < dt <= 0.1 and finite inputs.
NavState propagate_state(const NavState& x, const ImuSample& u, double dt,
                         const Vec3& gravity_world);

struct ProcessJacobians {
  StateMatrix F_x;                                    // d(dx_{i+1}) / d(dx_i)
  Eigen::Matrix<double, kStateDim, kNoiseDim> F_w;    // d(dx_{i+1}) / dw
};

ProcessJacobians error_jacobians(const NavState& x, const ImuSample& u, double dt);

/// F_x S F_x^T + F_w Q F_w^T, symmetrized.
StateCovariance propagate_covariance(const StateCovariance& S, const StateMatrix& F_x,
                                     const Eigen::Matrix<double, kStateDim, kNoiseDim>& F_w,
                                     const NoiseCovariance& Q);

}  // namespace livo
