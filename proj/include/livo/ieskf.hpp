#pragma once

// Error-state iterated Kalman filter update.
//
// Each iteration relinearizes the measurements at the current iterate x_check
// and solves the MAP problem
//
//   min_dx  |x_check [-] x_hat + Hcal dx|^2_Sigma + sum_i |z_i + H_i dx|^2_{R_i}
//
// in closed form with the Kalman gain K = (H^T R^-1 H + P^-1)^-1 H^T R^-1,
// P = Hcal^-1 Sigma Hcal^-T.

#include <functional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "livo/residual_block.hpp"
#include "livo/state.hpp"

namespace livo {

/// Jacobian of (x_check [+] dx) [-] x_hat at dx = 0.
struct PriorTransform {
  StateMatrix H_cal = StateMatrix::Identity();
  Mat3 A = Mat3::Identity();  // rotation block
  Mat3 B = Mat3::Identity();  // camera-extrinsic rotation block

  /// Block inverse (only A and B are non-identity).
  StateMatrix inverse() const;
};

PriorTransform prior_transform(const NavState& x_check, const NavState& x_hat);

using GainMatrix = Eigen::Matrix<double, kStateDim, Eigen::Dynamic>;
using StackedJacobian = Eigen::Matrix<double, Eigen::Dynamic, kStateDim>;

/// Row-stacked measurement system. R is block diagonal and kept as blocks.
struct StackedSystem {
  StackedJacobian H;
  Eigen::VectorXd z;
  std::vector<Eigen::MatrixXd> noise_blocks;
  std::vector<Eigen::Index> offsets;  // first row of each block

  Eigen::Index rows() const { return z.size(); }
  bool empty() const { return z.size() == 0; }
  Eigen::MatrixXd dense_noise() const;
};

/// LiDAR blocks first, then visual ones; relative order inside a kind is kept.
StackedSystem build_stacked_system(std::span<const ResidualBlock> blocks);

/// K = (H^T R^-1 H + P^-1 + 1e-12 I)^-1 H^T R^-1, using the block structure
/// of R. Throws NumericalFailure if a factorization fails.
GainMatrix kalman_gain(const StackedSystem& sys, const StateCovariance& P);

/// Dense-R variant of the same formula.
GainMatrix kalman_gain(const StackedJacobian& H, const Eigen::MatrixXd& R,
                       const StateCovariance& P);

struct UpdateStep {
  ErrorVector delta = ErrorVector::Zero();
  GainMatrix K;
  StateCovariance P = StateCovariance::Zero();  // Hcal^-1 Sigma Hcal^-T
};

/// One linearized solve: delta = -K z - (I - K H) Hcal^-1 (x_check [-] x_hat).
UpdateStep compute_update_step(const StackedSystem& sys, const PriorTransform& prior,
                               const StateCovariance& prior_cov, const ErrorVector& prior_error);

/// Residual blocks for one measurement frame, linearized at the given state.
using MeasurementModel = std::function<std::vector<ResidualBlock>(const NavState&)>;

struct UpdateOptions {
  int max_iterations = 5;
  double convergence_threshold = 1e-6;
};

struct UpdateResult {
  NavState state;
  StateCovariance covariance = StateCovariance::Zero();
  int iterations = 0;
  bool converged = false;
  double final_delta_norm = 0.0;
  std::vector<double> cost_history;  // map_cost at each linearization point
  std::size_t residual_count = 0;    // blocks at the last linearization
};

UpdateResult iterated_update(const NavState& x_hat, const StateCovariance& prior_cov,
                             const MeasurementModel& model, const UpdateOptions& options = {});

/// Nonlinear MAP objective at x_check for blocks linearized there.
double map_cost(const NavState& x_check, std::span<const ResidualBlock> blocks,
                const NavState& x_hat, const StateCovariance& prior_cov);

/// Quadratic model of map_cost around x_check as a function of dx.
double linearized_map_cost(const ErrorVector& dx, const StackedSystem& sys,
                           const PriorTransform& prior, const StateCovariance& prior_cov,
                           const ErrorVector& prior_error);

}  // namespace livo
