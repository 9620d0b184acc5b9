#include "livo/ieskf.hpp"

#include <Eigen/Cholesky>
#include <Eigen/LU>
#include <algorithm>

#include "livo/errors.hpp"
#include "livo/manifold.hpp"

namespace livo {

namespace {

constexpr double kRegularization = 1e-12;

StateMatrix inverse_spd(const StateCovariance& S, const char* what) {
  Eigen::LLT<StateMatrix> llt(S);
  if (llt.info() != Eigen::Success) {
    throw NumericalFailure(std::string(what) + ": matrix is not positive definite");
  }
  return llt.solve(StateMatrix::Identity());
}

// Columns of H^T R^-1, computed block by block.
GainMatrix weighted_jacobian_transpose(const StackedSystem& sys) {
  GainMatrix out(kStateDim, sys.rows());
  for (std::size_t i = 0; i < sys.noise_blocks.size(); ++i) {
    const Eigen::MatrixXd& R = sys.noise_blocks[i];
    const Eigen::Index off = sys.offsets[i];
    const Eigen::Index n = R.rows();
    if (n == 1) {
      if (!(R(0, 0) > 0.0)) throw NumericalFailure("kalman_gain: non-positive noise variance");
      out.col(off) = sys.H.row(off).transpose() / R(0, 0);
      continue;
    }
    Eigen::LLT<Eigen::MatrixXd> llt(R);
    if (llt.info() != Eigen::Success) {
      throw NumericalFailure("kalman_gain: noise block is not positive definite");
    }
    out.middleCols(off, n) = llt.solve(sys.H.middleRows(off, n)).transpose();
  }
  return out;
}

GainMatrix gain_from_weighted(const StackedJacobian& H, const GainMatrix& HtRinv,
                              const StateMatrix& P_inv) {
  StateMatrix S = HtRinv * H + P_inv;
  S.diagonal().array() += kRegularization;
  Eigen::LLT<StateMatrix> llt(S);
  if (llt.info() != Eigen::Success) {
    throw NumericalFailure("kalman_gain: information matrix is not positive definite");
  }
  return llt.solve(HtRinv);
}

}  // namespace

StateMatrix PriorTransform::inverse() const {
  StateMatrix inv = StateMatrix::Identity();
  inv.block<3, 3>(block::kRot, block::kRot) = A.inverse();
  inv.block<3, 3>(block::kExtRot, block::kExtRot) = B.inverse();
  return inv;
}

PriorTransform prior_transform(const NavState& x_check, const NavState& x_hat) {
  PriorTransform out;
  out.A = right_jacobian_inv(log_so3(x_hat.rot_world_imu.transpose() * x_check.rot_world_imu));
  out.B = right_jacobian_inv(log_so3(x_hat.rot_imu_cam.transpose() * x_check.rot_imu_cam));
  out.H_cal.block<3, 3>(block::kRot, block::kRot) = out.A;
  out.H_cal.block<3, 3>(block::kExtRot, block::kExtRot) = out.B;
  return out;
}

Eigen::MatrixXd StackedSystem::dense_noise() const {
  Eigen::MatrixXd R = Eigen::MatrixXd::Zero(rows(), rows());
  for (std::size_t i = 0; i < noise_blocks.size(); ++i) {
    const auto n = noise_blocks[i].rows();
    R.block(offsets[i], offsets[i], n, n) = noise_blocks[i];
  }
  return R;
}

StackedSystem build_stacked_system(std::span<const ResidualBlock> blocks) {
  Eigen::Index m = 0;
  for (const ResidualBlock& b : blocks) {
    if (b.jacobian.rows() != b.rows() || b.noise_cov.rows() != b.rows() ||
        b.noise_cov.cols() != b.rows()) {
      throw ContractViolation("build_stacked_system: inconsistent residual block dimensions");
    }
    m += b.rows();
  }

  StackedSystem sys;
  sys.H.resize(m, kStateDim);
  sys.z.resize(m);
  sys.noise_blocks.reserve(blocks.size());
  sys.offsets.reserve(blocks.size());

  Eigen::Index row = 0;
  for (MeasurementKind kind : {MeasurementKind::kLidar, MeasurementKind::kVisual}) {
    for (const ResidualBlock& b : blocks) {
      if (b.kind != kind) continue;
      sys.H.middleRows(row, b.rows()) = b.jacobian;
      sys.z.segment(row, b.rows()) = b.residual;
      sys.noise_blocks.push_back(b.noise_cov);
      sys.offsets.push_back(row);
      row += b.rows();
    }
  }
  return sys;
}

GainMatrix kalman_gain(const StackedSystem& sys, const StateCovariance& P) {
  if (sys.empty()) return GainMatrix(kStateDim, 0);
  return gain_from_weighted(sys.H, weighted_jacobian_transpose(sys), inverse_spd(P, "kalman_gain"));
}

GainMatrix kalman_gain(const StackedJacobian& H, const Eigen::MatrixXd& R,
                       const StateCovariance& P) {
  if (H.rows() == 0) return GainMatrix(kStateDim, 0);
  if (R.rows() != H.rows() || R.cols() != H.rows()) {
    throw ContractViolation("kalman_gain: R must be square with one row per measurement");
  }
  Eigen::LLT<Eigen::MatrixXd> llt(R);
  if (llt.info() != Eigen::Success) {
    throw NumericalFailure("kalman_gain: R is not positive definite");
  }
  const GainMatrix HtRinv = llt.solve(H).transpose();
  return gain_from_weighted(H, HtRinv, inverse_spd(P, "kalman_gain"));
}

UpdateStep compute_update_step(const StackedSystem& sys, const PriorTransform& prior,
                               const StateCovariance& prior_cov,
                               const ErrorVector& prior_error) {
  const StateMatrix H_inv = prior.inverse();
  UpdateStep step;
  step.P = symmetrize(H_inv * prior_cov * H_inv.transpose());
  step.K = kalman_gain(sys, step.P);
  if (sys.empty()) {
    step.delta = -H_inv * prior_error;
    return step;
  }
  const StateMatrix I_KH = StateMatrix::Identity() - step.K * sys.H;
  step.delta = -step.K * sys.z - I_KH * H_inv * prior_error;
  return step;
}

UpdateResult iterated_update(const NavState& x_hat, const StateCovariance& prior_cov,
                             const MeasurementModel& model, const UpdateOptions& options) {
  UpdateResult result;
  result.state = x_hat;
  result.covariance = prior_cov;

  NavState x_check = x_hat;
  StackedSystem last_sys;
  UpdateStep last_step;
  for (int it = 0; it < std::max(options.max_iterations, 1); ++it) {
    const std::vector<ResidualBlock> blocks = model(x_check);
    if (blocks.empty() && it == 0) return result;

    last_sys = build_stacked_system(blocks);
    const PriorTransform prior = prior_transform(x_check, x_hat);
    const ErrorVector prior_error = state_boxminus(x_check, x_hat);
    result.cost_history.push_back(map_cost(x_check, blocks, x_hat, prior_cov));

    last_step = compute_update_step(last_sys, prior, prior_cov, prior_error);
    if (!last_step.delta.allFinite()) throw NumericalFailure("iterated_update: non-finite step");
    x_check = state_boxplus(x_check, last_step.delta);

    result.iterations = it + 1;
    result.residual_count = blocks.size();
    result.final_delta_norm = last_step.delta.norm();
    if (result.final_delta_norm < options.convergence_threshold) {
      result.converged = true;
      break;
    }
  }

  result.state = x_check;
  if (last_sys.empty()) {
    result.covariance = symmetrize(last_step.P);
  } else {
    const StateMatrix I_KH = StateMatrix::Identity() - last_step.K * last_sys.H;
    result.covariance = symmetrize(I_KH * last_step.P);
  }
  return result;
}

double map_cost(const NavState& x_check, std::span<const ResidualBlock> blocks,
                const NavState& x_hat, const StateCovariance& prior_cov) {
  const ErrorVector e = state_boxminus(x_check, x_hat);
  double cost = e.dot(inverse_spd(prior_cov, "map_cost") * e);
  for (const ResidualBlock& b : blocks) {
    cost += b.residual.dot(b.noise_cov.ldlt().solve(b.residual));
  }
  return cost;
}

double linearized_map_cost(const ErrorVector& dx, const StackedSystem& sys,
                           const PriorTransform& prior, const StateCovariance& prior_cov,
                           const ErrorVector& prior_error) {
  const ErrorVector e = prior_error + prior.H_cal * dx;
  double cost = e.dot(inverse_spd(prior_cov, "linearized_map_cost") * e);
  if (sys.empty()) return cost;
  const Eigen::VectorXd r = sys.z + sys.H * dx;
  for (std::size_t i = 0; i < sys.noise_blocks.size(); ++i) {
    const Eigen::VectorXd ri = r.segment(sys.offsets[i], sys.noise_blocks[i].rows());
    cost += ri.dot(sys.noise_blocks[i].ldlt().solve(ri));
  }
  return cost;
}

}  // namespace livo
