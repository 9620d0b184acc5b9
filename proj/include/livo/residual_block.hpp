#pragma once

#include <Eigen/Core>

#include "livo/state.hpp"

namespace livo {

enum class MeasurementKind { kLidar, kVisual };

/// One measurement linearized at the current iterate:
///   0 ~= residual + jacobian * dx + noise,  noise ~ N(0, noise_cov).
struct ResidualBlock {
  Eigen::VectorXd residual;
  Eigen::Matrix<double, Eigen::Dynamic, kStateDim> jacobian;
  Eigen::MatrixXd noise_cov;
  MeasurementKind kind = MeasurementKind::kLidar;

  Eigen::Index rows() const { return residual.size(); }
};

}  // namespace livo
