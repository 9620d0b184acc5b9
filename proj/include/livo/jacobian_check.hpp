#pragma once

// Central finite-difference checks of every closed-form Jacobian.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace livo {

struct JacobianReport {
  std::string name;
  int instances = 0;
  double max_relative_error = 0.0;

  bool passed(double tolerance = 1e-4) const { return max_relative_error < tolerance; }
};

/// max|A - B| / max(max|B|, 1e-9).
double relative_error(const Eigen::MatrixXd& analytic, const Eigen::MatrixXd& numeric);

/// Central differences of f around the origin of its tangent argument.
Eigen::MatrixXd numerical_jacobian(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& f,
                                   Eigen::Index input_dim, double step = 1e-6);

/// F_x, F_w, prior transform, LiDAR H, camera H and F_P, in that order.
std::vector<JacobianReport> run_jacobian_suites(int instances = 100, std::uint64_t seed = 7,
                                                double step = 1e-6);

}  // namespace livo
