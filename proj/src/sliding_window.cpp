#include "livo/sliding_window.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <cmath>
#include <limits>
#include <unordered_map>

#include "livo/manifold.hpp"

namespace livo {

namespace {

constexpr int kPoseDim = 9;  // theta, p, v
using Mat63 = Eigen::Matrix<double, 6, 3>;

using Vec9 = Eigen::Matrix<double, 9, 1>;
using Mat9x18 = Eigen::Matrix<double, 9, 18>;

struct KeyframeVar {
  Mat3 rot;
  Vec3 pos;
  Vec3 vel;
};

struct Variables {
  std::vector<KeyframeVar> keyframes;
  std::vector<Vec3> landmarks;
};

// Index maps from ids to positions in Variables.
struct Layout {
  std::unordered_map<std::int64_t, int> keyframe;
  std::unordered_map<std::int64_t, int> landmark;
  std::vector<std::int64_t> landmark_ids;
};

Layout make_layout(const WindowProblem& problem) {
  Layout layout;
  for (std::size_t i = 0; i < problem.keyframes.size(); ++i) {
    layout.keyframe[problem.keyframes[i].id] = static_cast<int>(i);
  }
  for (const auto& [id, lm] : problem.landmarks) {
    layout.landmark[id] = static_cast<int>(layout.landmark_ids.size());
    layout.landmark_ids.push_back(id);
  }
  return layout;
}

Variables initial_variables(const WindowProblem& problem, const Layout& layout) {
  Variables vars;
  for (const KeyframeNode& kf : problem.keyframes) vars.keyframes.push_back({kf.rot, kf.pos, kf.vel});
  for (std::int64_t id : layout.landmark_ids) vars.landmarks.push_back(problem.landmarks.at(id).position);
  return vars;
}

NavState camera_state(const WindowProblem& problem, const KeyframeVar& kf) {
  NavState x;
  x.rot_world_imu = kf.rot;
  x.pos_world_imu = kf.pos;
  x.rot_imu_cam = problem.rot_imu_cam;
  x.pos_imu_cam = problem.pos_imu_cam;
  return x;
}

template <int N>
Eigen::Matrix<double, N, N> information(const Eigen::Matrix<double, N, N>& cov) {
  return cov.ldlt().solve(Eigen::Matrix<double, N, N>::Identity());
}

Vec9 preintegration_residual(const PreintegrationFactor& f, const KeyframeVar& a,
                             const KeyframeVar& b, const Vec3& g) {
  const double dt = f.preint.duration;
  Vec9 r;
  r.segment<3>(0) = log_so3(f.preint.delta_rot.transpose() * a.rot.transpose() * b.rot);
  r.segment<3>(3) = a.rot.transpose() * (b.vel - a.vel - g * dt) - f.preint.delta_vel;
  r.segment<3>(6) =
      a.rot.transpose() * (b.pos - a.pos - a.vel * dt - 0.5 * g * dt * dt) - f.preint.delta_pos;
  return r;
}

// Columns: (theta_a, p_a, v_a, theta_b, p_b, v_b).
Mat9x18 preintegration_jacobian(const PreintegrationFactor& f, const KeyframeVar& a,
                                const KeyframeVar& b, const Vec3& g, const Vec9& r) {
  const double dt = f.preint.duration;
  const Mat3 RaT = a.rot.transpose();
  const Mat3 Jinv = right_jacobian_inv(r.segment<3>(0));
  Mat9x18 J = Mat9x18::Zero();
  J.block<3, 3>(0, 0) = -Jinv * b.rot.transpose() * a.rot;
  J.block<3, 3>(0, 9) = Jinv;

  J.block<3, 3>(3, 0) = skew(RaT * (b.vel - a.vel - g * dt));
  J.block<3, 3>(3, 6) = -RaT;
  J.block<3, 3>(3, 15) = RaT;

  J.block<3, 3>(6, 0) = skew(RaT * (b.pos - a.pos - a.vel * dt - 0.5 * g * dt * dt));
  J.block<3, 3>(6, 3) = -RaT;
  J.block<3, 3>(6, 6) = -RaT * dt;
  J.block<3, 3>(6, 12) = RaT;
  return J;
}

Eigen::Matrix<double, 6, 1> prior_residual(const LidarPosePrior& p, const KeyframeVar& kf) {
  Eigen::Matrix<double, 6, 1> r;
  r.head<3>() = log_so3(p.rot.transpose() * kf.rot);
  r.tail<3>() = kf.pos - p.pos;
  return r;
}

double cost_of(const WindowProblem& problem, const Layout& layout, const Variables& vars) {
  double cost = 0.0;
  for (const ReprojectionFactor& f : problem.reprojections) {
    const KeyframeVar& kf = vars.keyframes[layout.keyframe.at(f.keyframe_id)];
    const Vec3& P = vars.landmarks[layout.landmark.at(f.landmark_id)];
    const Vec3 pc = world_to_camera(camera_state(problem, kf), P);
    if (!(pc.z() > kMinDepth)) return std::numeric_limits<double>::infinity();
    const Vec2 r = f.pixel - project(pc, problem.K);
    cost += r.dot(f.noise_cov.ldlt().solve(r));
  }
  for (const PreintegrationFactor& f : problem.preintegrations) {
    const Vec9 r = preintegration_residual(f, vars.keyframes[layout.keyframe.at(f.from)],
                                           vars.keyframes[layout.keyframe.at(f.to)],
                                           problem.gravity_world);
    cost += r.dot(f.preint.noise_cov.ldlt().solve(r));
  }
  for (const LidarPosePrior& p : problem.pose_priors) {
    const auto r = prior_residual(p, vars.keyframes[layout.keyframe.at(p.keyframe_id)]);
    cost += r.dot(p.cov.ldlt().solve(r));
  }
  return cost;
}

// Gauss-Newton normal equations split into pose and landmark parts.
struct NormalEquations {
  Eigen::MatrixXd Hpp;
  Eigen::VectorXd bp;                     // -J^T W r, pose part
  std::vector<Mat3> Hll;
  std::vector<Vec3> bl;
  // Per landmark, the nonzero 6x3 blocks of H_pl keyed by keyframe index.
  std::vector<std::vector<std::pair<int, Mat63>>> Hpl;
};

void add_pose_landmark_block(std::vector<std::pair<int, Mat63>>& blocks, int k, const Mat63& B) {
  for (auto& [kk, M] : blocks) {
    if (kk == k) {
      M += B;
      return;
    }
  }
  blocks.emplace_back(k, B);
}

// S -= sum_{i,j} B_i Hinv B_j^T over the landmark's observing keyframes. Only
// the lower block triangle is written; the LDLT solves below read nothing else.
void subtract_landmark_coupling(Eigen::MatrixXd& S, const std::vector<std::pair<int, Mat63>>& blocks,
                                const Mat3& Hinv) {
  for (const auto& [i, Bi] : blocks) {
    const Mat63 BiH = Bi * Hinv;
    for (const auto& [j, Bj] : blocks) {
      if (j > i) continue;
      S.block<6, 6>(i * kPoseDim, j * kPoseDim).noalias() -= BiH * Bj.transpose();
    }
  }
}

Vec3 times_transpose(const std::vector<std::pair<int, Mat63>>& blocks,
                                const Eigen::VectorXd& dp) {
  Vec3 out = Vec3::Zero();
  for (const auto& [k, B] : blocks) out.noalias() += B.transpose() * dp.segment<6>(k * kPoseDim);
  return out;
}

NormalEquations linearize(const WindowProblem& problem, const Layout& layout,
                          const Variables& vars) {
  const Eigen::Index np = static_cast<Eigen::Index>(vars.keyframes.size()) * kPoseDim;
  const std::size_t nl = vars.landmarks.size();
  NormalEquations ne;
  ne.Hpp = Eigen::MatrixXd::Zero(np, np);
  ne.bp = Eigen::VectorXd::Zero(np);
  ne.Hll.assign(nl, Mat3::Zero());
  ne.bl.assign(nl, Vec3::Zero());
  ne.Hpl.assign(nl, {});

  for (const ReprojectionFactor& f : problem.reprojections) {
    const int k = layout.keyframe.at(f.keyframe_id);
    const int l = layout.landmark.at(f.landmark_id);
    Landmark lm;
    lm.position_world = vars.landmarks[l];
    lm.cov.setZero();
    FeatureObservation obs;
    obs.pixel = f.pixel;
    obs.noise_cov = f.noise_cov;
    const NavState x = camera_state(problem, vars.keyframes[k]);
    const VisualJacobians J = visual_jacobians(x, obs, lm, problem.K);
    const Vec2 r = reprojection_residual(x, obs, lm, problem.K);
    const Eigen::Matrix<double, 2, 6> Jp = J.H.leftCols<6>();
    const Mat2 W = information<2>(f.noise_cov);

    ne.Hpp.block<6, 6>(k * kPoseDim, k * kPoseDim) += Jp.transpose() * W * Jp;
    ne.bp.segment<6>(k * kPoseDim) -= Jp.transpose() * W * r;
    add_pose_landmark_block(ne.Hpl[l], k, Jp.transpose() * W * J.F_P);
    ne.Hll[l] += J.F_P.transpose() * W * J.F_P;
    ne.bl[l] -= J.F_P.transpose() * W * r;
  }

  for (const PreintegrationFactor& f : problem.preintegrations) {
    const int a = layout.keyframe.at(f.from);
    const int b = layout.keyframe.at(f.to);
    const Vec9 r = preintegration_residual(f, vars.keyframes[a], vars.keyframes[b],
                                           problem.gravity_world);
    const Mat9x18 J = preintegration_jacobian(f, vars.keyframes[a], vars.keyframes[b],
                                              problem.gravity_world, r);
    Mat9 cov = f.preint.noise_cov;
    cov.diagonal().array() += 1e-15;
    const Mat9 W = information<9>(cov);
    const int idx[2] = {a * kPoseDim, b * kPoseDim};
    for (int i = 0; i < 2; ++i) {
      const auto Ji = J.middleCols<9>(9 * i);
      ne.bp.segment<9>(idx[i]) -= Ji.transpose() * W * r;
      for (int j = 0; j < 2; ++j) {
        ne.Hpp.block<9, 9>(idx[i], idx[j]) += Ji.transpose() * W * J.middleCols<9>(9 * j);
      }
    }
  }

  for (const LidarPosePrior& p : problem.pose_priors) {
    const int k = layout.keyframe.at(p.keyframe_id);
    const auto r = prior_residual(p, vars.keyframes[k]);
    Mat6 J = Mat6::Identity();
    J.topLeftCorner<3, 3>() = right_jacobian_inv(r.head<3>());
    const Mat6 W = information<6>(p.cov);
    ne.Hpp.block<6, 6>(k * kPoseDim, k * kPoseDim) += J.transpose() * W * J;
    ne.bp.segment<6>(k * kPoseDim) -= J.transpose() * W * r;
  }
  return ne;
}

struct SchurSolution {
  Eigen::VectorXd dp;
  std::vector<Vec3> dl;
  bool ok = false;
};

Eigen::VectorXd damping_of(const Eigen::VectorXd& diag, double lambda) {
  return lambda * diag.cwiseMax(1e-6);
}

SchurSolution solve_damped(const NormalEquations& ne, double lambda) {
  SchurSolution sol;
  Eigen::MatrixXd S = ne.Hpp;
  S.diagonal() += damping_of(ne.Hpp.diagonal(), lambda);
  Eigen::VectorXd rhs = ne.bp;

  std::vector<Mat3> Hll_inv(ne.Hll.size());
  for (std::size_t l = 0; l < ne.Hll.size(); ++l) {
    Mat3 H = ne.Hll[l];
    H.diagonal() += damping_of(H.diagonal(), lambda);
    Eigen::LDLT<Mat3> ldlt(H);
    if (ldlt.info() != Eigen::Success || !(ldlt.vectorD().minCoeff() > 0.0)) return sol;
    Hll_inv[l] = ldlt.solve(Mat3::Identity());
    subtract_landmark_coupling(S, ne.Hpl[l], Hll_inv[l]);
    const Vec3 w = Hll_inv[l] * ne.bl[l];
    for (const auto& [k, B] : ne.Hpl[l]) rhs.segment<6>(k * kPoseDim).noalias() -= B * w;
  }

  Eigen::LDLT<Eigen::MatrixXd> ldlt(S);
  if (ldlt.info() != Eigen::Success) return sol;
  sol.dp = ldlt.solve(rhs);
  if (!sol.dp.allFinite()) return sol;
  sol.dl.resize(ne.Hll.size());
  for (std::size_t l = 0; l < ne.Hll.size(); ++l) {
    sol.dl[l] = Hll_inv[l] * (ne.bl[l] - times_transpose(ne.Hpl[l], sol.dp));
  }
  sol.ok = true;
  return sol;
}

Variables apply_step(const Variables& vars, const SchurSolution& step) {
  Variables out = vars;
  for (std::size_t k = 0; k < out.keyframes.size(); ++k) {
    const auto d = step.dp.segment<kPoseDim>(static_cast<Eigen::Index>(k) * kPoseDim);
    out.keyframes[k].rot = vars.keyframes[k].rot * exp_so3(d.head<3>());
    out.keyframes[k].pos += d.segment<3>(3);
    out.keyframes[k].vel += d.tail<3>();
  }
  for (std::size_t l = 0; l < out.landmarks.size(); ++l) out.landmarks[l] += step.dl[l];
  return out;
}

// Marginal landmark covariances from the undamped normal equations.
std::vector<Mat3> landmark_covariances(const NormalEquations& ne) {
  std::vector<Mat3> cov(ne.Hll.size(), Mat3::Zero());
  std::vector<Mat3> Hll_inv(ne.Hll.size());
  Eigen::MatrixXd S = ne.Hpp;
  for (std::size_t l = 0; l < ne.Hll.size(); ++l) {
    Hll_inv[l] = ne.Hll[l].ldlt().solve(Mat3::Identity());
    subtract_landmark_coupling(S, ne.Hpl[l], Hll_inv[l]);
  }
  Eigen::LDLT<Eigen::MatrixXd> ldlt(S);
  const bool have_pose_cov = ldlt.info() == Eigen::Success && S.rows() > 0;
  for (std::size_t l = 0; l < ne.Hll.size(); ++l) {
    cov[l] = Hll_inv[l];
    if (have_pose_cov) {
      Eigen::MatrixXd G = Eigen::MatrixXd::Zero(S.rows(), 3);
      for (const auto& [k, B] : ne.Hpl[l]) G.middleRows<6>(k * kPoseDim) = B * Hll_inv[l];
      cov[l] += G.transpose() * ldlt.solve(G);
    }
    cov[l] = 0.5 * (cov[l] + cov[l].transpose()).eval();
  }
  return cov;
}

}  // namespace

WindowProblem build_window(std::span<const KeyframeInput> keyframes, const LandmarkStore& store,
                           const WindowContext& ctx, const WindowOptions& options) {
  WindowProblem problem;
  problem.rot_imu_cam = ctx.rot_imu_cam;
  problem.pos_imu_cam = ctx.pos_imu_cam;
  problem.gravity_world = ctx.gravity_world;
  problem.K = ctx.K;

  for (const KeyframeInput& in : keyframes) problem.keyframes.push_back(in.node);

  // Landmark -> observing keyframes, keeping only those in front of the camera.
  std::map<std::int64_t, std::vector<ReprojectionFactor>> by_landmark;
  for (const KeyframeInput& in : keyframes) {
    NavState x;
    x.rot_world_imu = in.node.rot;
    x.pos_world_imu = in.node.pos;
    x.rot_imu_cam = ctx.rot_imu_cam;
    x.pos_imu_cam = ctx.pos_imu_cam;
    for (const FeatureObservation& obs : in.node.observations) {
      const Landmark* lm = store.find(obs.feature_id);
      if (!lm) continue;
      if (!(world_to_camera(x, lm->position_world).z() > kMinDepth)) continue;
      by_landmark[obs.feature_id].push_back(
          ReprojectionFactor{in.node.id, obs.feature_id, obs.pixel, obs.noise_cov});
    }
  }
  for (auto& [id, factors] : by_landmark) {
    if (factors.size() < 2) continue;
    const Landmark* lm = store.find(id);
    problem.landmarks[id] = WindowLandmark{id, lm->position_world, lm->cov};
    problem.reprojections.insert(problem.reprojections.end(), factors.begin(), factors.end());
  }

  for (std::size_t i = 1; i < keyframes.size(); ++i) {
    const KeyframeInput& prev = keyframes[i - 1];
    const KeyframeInput& cur = keyframes[i];
    if (cur.imu_since_previous.empty()) continue;
    PreintegratedImu preint;
    if (cur.preint && !needs_repreintegration(*cur.preint, prev.node.bias_gyro,
                                              prev.node.bias_accel)) {
      preint = *cur.preint;
    } else {
      preint = preintegrate(cur.imu_since_previous, prev.node.bias_gyro, prev.node.bias_accel,
                            ctx.imu_noise, cur.node.t);
    }
    if (!(preint.duration > 0.0)) continue;
    problem.preintegrations.push_back(PreintegrationFactor{prev.node.id, cur.node.id, preint});
  }

  Mat6 prior_cov = Mat6::Zero();
  prior_cov.diagonal() << Vec3::Constant(options.prior_sigma_rot * options.prior_sigma_rot),
      Vec3::Constant(options.prior_sigma_pos * options.prior_sigma_pos);
  for (const KeyframeInput& in : keyframes) {
    if (!in.lidar_constrained) continue;
    problem.pose_priors.push_back(LidarPosePrior{in.node.id, in.node.rot, in.node.pos, prior_cov});
  }
  if (problem.pose_priors.empty() && !keyframes.empty()) {
    const KeyframeNode& first = keyframes.front().node;
    problem.pose_priors.push_back(LidarPosePrior{first.id, first.rot, first.pos, prior_cov});
  }
  return problem;
}

double window_cost(const WindowProblem& problem) {
  const Layout layout = make_layout(problem);
  return cost_of(problem, layout, initial_variables(problem, layout));
}

OptimizeResult optimize(const WindowProblem& problem, const WindowOptions& options) {
  const Layout layout = make_layout(problem);
  Variables vars = initial_variables(problem, layout);

  OptimizeResult result;
  double cost = cost_of(problem, layout, vars);
  result.cost_history.push_back(cost);

  double lambda = options.lambda_initial;
  NormalEquations ne = linearize(problem, layout, vars);
  for (int it = 0; it < options.max_iterations && std::isfinite(cost); ++it) {
    result.iterations = it + 1;
    const SchurSolution step = solve_damped(ne, lambda);
    if (!step.ok) {
      lambda *= options.lambda_up;
      continue;
    }
    const Variables trial = apply_step(vars, step);
    const double trial_cost = cost_of(problem, layout, trial);
    if (trial_cost < cost) {
      const double decrease = cost - trial_cost;
      vars = trial;
      cost = trial_cost;
      result.cost_history.push_back(cost);
      lambda *= options.lambda_down;
      ne = linearize(problem, layout, vars);
      if (decrease <= options.relative_tolerance * cost || cost < 1e-20) {
        result.converged = true;
        break;
      }
    } else {
      lambda *= options.lambda_up;
      if (cost < 1e-20) {
        result.converged = true;
        break;
      }
    }
  }

  for (std::size_t k = 0; k < problem.keyframes.size(); ++k) {
    KeyframeNode node = problem.keyframes[k];
    node.rot = vars.keyframes[k].rot;
    node.pos = vars.keyframes[k].pos;
    node.vel = vars.keyframes[k].vel;
    result.keyframes.push_back(std::move(node));
  }
  const std::vector<Mat3> covs = landmark_covariances(ne);
  for (std::size_t l = 0; l < layout.landmark_ids.size(); ++l) {
    const std::int64_t id = layout.landmark_ids[l];
    result.landmarks[id] = WindowLandmark{id, vars.landmarks[l], covs[l]};
  }
  return result;
}

std::size_t merge_back(const OptimizeResult& refined, LandmarkStore& store) {
  std::size_t merged = 0;
  for (const auto& [id, wl] : refined.landmarks) {
    Landmark* lm = store.find(id);
    if (!lm) continue;
    if (!wl.position.allFinite() || !wl.cov.allFinite()) continue;
    // A poorly conditioned landmark block can yield an indefinite marginal.
    if (Eigen::SelfAdjointEigenSolver<Mat3>(wl.cov).eigenvalues().minCoeff() <= 0.0) continue;
    lm->position_world = wl.position;
    lm->cov = wl.cov;
    ++merged;
  }
  return merged;
}

void SlidingWindow::add(KeyframeInput input, const NoiseParams& imu_noise) {
  if (!keyframes_.empty() && !input.imu_since_previous.empty()) {
    const KeyframeNode& prev = keyframes_.back().node;
    input.preint = preintegrate(input.imu_since_previous, prev.bias_gyro, prev.bias_accel,
                                imu_noise, input.node.t);
  }
  keyframes_.push_back(std::move(input));
  while (keyframes_.size() > options_.window_size) keyframes_.pop_front();
}

WindowProblem SlidingWindow::build(const LandmarkStore& store, const WindowContext& ctx) const {
  const std::vector<KeyframeInput> kfs(keyframes_.begin(), keyframes_.end());
  return build_window(kfs, store, ctx, options_);
}

}  // namespace livo
