#include "livo/odometry.hpp"

#include <chrono>
#include <cmath>
#include <unordered_set>

#include <Eigen/Eigenvalues>
#include <spdlog/spdlog.h>

#include "livo/errors.hpp"
#include "livo/imu_propagation.hpp"

namespace livo {

namespace {

constexpr double kMaxPropagationStep = 0.1;

double elapsed_ms(std::chrono::steady_clock::time_point since) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - since)
      .count();
}

}  // namespace

Estimator::Estimator(EstimatorConfig cfg)
    : cfg_(std::move(cfg)),
      map_(cfg_.map_voxel),
      tracker_(cfg_.K, cfg_.tracker),
      window_(cfg_.window) {
  if (!cfg_.K.valid()) throw ContractViolation("Estimator: invalid camera intrinsics");
}

Estimator::~Estimator() {
  if (refinement_.valid()) refinement_.wait();
}

void Estimator::initialize(double t, const NavState& x0) {
  t_ = t;
  x_ = x0;
  cov_ = cfg_.initial.covariance();
  initialized_ = true;
  check_health();
}

void Estimator::propagate_to(double t) {
  if (!last_imu_) {
    t_ = std::max(t_, t);
    return;
  }
  const NoiseCovariance Q = cfg_.imu_noise.process_noise();
  while (t - t_ > 0.0) {
    const double dt = std::min(t - t_, kMaxPropagationStep);
    const ProcessJacobians J = error_jacobians(x_, *last_imu_, dt);
    x_ = propagate_state(x_, *last_imu_, dt, cfg_.filter.gravity_world);
    cov_ = propagate_covariance(cov_, J.F_x, J.F_w, Q);
    t_ = (t - t_ <= kMaxPropagationStep) ? t : t_ + dt;
  }
}

void Estimator::check_health() {
  const CovarianceHealth h = covariance_health(cov_);
  if (health_.checks == 0) {
    health_.max_asymmetry = h.asymmetry;
    health_.min_eigenvalue = h.min_eigenvalue;
  } else {
    health_.max_asymmetry = std::max(health_.max_asymmetry, h.asymmetry);
    health_.min_eigenvalue = std::min(health_.min_eigenvalue, h.min_eigenvalue);
  }
  ++health_.checks;
  if (!x_.all_finite() || !cov_.allFinite()) {
    throw NumericalFailure("estimator state became non-finite at t = " + std::to_string(t_));
  }
}

void Estimator::process_imu(const ImuSample& s) {
  if (!initialized_) return;
  if (s.t < t_) {
    spdlog::warn("IMU sample at {} precedes filter time {}, skipped", s.t, t_);
    return;
  }
  if (last_imu_ && cfg_.filter.average_imu_interval) {
    last_imu_->gyro = 0.5 * (last_imu_->gyro + s.gyro);
    last_imu_->accel = 0.5 * (last_imu_->accel + s.accel);
  }
  propagate_to(s.t);
  last_imu_ = s;
  imu_since_keyframe_.push_back(s);
  check_health();
}

std::vector<LidarPoint> Estimator::prepare_scan(const LidarFrame& frame) const {
  const double floor2 = cfg_.min_point_sigma * cfg_.min_point_sigma;
  std::vector<LidarPoint> out;
  std::unordered_set<std::uint64_t> seen;
  const double v = cfg_.scan_voxel;
  for (const LidarPoint& p : frame.points) {
    if (!p.position_lidar.allFinite()) continue;
    if (v > 0.0) {
      auto cell = [&](double c) {
        return static_cast<std::uint64_t>(static_cast<std::int64_t>(std::floor(c / v)) + (1 << 20)) &
               0x1FFFFFu;
      };
      const std::uint64_t key = (cell(p.position_lidar.x()) << 42) |
                                (cell(p.position_lidar.y()) << 21) | cell(p.position_lidar.z());
      if (!seen.insert(key).second) continue;
    }
    LidarPoint q = p;
    const double var = std::max(p.noise_cov.diagonal().mean(), floor2);
    q.noise_cov = Mat3::Identity() * var;
    out.push_back(q);
  }
  return out;
}

void Estimator::process_lidar(const LidarFrame& frame) {
  if (!initialized_ || !cfg_.use_lidar) return;
  if (frame.t < t_) {
    spdlog::warn("LiDAR frame at {} precedes filter time {}, skipped", frame.t, t_);
    return;
  }
  propagate_to(frame.t);

  auto insert_frame = [&]() {
    std::vector<Vec3> world;
    world.reserve(frame.points.size());
    for (const LidarPoint& p : frame.points) world.push_back(transform_to_world(x_, cfg_.filter, p));
    map_.insert(world);
  };

  if (map_.empty()) {
    insert_frame();
    lidar_since_camera_ = true;
    return;
  }

  const auto start = std::chrono::steady_clock::now();
  const std::vector<LidarPoint> scan = prepare_scan(frame);
  // Points on a plane the map has not covered yet can associate to a nearby
  // plane with a perfect fit; an innovation gate against the prior drops them.
  const StateCovariance prior_cov = cov_;
  const double gate2 = cfg_.lidar_innovation_gate * cfg_.lidar_innovation_gate;
  const MeasurementModel model = [&](const NavState& x) {
    std::vector<ResidualBlock> blocks =
        lidar_residual_blocks(x, cfg_.filter, scan, map_, cfg_.association);
    if (gate2 <= 0.0) return blocks;
    std::erase_if(blocks, [&](const ResidualBlock& b) {
      const double s = (b.jacobian * prior_cov * b.jacobian.transpose())(0, 0) + b.noise_cov(0, 0);
      return b.residual[0] * b.residual[0] > gate2 * s;
    });
    return blocks;
  };
  const UpdateResult r =
      iterated_update(x_, cov_, model,
                      UpdateOptions{cfg_.filter.max_update_iterations,
                                    cfg_.filter.convergence_threshold});
  x_ = r.state;
  cov_ = r.covariance;
  insert_frame();
  lidar_since_camera_ = true;

  diagnostics_.push_back(UpdateDiagnostics{frame.t, UpdateKind::kLidar, r.iterations, r.converged,
                                           r.residual_count, r.final_delta_norm,
                                           elapsed_ms(start), map_.size(),
                                           tracker_.landmarks().size()});
  check_health();
}

void Estimator::process_camera(const CameraFrame& input) {
  if (!initialized_ || !cfg_.use_camera) return;
  if (input.t < t_) {
    spdlog::warn("camera frame at {} precedes filter time {}, skipped", input.t, t_);
    return;
  }
  propagate_to(input.t);

  CameraFrame frame = input;
  const Mat2 pixel_cov = Mat2::Identity() * cfg_.pixel_sigma * cfg_.pixel_sigma;
  for (FeatureObservation& o : frame.observations) o.noise_cov = pixel_cov;

  const TrackResult tracked = tracker_.track(frame);
  if (!tracked.tracked.empty()) {
    const auto start = std::chrono::steady_clock::now();
    const LandmarkStore& store = tracker_.landmarks();
    const MeasurementModel model = [&](const NavState& x) {
      std::vector<ResidualBlock> blocks;
      blocks.reserve(tracked.tracked.size());
      for (const FeatureObservation& obs : tracked.tracked) {
        const Landmark* lm = store.find(obs.feature_id);
        try {
          blocks.push_back(visual_residual_block(x, obs, *lm, cfg_.K));
        } catch (const BehindCameraError&) {
        }
      }
      return blocks;
    };
    const UpdateResult r =
        iterated_update(x_, cov_, model,
                        UpdateOptions{cfg_.filter.max_update_iterations,
                                      cfg_.filter.convergence_threshold});
    x_ = r.state;
    cov_ = r.covariance;
    diagnostics_.push_back(UpdateDiagnostics{frame.t, UpdateKind::kCamera, r.iterations,
                                             r.converged, r.residual_count, r.final_delta_norm,
                                             elapsed_ms(start), map_.size(), store.size()});
    check_health();
  }

  if (tracker_.should_add_keyframe(frame)) handle_keyframe(frame);
  lidar_since_camera_ = false;
}

WindowContext Estimator::window_context() const {
  WindowContext ctx;
  ctx.rot_imu_cam = x_.rot_imu_cam;
  ctx.pos_imu_cam = x_.pos_imu_cam;
  ctx.gravity_world = cfg_.filter.gravity_world;
  ctx.K = cfg_.K;
  ctx.imu_noise = cfg_.imu_noise;
  return ctx;
}

void Estimator::handle_keyframe(const CameraFrame& frame) {
  const std::int64_t id = next_keyframe_id_++;
  tracker_.add_keyframe(frame, camera_pose(x_), id);

  KeyframeInput in;
  in.node.id = id;
  in.node.t = frame.t;
  in.node.rot = x_.rot_world_imu;
  in.node.pos = x_.pos_world_imu;
  in.node.vel = x_.vel_world;
  in.node.bias_gyro = x_.bias_gyro;
  in.node.bias_accel = x_.bias_accel;
  in.node.observations = frame.observations;
  in.lidar_constrained = lidar_since_camera_ && cfg_.use_lidar;

  std::vector<ImuSample> keep;
  for (const ImuSample& s : imu_since_keyframe_) {
    if (s.t <= frame.t) in.imu_since_previous.push_back(s);
    if (s.t >= frame.t) keep.push_back(s);
  }
  imu_since_keyframe_ = std::move(keep);
  if (window_.size() == 0) in.imu_since_previous.clear();
  window_.add(std::move(in), cfg_.imu_noise);

  if (!cfg_.window_enabled) return;
  // The refinement launched at the previous keyframe is merged here, so the
  // result never depends on thread timing.
  merge_pending_refinement();
  if (window_.size() < 2) return;
  WindowProblem problem = window_.build(tracker_.landmarks(), window_context());
  if (problem.landmarks.empty()) return;
  refinement_ = std::async(std::launch::async,
                           [p = std::move(problem), opts = cfg_.window]() {
                             return optimize(p, opts);
                           });
}

void Estimator::merge_pending_refinement() {
  if (!refinement_.valid()) return;
  const OptimizeResult refined = refinement_.get();
  merge_back(refined, tracker_.landmarks());
  ++refinements_merged_;
}

void Estimator::finish() { merge_pending_refinement(); }

}  // namespace livo
