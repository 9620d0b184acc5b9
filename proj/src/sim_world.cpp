#include "livo/sim_world.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "livo/errors.hpp"
#include "livo/manifold.hpp"

namespace livo {

namespace {

constexpr double kPi = std::numbers::pi;

enum class StreamTag : std::uint64_t { kWorld = 1, kImu = 2, kLidar = 3, kCamera = 4 };

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

std::mt19937_64 make_rng(std::uint64_t seed, StreamTag tag, std::uint64_t index) {
  const std::uint64_t s =
      splitmix64(splitmix64(splitmix64(seed) ^ static_cast<std::uint64_t>(tag)) ^ index);
  return std::mt19937_64(s);
}

Vec3 gaussian3(std::mt19937_64& rng, double sigma) {
  std::normal_distribution<double> n(0.0, 1.0);
  const double x = n(rng);
  const double y = n(rng);
  const double z = n(rng);
  return Vec3(x, y, z) * sigma;
}

struct Sinusoid {
  double amplitude = 0.0;
  double frequency = 0.0;  // rad/s
  double phase = 0.0;
};

// constant + rate * t + sum of sinusoids, with first and second derivatives.
struct Signal {
  double constant = 0.0;
  double rate = 0.0;
  std::vector<Sinusoid> terms;

  double value(double t) const {
    double v = constant + rate * t;
    for (const auto& s : terms) v += s.amplitude * std::sin(s.frequency * t + s.phase);
    return v;
  }
  double d1(double t) const {
    double v = rate;
    for (const auto& s : terms) v += s.amplitude * s.frequency * std::cos(s.frequency * t + s.phase);
    return v;
  }
  double d2(double t) const {
    double v = 0.0;
    for (const auto& s : terms) {
      v -= s.amplitude * s.frequency * s.frequency * std::sin(s.frequency * t + s.phase);
    }
    return v;
  }
};

struct TrajectorySignals {
  Signal x, y, z, yaw, pitch, roll;
};

TrajectorySignals signals_for(const TrajectorySpec& spec) {
  const double A = spec.amplitude;
  const double W = spec.angular_rate;
  TrajectorySignals s;
  s.x.constant = spec.center.x();
  s.y.constant = spec.center.y();
  s.z.constant = spec.center.z();
  switch (spec.kind) {
    case TrajectoryKind::kStationary:
      break;
    case TrajectoryKind::kCircle:
      s.x.terms = {{A, W, kPi / 2}};
      s.y.terms = {{A, W, 0.0}};
      s.yaw.constant = kPi / 2;
      s.yaw.rate = W;
      break;
    case TrajectoryKind::kFigureEight:
      s.x.terms = {{A, W, 0.0}};
      s.y.terms = {{A / 2, 2 * W, 0.0}};
      s.z.terms = {{0.3, W, 0.0}};
      s.yaw.terms = {{0.5, W, 0.0}};
      s.pitch.terms = {{0.05, W, kPi / 2}};
      s.roll.terms = {{0.05, 2 * W, 0.0}};
      break;
    case TrajectoryKind::kAggressiveSinusoid:
      s.x.terms = {{A, W, 0.0}};
      s.y.terms = {{A / 2, 2 * W, 0.0}};
      s.z.terms = {{0.2, 3 * W, 0.0}};
      s.yaw.terms = {{spec.yaw_amplitude, 2 * kPi * spec.yaw_frequency, 0.0}};
      s.pitch.terms = {{0.15, 2 * kPi * 0.9, 0.0}};
      s.roll.terms = {{0.2, 2 * kPi * 1.1, 0.0}};
      break;
  }
  return s;
}

Mat3 rot_x(double a) { return exp_so3(Vec3::UnitX() * a); }
Mat3 rot_y(double a) { return exp_so3(Vec3::UnitY() * a); }
Mat3 rot_z(double a) { return exp_so3(Vec3::UnitZ() * a); }

bool blocked(const std::vector<Interval>& intervals, double t) {
  for (const Interval& i : intervals) {
    if (i.contains(t)) return true;
  }
  return false;
}

NavState pose_state(const TrajectoryPoint& tp, const Mat3& rot_imu_cam, const Vec3& pos_imu_cam) {
  NavState x;
  x.rot_world_imu = tp.rot;
  x.pos_world_imu = tp.pos;
  x.rot_imu_cam = rot_imu_cam;
  x.pos_imu_cam = pos_imu_cam;
  x.vel_world = tp.vel;
  return x;
}

Plane make_plane(const Vec3& normal, const Vec3& center, const Vec3& u, const Vec3& v,
                 double half_u, double half_v) {
  return Plane{normal, normal.dot(center), center, u, v, half_u, half_v};
}

}  // namespace

std::string to_string(TrajectoryKind kind) {
  switch (kind) {
    case TrajectoryKind::kStationary: return "stationary";
    case TrajectoryKind::kCircle: return "circle";
    case TrajectoryKind::kFigureEight: return "figure-eight";
    case TrajectoryKind::kAggressiveSinusoid: return "aggressive-sinusoid";
  }
  return "unknown";
}

TrajectoryKind trajectory_kind_from_string(const std::string& name) {
  if (name == "stationary") return TrajectoryKind::kStationary;
  if (name == "circle") return TrajectoryKind::kCircle;
  if (name == "figure-eight") return TrajectoryKind::kFigureEight;
  if (name == "aggressive-sinusoid") return TrajectoryKind::kAggressiveSinusoid;
  throw ContractViolation("unknown trajectory kind '" + name + "'");
}

TrajectoryPoint evaluate_trajectory(const TrajectorySpec& spec, double t) {
  const TrajectorySignals s = signals_for(spec);
  TrajectoryPoint out;
  out.pos = Vec3(s.x.value(t), s.y.value(t), s.z.value(t));
  out.vel = Vec3(s.x.d1(t), s.y.d1(t), s.z.d1(t));
  out.acc = Vec3(s.x.d2(t), s.y.d2(t), s.z.d2(t));

  const double yaw = s.yaw.value(t), pitch = s.pitch.value(t), roll = s.roll.value(t);
  const double dyaw = s.yaw.d1(t), dpitch = s.pitch.d1(t), droll = s.roll.d1(t);
  out.rot = rot_z(yaw) * rot_y(pitch) * rot_x(roll);

  // ZYX Euler rates to body angular velocity.
  const double sr = std::sin(roll), cr = std::cos(roll);
  const double sp = std::sin(pitch), cp = std::cos(pitch);
  out.omega_body = Vec3(droll - dyaw * sp, dpitch * cr + dyaw * sr * cp,
                        -dpitch * sr + dyaw * cr * cp);
  return out;
}

WorldModel make_room_world(const WorldSpec& spec, std::uint64_t seed) {
  const Vec3 lo = spec.room_min;
  const Vec3 hi = spec.room_max;
  const Vec3 mid = 0.5 * (lo + hi);
  const Vec3 half = 0.5 * (hi - lo);
  const Vec3 ex = Vec3::UnitX(), ey = Vec3::UnitY(), ez = Vec3::UnitZ();

  WorldModel w;
  // Walls first (x-, x+, y-, y+), then floor and ceiling.
  w.planes.push_back(make_plane(ex, Vec3(lo.x(), mid.y(), mid.z()), ey, ez, half.y(), half.z()));
  w.planes.push_back(make_plane(ex, Vec3(hi.x(), mid.y(), mid.z()), ey, ez, half.y(), half.z()));
  w.planes.push_back(make_plane(ey, Vec3(mid.x(), lo.y(), mid.z()), ex, ez, half.x(), half.z()));
  w.planes.push_back(make_plane(ey, Vec3(mid.x(), hi.y(), mid.z()), ex, ez, half.x(), half.z()));
  w.planes.push_back(make_plane(ez, Vec3(mid.x(), mid.y(), lo.z()), ex, ey, half.x(), half.y()));
  w.planes.push_back(make_plane(ez, Vec3(mid.x(), mid.y(), hi.z()), ex, ey, half.x(), half.y()));

  auto rng = make_rng(seed, StreamTag::kWorld, 0);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  auto sample_on = [&](const Plane& p) {
    // Keep landmarks off the exact edges.
    const double a = unit(rng) * p.half_u * 0.98;
    const double b = unit(rng) * p.half_v * 0.98;
    return Vec3(p.center + a * p.axis_u + b * p.axis_v);
  };

  std::vector<double> wall_area;
  double total_wall = 0.0;
  for (int i = 0; i < 4; ++i) {
    wall_area.push_back(w.planes[i].half_u * w.planes[i].half_v);
    total_wall += wall_area.back();
  }
  std::uniform_real_distribution<double> pick(0.0, total_wall);
  for (int i = 0; i < spec.wall_landmarks; ++i) {
    double r = pick(rng);
    int k = 0;
    while (k < 3 && r > wall_area[k]) r -= wall_area[k++];
    w.landmarks.push_back(sample_on(w.planes[k]));
  }
  for (int i = 0; i < spec.floor_landmarks; ++i) w.landmarks.push_back(sample_on(w.planes[4]));
  for (int i = 0; i < spec.ceiling_landmarks; ++i) w.landmarks.push_back(sample_on(w.planes[5]));
  return w;
}

bool BlackoutSchedule::camera_blocked(double t) const { return blocked(camera, t); }
bool BlackoutSchedule::lidar_blocked(double t) const { return blocked(lidar, t); }

Mat3 SimConfig::default_rot_imu_cam() {
  Mat3 R;
  R << 0, 0, 1,
      -1, 0, 0,
       0, -1, 0;
  return R;
}

std::vector<double> sample_times(double duration, double rate_hz) {
  if (!(rate_hz > 0.0) || duration < 0.0) {
    throw ContractViolation("sample_times: rate must be positive and duration non-negative");
  }
  const auto n = static_cast<std::int64_t>(std::floor(duration * rate_hz + 1e-9));
  std::vector<double> t;
  t.reserve(static_cast<std::size_t>(n + 1));
  for (std::int64_t i = 0; i <= n; ++i) t.push_back(static_cast<double>(i) / rate_hz);
  return t;
}

std::vector<ImuSample> synthesize_imu(const SimConfig& cfg) {
  const std::vector<double> times = sample_times(cfg.trajectory.duration, cfg.imu_rate_hz);
  const double dt = 1.0 / cfg.imu_rate_hz;
  std::vector<ImuSample> out;
  out.reserve(times.size());
  Vec3 bg = cfg.initial_bias_gyro;
  Vec3 ba = cfg.initial_bias_accel;
  for (std::size_t k = 0; k < times.size(); ++k) {
    const TrajectoryPoint tp = evaluate_trajectory(cfg.trajectory, times[k]);
    auto rng = make_rng(cfg.seed, StreamTag::kImu, k);
    const Vec3 ng = gaussian3(rng, cfg.imu_noise.sigma_gyro);
    const Vec3 na = gaussian3(rng, cfg.imu_noise.sigma_accel);
    const Vec3 wbg = gaussian3(rng, cfg.imu_noise.sigma_bias_gyro_walk);
    const Vec3 wba = gaussian3(rng, cfg.imu_noise.sigma_bias_accel_walk);

    ImuSample s;
    s.t = times[k];
    s.gyro = tp.omega_body + bg + ng;
    s.accel = tp.rot.transpose() * (tp.acc - cfg.gravity_world) + ba + na;
    out.push_back(s);

    bg += dt * wbg;
    ba += dt * wba;
  }
  return out;
}

std::vector<LidarFrame> synthesize_lidar(const SimConfig& cfg, const WorldModel& world) {
  const std::vector<double> times = sample_times(cfg.trajectory.duration, cfg.lidar_rate_hz);
  const double cos_half_fov = std::cos(0.5 * cfg.lidar_fov_deg * kPi / 180.0);
  const int n = cfg.lidar_points_per_plane;
  const int max_attempts = 200 * std::max(n, 1);
  const Mat3 cov = Mat3::Identity() * cfg.lidar_sigma * cfg.lidar_sigma;

  std::vector<LidarFrame> out;
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (cfg.blackout.lidar_blocked(times[i])) continue;
    const TrajectoryPoint tp = evaluate_trajectory(cfg.trajectory, times[i]);
    auto rng = make_rng(cfg.seed, StreamTag::kLidar, i);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);

    LidarFrame frame;
    frame.t = times[i];
    for (const Plane& plane : world.planes) {
      std::vector<LidarPoint> pts;
      for (int a = 0; a < max_attempts && static_cast<int>(pts.size()) < n; ++a) {
        // Planes with no hit after a fair number of tries are out of view.
        if (pts.empty() && a >= 20 * n) break;
        const double u = unit(rng) * plane.half_u;
        const double v = unit(rng) * plane.half_v;
        const Vec3 P = plane.center + u * plane.axis_u + v * plane.axis_v;
        const Vec3 p_imu = tp.rot.transpose() * (P - tp.pos);
        const Vec3 p_l = cfg.rot_imu_lidar.transpose() * (p_imu - cfg.pos_imu_lidar);
        const double range = p_l.norm();
        if (range < cfg.min_range || range > cfg.max_range) continue;
        if (p_l.x() < cos_half_fov * range) continue;
        LidarPoint lp;
        lp.position_lidar = p_l + gaussian3(rng, cfg.lidar_sigma);
        lp.noise_cov = cov;
        pts.push_back(lp);
      }
      if (static_cast<int>(pts.size()) == n) {
        frame.points.insert(frame.points.end(), pts.begin(), pts.end());
      }
    }
    if (!frame.points.empty()) out.push_back(std::move(frame));
  }
  return out;
}

std::vector<CameraFrame> synthesize_camera(const SimConfig& cfg, const WorldModel& world) {
  const std::vector<double> times = sample_times(cfg.trajectory.duration, cfg.camera_rate_hz);
  const double cos_half_fov = std::cos(0.5 * cfg.camera_fov_deg * kPi / 180.0);
  const Mat2 cov = Mat2::Identity() * cfg.pixel_sigma * cfg.pixel_sigma;

  std::vector<CameraFrame> out;
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (cfg.blackout.camera_blocked(times[i])) continue;
    const TrajectoryPoint tp = evaluate_trajectory(cfg.trajectory, times[i]);
    const NavState x = pose_state(tp, cfg.rot_imu_cam, cfg.pos_imu_cam);
    auto rng = make_rng(cfg.seed, StreamTag::kCamera, i);
    std::normal_distribution<double> noise(0.0, 1.0);

    CameraFrame frame;
    frame.t = times[i];
    for (std::size_t id = 0; id < world.landmarks.size(); ++id) {
      const Vec3 pc = world_to_camera(x, world.landmarks[id]);
      const double range = pc.norm();
      if (range < cfg.min_range || range > cfg.max_range) continue;
      if (pc.z() < cos_half_fov * range) continue;
      const Vec2 px = project(pc, cfg.K);
      const double nu = noise(rng);
      const double nv = noise(rng);
      const Vec2 observed = px + cfg.pixel_sigma * Vec2(nu, nv);
      if (!cfg.K.in_image(observed)) continue;
      frame.observations.push_back(
          FeatureObservation{static_cast<std::int64_t>(id), observed, cov});
    }
    out.push_back(std::move(frame));
  }
  return out;
}

std::vector<GroundTruthSample> ground_truth(const SimConfig& cfg) {
  std::vector<GroundTruthSample> out;
  for (double t : sample_times(cfg.trajectory.duration, cfg.imu_rate_hz)) {
    const TrajectoryPoint tp = evaluate_trajectory(cfg.trajectory, t);
    Eigen::Quaterniond q(tp.rot);
    q.normalize();
    if (q.w() < 0.0) q.coeffs() = -q.coeffs();
    out.push_back(GroundTruthSample{t, q, tp.pos, tp.vel});
  }
  return out;
}

SensorStreams simulate(const SimConfig& cfg) {
  if (!cfg.K.valid()) throw ContractViolation("simulate: invalid camera intrinsics");
  const WorldModel world = make_room_world(cfg.world, cfg.seed);
  SensorStreams s;
  s.imu = synthesize_imu(cfg);
  s.lidar = synthesize_lidar(cfg, world);
  s.camera = synthesize_camera(cfg, world);
  s.ground_truth = ground_truth(cfg);
  return s;
}

double peak_angular_rate(const TrajectorySpec& spec, double rate_hz) {
  double peak = 0.0;
  for (double t : sample_times(spec.duration, rate_hz)) {
    peak = std::max(peak, evaluate_trajectory(spec, t).omega_body.norm());
  }
  return peak;
}

}  // namespace livo
