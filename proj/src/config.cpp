#include "livo/config.hpp"

#include <Eigen/Geometry>
#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "livo/errors.hpp"

namespace livo {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string key_name(const std::string& section, const std::string& key) {
  return "[" + section + "] " + key;
}

std::vector<double> parse_numbers(const std::string& value, std::size_t line,
                                  const std::string& name) {
  std::vector<double> out;
  std::istringstream ss(value);
  std::string tok;
  while (ss >> tok) {
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc() || ptr != tok.data() + tok.size()) {
      throw InputError(name + ": invalid number '" + tok + "'", line);
    }
    out.push_back(v);
  }
  return out;
}

std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

std::string format_vec3(const Vec3& v) {
  return format_number(v.x()) + " " + format_number(v.y()) + " " + format_number(v.z());
}

std::string format_rotation(const Mat3& R) {
  Eigen::Quaterniond q(R);
  q.normalize();
  return format_number(q.x()) + " " + format_number(q.y()) + " " + format_number(q.z()) + " " +
         format_number(q.w());
}

IniDocument IniDocument::parse(std::istream& is) {
  IniDocument doc;
  std::string line;
  std::string section;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const std::string s = trim(line);
    if (s.empty() || s[0] == '#' || s[0] == ';') continue;
    if (s.front() == '[') {
      if (s.back() != ']') throw InputError("unterminated section header", lineno);
      section = trim(s.substr(1, s.size() - 2));
      if (section.empty()) throw InputError("empty section name", lineno);
      doc.sections_[section];
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw InputError("expected 'key = value'", lineno);
    if (section.empty()) throw InputError("key outside of any [section]", lineno);
    const std::string key = trim(s.substr(0, eq));
    if (key.empty()) throw InputError("empty key", lineno);
    auto& entries = doc.sections_[section];
    if (entries.count(key)) throw InputError("duplicate key " + key_name(section, key), lineno);
    entries[key] = Entry{trim(s.substr(eq + 1)), lineno};
  }
  return doc;
}

IniDocument IniDocument::load(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw InputError("cannot open config " + path.string());
  try {
    return parse(is);
  } catch (const InputError& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

bool IniDocument::has(const std::string& section, const std::string& key) const {
  return find(section, key) != nullptr;
}

void IniDocument::set(const std::string& section, const std::string& key,
                      const std::string& value) {
  sections_[section][key] = Entry{value, 0};
}

const IniDocument::Entry* IniDocument::find(const std::string& section,
                                            const std::string& key) const {
  auto s = sections_.find(section);
  if (s == sections_.end()) return nullptr;
  auto k = s->second.find(key);
  return k == s->second.end() ? nullptr : &k->second;
}

const IniDocument::Entry& IniDocument::require(const std::string& section,
                                               const std::string& key) const {
  const Entry* e = find(section, key);
  if (!e) throw InputError("missing config key " + key_name(section, key));
  return *e;
}

double IniDocument::number(const std::string& section, const std::string& key,
                           std::optional<double> fallback) const {
  if (!has(section, key) && fallback) return *fallback;
  const Entry& e = require(section, key);
  const auto v = parse_numbers(e.value, e.line, key_name(section, key));
  if (v.size() != 1) throw InputError(key_name(section, key) + ": expected one number", e.line);
  return v[0];
}

long long IniDocument::integer(const std::string& section, const std::string& key,
                               std::optional<long long> fallback) const {
  if (!has(section, key) && fallback) return *fallback;
  const Entry& e = require(section, key);
  long long v = 0;
  const auto [ptr, ec] = std::from_chars(e.value.data(), e.value.data() + e.value.size(), v);
  if (ec != std::errc() || ptr != e.value.data() + e.value.size()) {
    throw InputError(key_name(section, key) + ": expected an integer", e.line);
  }
  return v;
}

bool IniDocument::boolean(const std::string& section, const std::string& key,
                          std::optional<bool> fallback) const {
  if (!has(section, key) && fallback) return *fallback;
  const Entry& e = require(section, key);
  if (e.value == "true" || e.value == "1" || e.value == "yes") return true;
  if (e.value == "false" || e.value == "0" || e.value == "no") return false;
  throw InputError(key_name(section, key) + ": expected true or false", e.line);
}

std::string IniDocument::text(const std::string& section, const std::string& key,
                              std::optional<std::string> fallback) const {
  if (!has(section, key) && fallback) return *fallback;
  return require(section, key).value;
}

Vec3 IniDocument::vec3(const std::string& section, const std::string& key,
                       std::optional<Vec3> fallback) const {
  if (!has(section, key) && fallback) return *fallback;
  const Entry& e = require(section, key);
  const auto v = parse_numbers(e.value, e.line, key_name(section, key));
  if (v.size() != 3) throw InputError(key_name(section, key) + ": expected 3 numbers", e.line);
  return Vec3(v[0], v[1], v[2]);
}

Mat3 IniDocument::rotation(const std::string& section, const std::string& key,
                           std::optional<Mat3> fallback) const {
  if (!has(section, key) && fallback) return *fallback;
  const Entry& e = require(section, key);
  const auto v = parse_numbers(e.value, e.line, key_name(section, key));
  if (v.size() != 4) {
    throw InputError(key_name(section, key) + ": expected quaternion qx qy qz qw", e.line);
  }
  const Eigen::Quaterniond q(v[3], v[0], v[1], v[2]);
  if (!(std::abs(q.norm() - 1.0) < 1e-6)) {
    throw InputError(key_name(section, key) + ": quaternion is not unit length", e.line);
  }
  return q.normalized().toRotationMatrix();
}

std::vector<Interval> IniDocument::intervals(const std::string& section,
                                             const std::string& key) const {
  std::vector<Interval> out;
  const Entry* e = find(section, key);
  if (!e) return out;
  std::istringstream ss(e->value);
  std::string part;
  while (std::getline(ss, part, ';')) {
    if (trim(part).empty()) continue;
    const auto v = parse_numbers(part, e->line, key_name(section, key));
    if (v.size() != 2 || v[1] < v[0]) {
      throw InputError(key_name(section, key) + ": expected 'start end' pairs", e->line);
    }
    out.push_back(Interval{v[0], v[1]});
  }
  return out;
}

std::string IniDocument::dump() const {
  std::ostringstream os;
  bool first = true;
  for (const auto& [section, entries] : sections_) {
    if (!first) os << '\n';
    first = false;
    os << '[' << section << "]\n";
    for (const auto& [key, entry] : entries) os << key << " = " << entry.value << '\n';
  }
  return os.str();
}

EstimatorConfig estimator_config_from(const IniDocument& ini) {
  EstimatorConfig c;
  // Required: the estimator cannot guess the sensor geometry.
  c.K.fx = ini.number("camera", "fx");
  c.K.fy = ini.number("camera", "fy");
  c.K.cx = ini.number("camera", "cx");
  c.K.cy = ini.number("camera", "cy");
  c.K.width = static_cast<int>(ini.integer("camera", "width"));
  c.K.height = static_cast<int>(ini.integer("camera", "height"));
  if (!c.K.valid()) throw InputError("[camera] intrinsics are invalid");
  c.rot_imu_cam = ini.rotation("extrinsics", "rot_imu_cam");
  c.pos_imu_cam = ini.vec3("extrinsics", "pos_imu_cam");
  c.filter.rot_imu_lidar = ini.rotation("extrinsics", "rot_imu_lidar");
  c.filter.pos_imu_lidar = ini.vec3("extrinsics", "pos_imu_lidar");

  c.pixel_sigma = ini.number("camera", "pixel_sigma", c.pixel_sigma);

  c.imu_noise.sigma_gyro = ini.number("imu", "sigma_gyro", c.imu_noise.sigma_gyro);
  c.imu_noise.sigma_accel = ini.number("imu", "sigma_accel", c.imu_noise.sigma_accel);
  c.imu_noise.sigma_bias_gyro_walk =
      ini.number("imu", "sigma_bias_gyro_walk", c.imu_noise.sigma_bias_gyro_walk);
  c.imu_noise.sigma_bias_accel_walk =
      ini.number("imu", "sigma_bias_accel_walk", c.imu_noise.sigma_bias_accel_walk);

  c.filter.gravity_world = ini.vec3("filter", "gravity", c.filter.gravity_world);
  c.filter.max_update_iterations =
      static_cast<int>(ini.integer("filter", "max_iterations", c.filter.max_update_iterations));
  c.filter.convergence_threshold =
      ini.number("filter", "convergence_threshold", c.filter.convergence_threshold);
  c.filter.average_imu_interval =
      ini.boolean("filter", "average_imu_interval", c.filter.average_imu_interval);
  c.initial.rotation = ini.number("filter", "init_sigma_rot", c.initial.rotation);
  c.initial.position = ini.number("filter", "init_sigma_pos", c.initial.position);
  c.initial.extrinsic_rotation =
      ini.number("filter", "init_sigma_ext_rot", c.initial.extrinsic_rotation);
  c.initial.extrinsic_position =
      ini.number("filter", "init_sigma_ext_pos", c.initial.extrinsic_position);
  c.initial.velocity = ini.number("filter", "init_sigma_vel", c.initial.velocity);
  c.initial.bias_gyro = ini.number("filter", "init_sigma_bias_gyro", c.initial.bias_gyro);
  c.initial.bias_accel = ini.number("filter", "init_sigma_bias_accel", c.initial.bias_accel);

  c.filter.imu_rate_hz = ini.number("rates", "imu", c.filter.imu_rate_hz);
  c.filter.lidar_rate_hz = ini.number("rates", "lidar", c.filter.lidar_rate_hz);
  c.filter.camera_rate_hz = ini.number("rates", "camera", c.filter.camera_rate_hz);

  c.map_voxel = ini.number("lidar", "map_voxel", c.map_voxel);
  c.scan_voxel = ini.number("lidar", "scan_voxel", c.scan_voxel);
  c.min_point_sigma = ini.number("lidar", "min_point_sigma", c.min_point_sigma);
  c.lidar_innovation_gate = ini.number("lidar", "innovation_gate", c.lidar_innovation_gate);
  c.association.neighbors =
      static_cast<std::size_t>(ini.integer("lidar", "neighbors", 5));
  c.association.max_neighbor_distance =
      ini.number("lidar", "max_neighbor_distance", c.association.max_neighbor_distance);
  c.association.max_fit_residual =
      ini.number("lidar", "max_fit_residual", c.association.max_fit_residual);

  c.tracker.keyframe_parallax_px =
      ini.number("tracker", "keyframe_parallax_px", c.tracker.keyframe_parallax_px);
  c.tracker.min_tracked = static_cast<std::size_t>(
      ini.integer("tracker", "min_tracked", static_cast<long long>(c.tracker.min_tracked)));
  c.tracker.triangulation.min_baseline =
      ini.number("tracker", "min_baseline", c.tracker.triangulation.min_baseline);
  c.tracker.triangulation.min_ray_angle_deg =
      ini.number("tracker", "min_ray_angle_deg", c.tracker.triangulation.min_ray_angle_deg);
  c.tracker.triangulation.sigma_scale =
      ini.number("tracker", "sigma_scale", c.tracker.triangulation.sigma_scale);

  c.window_enabled = ini.boolean("window", "enabled", c.window_enabled);
  c.window.window_size = static_cast<std::size_t>(
      ini.integer("window", "size", static_cast<long long>(c.window.window_size)));
  c.window.prior_sigma_rot = ini.number("window", "prior_sigma_rot", c.window.prior_sigma_rot);
  c.window.prior_sigma_pos = ini.number("window", "prior_sigma_pos", c.window.prior_sigma_pos);
  c.window.lambda_initial = ini.number("window", "lambda_initial", c.window.lambda_initial);
  c.window.max_iterations =
      static_cast<int>(ini.integer("window", "max_iterations", c.window.max_iterations));

  c.use_lidar = ini.boolean("estimator", "use_lidar", c.use_lidar);
  c.use_camera = ini.boolean("estimator", "use_camera", c.use_camera);
  return c;
}

SimConfig sim_config_from(const IniDocument& ini) {
  SimConfig c;
  TrajectorySpec& t = c.trajectory;
  t.kind = trajectory_kind_from_string(ini.text("trajectory", "kind", to_string(t.kind)));
  t.amplitude = ini.number("trajectory", "amplitude", t.amplitude);
  t.angular_rate = ini.number("trajectory", "angular_rate", t.angular_rate);
  t.duration = ini.number("trajectory", "duration", t.duration);
  t.center = ini.vec3("trajectory", "center", t.center);
  t.yaw_amplitude = ini.number("trajectory", "yaw_amplitude", t.yaw_amplitude);
  t.yaw_frequency = ini.number("trajectory", "yaw_frequency", t.yaw_frequency);
  if (!(t.duration > 0.0)) throw InputError("[trajectory] duration must be positive");

  c.seed = static_cast<std::uint64_t>(ini.integer("sim", "seed", static_cast<long long>(c.seed)));
  c.imu_noise.sigma_gyro = ini.number("sim", "sigma_gyro", c.imu_noise.sigma_gyro);
  c.imu_noise.sigma_accel = ini.number("sim", "sigma_accel", c.imu_noise.sigma_accel);
  c.imu_noise.sigma_bias_gyro_walk =
      ini.number("sim", "sigma_bias_gyro_walk", c.imu_noise.sigma_bias_gyro_walk);
  c.imu_noise.sigma_bias_accel_walk =
      ini.number("sim", "sigma_bias_accel_walk", c.imu_noise.sigma_bias_accel_walk);
  c.initial_bias_gyro = ini.vec3("sim", "bias_gyro", c.initial_bias_gyro);
  c.initial_bias_accel = ini.vec3("sim", "bias_accel", c.initial_bias_accel);
  c.lidar_sigma = ini.number("sim", "lidar_sigma", c.lidar_sigma);
  c.pixel_sigma = ini.number("sim", "pixel_sigma", c.pixel_sigma);
  c.lidar_points_per_plane =
      static_cast<int>(ini.integer("sim", "lidar_points_per_plane", c.lidar_points_per_plane));

  c.world.room_min = ini.vec3("world", "room_min", c.world.room_min);
  c.world.room_max = ini.vec3("world", "room_max", c.world.room_max);
  c.world.wall_landmarks = static_cast<int>(ini.integer("world", "wall_landmarks", c.world.wall_landmarks));
  c.world.floor_landmarks =
      static_cast<int>(ini.integer("world", "floor_landmarks", c.world.floor_landmarks));
  c.world.ceiling_landmarks =
      static_cast<int>(ini.integer("world", "ceiling_landmarks", c.world.ceiling_landmarks));

  c.imu_rate_hz = ini.number("rates", "imu", c.imu_rate_hz);
  c.lidar_rate_hz = ini.number("rates", "lidar", c.lidar_rate_hz);
  c.camera_rate_hz = ini.number("rates", "camera", c.camera_rate_hz);

  c.lidar_fov_deg = ini.number("fov", "lidar_deg", c.lidar_fov_deg);
  c.camera_fov_deg = ini.number("fov", "camera_deg", c.camera_fov_deg);
  c.min_range = ini.number("fov", "min_range", c.min_range);
  c.max_range = ini.number("fov", "max_range", c.max_range);

  c.K.fx = ini.number("camera", "fx", c.K.fx);
  c.K.fy = ini.number("camera", "fy", c.K.fy);
  c.K.cx = ini.number("camera", "cx", c.K.cx);
  c.K.cy = ini.number("camera", "cy", c.K.cy);
  c.K.width = static_cast<int>(ini.integer("camera", "width", c.K.width));
  c.K.height = static_cast<int>(ini.integer("camera", "height", c.K.height));
  c.rot_imu_cam = ini.rotation("extrinsics", "rot_imu_cam", c.rot_imu_cam);
  c.pos_imu_cam = ini.vec3("extrinsics", "pos_imu_cam", c.pos_imu_cam);
  c.rot_imu_lidar = ini.rotation("extrinsics", "rot_imu_lidar", c.rot_imu_lidar);
  c.pos_imu_lidar = ini.vec3("extrinsics", "pos_imu_lidar", c.pos_imu_lidar);
  c.gravity_world = ini.vec3("filter", "gravity", c.gravity_world);

  c.blackout.camera = ini.intervals("blackout", "camera");
  c.blackout.lidar = ini.intervals("blackout", "lidar");
  return c;
}

IniDocument render_config(const SimConfig& sim) {
  IniDocument d;
  auto num = [](double v) { return format_number(v); };

  d.set("trajectory", "kind", to_string(sim.trajectory.kind));
  d.set("trajectory", "amplitude", num(sim.trajectory.amplitude));
  d.set("trajectory", "angular_rate", num(sim.trajectory.angular_rate));
  d.set("trajectory", "duration", num(sim.trajectory.duration));
  d.set("trajectory", "center", format_vec3(sim.trajectory.center));
  d.set("trajectory", "yaw_amplitude", num(sim.trajectory.yaw_amplitude));
  d.set("trajectory", "yaw_frequency", num(sim.trajectory.yaw_frequency));

  d.set("sim", "seed", std::to_string(sim.seed));
  d.set("sim", "sigma_gyro", num(sim.imu_noise.sigma_gyro));
  d.set("sim", "sigma_accel", num(sim.imu_noise.sigma_accel));
  d.set("sim", "sigma_bias_gyro_walk", num(sim.imu_noise.sigma_bias_gyro_walk));
  d.set("sim", "sigma_bias_accel_walk", num(sim.imu_noise.sigma_bias_accel_walk));
  d.set("sim", "bias_gyro", format_vec3(sim.initial_bias_gyro));
  d.set("sim", "bias_accel", format_vec3(sim.initial_bias_accel));
  d.set("sim", "lidar_sigma", num(sim.lidar_sigma));
  d.set("sim", "pixel_sigma", num(sim.pixel_sigma));
  d.set("sim", "lidar_points_per_plane", std::to_string(sim.lidar_points_per_plane));

  d.set("world", "room_min", format_vec3(sim.world.room_min));
  d.set("world", "room_max", format_vec3(sim.world.room_max));
  d.set("world", "wall_landmarks", std::to_string(sim.world.wall_landmarks));
  d.set("world", "floor_landmarks", std::to_string(sim.world.floor_landmarks));
  d.set("world", "ceiling_landmarks", std::to_string(sim.world.ceiling_landmarks));

  d.set("rates", "imu", num(sim.imu_rate_hz));
  d.set("rates", "lidar", num(sim.lidar_rate_hz));
  d.set("rates", "camera", num(sim.camera_rate_hz));

  d.set("fov", "lidar_deg", num(sim.lidar_fov_deg));
  d.set("fov", "camera_deg", num(sim.camera_fov_deg));
  d.set("fov", "min_range", num(sim.min_range));
  d.set("fov", "max_range", num(sim.max_range));

  d.set("camera", "fx", num(sim.K.fx));
  d.set("camera", "fy", num(sim.K.fy));
  d.set("camera", "cx", num(sim.K.cx));
  d.set("camera", "cy", num(sim.K.cy));
  d.set("camera", "width", std::to_string(sim.K.width));
  d.set("camera", "height", std::to_string(sim.K.height));
  // Tracked landmarks carry triangulation error the per-pixel noise does not see.
  d.set("camera", "pixel_sigma", num(std::max(2.0 * sim.pixel_sigma, 0.5)));

  d.set("extrinsics", "rot_imu_cam", format_rotation(sim.rot_imu_cam));
  d.set("extrinsics", "pos_imu_cam", format_vec3(sim.pos_imu_cam));
  d.set("extrinsics", "rot_imu_lidar", format_rotation(sim.rot_imu_lidar));
  d.set("extrinsics", "pos_imu_lidar", format_vec3(sim.pos_imu_lidar));

  d.set("imu", "sigma_gyro", num(std::max(sim.imu_noise.sigma_gyro, 1e-3)));
  d.set("imu", "sigma_accel", num(std::max(sim.imu_noise.sigma_accel, 1e-2)));
  d.set("imu", "sigma_bias_gyro_walk", num(std::max(sim.imu_noise.sigma_bias_gyro_walk, 1e-5)));
  d.set("imu", "sigma_bias_accel_walk",
        num(std::max(sim.imu_noise.sigma_bias_accel_walk, 1e-4)));

  d.set("filter", "gravity", format_vec3(sim.gravity_world));

  // Neighbor-to-plane gate scaled to the point noise, capped at the default.
  d.set("lidar", "max_fit_residual",
        num(std::min(AssociationParams{}.max_fit_residual, std::max(2.5 * sim.lidar_sigma, 0.005))));

  auto join = [&](const std::vector<Interval>& iv) {
    std::string s;
    for (const Interval& i : iv) {
      if (!s.empty()) s += "; ";
      s += num(i.start) + " " + num(i.end);
    }
    return s;
  };
  if (!sim.blackout.camera.empty()) d.set("blackout", "camera", join(sim.blackout.camera));
  if (!sim.blackout.lidar.empty()) d.set("blackout", "lidar", join(sim.blackout.lidar));
  return d;
}

}  // namespace livo
