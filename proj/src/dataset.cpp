#include "livo/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <string_view>

#include "livo/errors.hpp"

namespace livo {

namespace {

void append_number(std::string& out, double v) {
  char buf[32];
  const int n = std::snprintf(buf, sizeof(buf), " %.17g", v);
  out.append(buf, static_cast<std::size_t>(n));
}

void append_int(std::string& out, std::int64_t v) {
  out.push_back(' ');
  out += std::to_string(v);
}

// Whitespace tokenizer over one record line.
class Fields {
 public:
  Fields(std::string_view line, std::size_t lineno) : rest_(line), lineno_(lineno) {}

  std::string_view token() {
    const auto b = rest_.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) throw InputError("record ends early", lineno_);
    rest_.remove_prefix(b);
    const auto e = std::min(rest_.find_first_of(" \t\r"), rest_.size());
    std::string_view tok = rest_.substr(0, e);
    rest_.remove_prefix(e);
    return tok;
  }

  double number() {
    const std::string_view tok = token();
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc() || ptr != tok.data() + tok.size() || !std::isfinite(v)) {
      throw InputError("invalid number '" + std::string(tok) + "'", lineno_);
    }
    return v;
  }

  std::int64_t integer() {
    const std::string_view tok = token();
    std::int64_t v = 0;
    const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc() || ptr != tok.data() + tok.size()) {
      throw InputError("invalid integer '" + std::string(tok) + "'", lineno_);
    }
    return v;
  }

  Vec3 vec3() {
    const double x = number();
    const double y = number();
    const double z = number();
    return Vec3(x, y, z);
  }

  void expect_end() {
    if (rest_.find_first_not_of(" \t\r") != std::string_view::npos) {
      throw InputError("trailing data after record", lineno_);
    }
  }

 private:
  std::string_view rest_;
  std::size_t lineno_;
};

}  // namespace

std::vector<RecordRef> replay_order(const SensorStreams& s) {
  std::vector<RecordRef> refs;
  refs.reserve(s.imu.size() + s.lidar.size() + s.camera.size() + s.ground_truth.size());
  for (std::size_t i = 0; i < s.ground_truth.size(); ++i) {
    refs.push_back({s.ground_truth[i].t, RecordKind::kGroundTruth, i});
  }
  for (std::size_t i = 0; i < s.imu.size(); ++i) refs.push_back({s.imu[i].t, RecordKind::kImu, i});
  for (std::size_t i = 0; i < s.lidar.size(); ++i) {
    refs.push_back({s.lidar[i].t, RecordKind::kLidar, i});
  }
  for (std::size_t i = 0; i < s.camera.size(); ++i) {
    refs.push_back({s.camera[i].t, RecordKind::kCamera, i});
  }
  std::stable_sort(refs.begin(), refs.end(), [](const RecordRef& a, const RecordRef& b) {
    if (a.t != b.t) return a.t < b.t;
    return a.kind < b.kind;
  });
  return refs;
}

void write_dataset(std::ostream& os, const SensorStreams& s) {
  os << kDatasetHeader << '\n';
  std::string line;
  for (const RecordRef& r : replay_order(s)) {
    line.clear();
    switch (r.kind) {
      case RecordKind::kGroundTruth: {
        const GroundTruthSample& g = s.ground_truth[r.index];
        line = "GT";
        append_number(line, g.t);
        for (int k = 0; k < 3; ++k) append_number(line, g.pos[k]);
        append_number(line, g.quat.x());
        append_number(line, g.quat.y());
        append_number(line, g.quat.z());
        append_number(line, g.quat.w());
        for (int k = 0; k < 3; ++k) append_number(line, g.vel[k]);
        break;
      }
      case RecordKind::kImu: {
        const ImuSample& m = s.imu[r.index];
        line = "IMU";
        append_number(line, m.t);
        for (int k = 0; k < 3; ++k) append_number(line, m.gyro[k]);
        for (int k = 0; k < 3; ++k) append_number(line, m.accel[k]);
        break;
      }
      case RecordKind::kLidar: {
        const LidarFrame& f = s.lidar[r.index];
        line = "LIDAR";
        append_number(line, f.t);
        append_int(line, static_cast<std::int64_t>(f.points.size()));
        for (const LidarPoint& p : f.points) {
          for (int k = 0; k < 3; ++k) append_number(line, p.position_lidar[k]);
          append_number(line, std::sqrt(p.noise_cov(0, 0)));
        }
        break;
      }
      case RecordKind::kCamera: {
        const CameraFrame& f = s.camera[r.index];
        line = "CAMERA";
        append_number(line, f.t);
        append_int(line, static_cast<std::int64_t>(f.observations.size()));
        for (const FeatureObservation& o : f.observations) {
          append_int(line, o.feature_id);
          append_number(line, o.pixel.x());
          append_number(line, o.pixel.y());
        }
        break;
      }
    }
    line.push_back('\n');
    os << line;
  }
}

void write_dataset(const std::filesystem::path& path, const SensorStreams& s) {
  std::ofstream os(path);
  if (!os) throw InputError("cannot open " + path.string() + " for writing");
  write_dataset(os, s);
}

SensorStreams read_dataset(std::istream& is) {
  SensorStreams s;
  std::string line;
  std::size_t lineno = 0;
  bool have_header = false;
  double last_t = -std::numeric_limits<double>::infinity();
  RecordKind last_kind = RecordKind::kGroundTruth;

  while (std::getline(is, line)) {
    ++lineno;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    if (line[first] == '#') {
      if (!have_header) {
        if (line.substr(first).rfind(kDatasetHeader, 0) != 0) {
          throw InputError("unsupported dataset header '" + line + "'", lineno);
        }
        have_header = true;
      }
      continue;
    }
    if (!have_header) throw InputError("missing '# livo-dataset v1' header", lineno);

    Fields f(line, lineno);
    const std::string_view tag = f.token();
    RecordKind kind;
    double t = 0.0;
    if (tag == "GT") {
      kind = RecordKind::kGroundTruth;
      GroundTruthSample g;
      g.t = t = f.number();
      g.pos = f.vec3();
      const double qx = f.number(), qy = f.number(), qz = f.number(), qw = f.number();
      g.quat = Eigen::Quaterniond(qw, qx, qy, qz);
      if (!(std::abs(g.quat.norm() - 1.0) < 1e-6)) {
        throw InputError("ground-truth quaternion is not unit length", lineno);
      }
      g.vel = f.vec3();
      s.ground_truth.push_back(g);
    } else if (tag == "IMU") {
      kind = RecordKind::kImu;
      ImuSample m;
      m.t = t = f.number();
      m.gyro = f.vec3();
      m.accel = f.vec3();
      s.imu.push_back(m);
    } else if (tag == "LIDAR") {
      kind = RecordKind::kLidar;
      LidarFrame frame;
      frame.t = t = f.number();
      const std::int64_t n = f.integer();
      if (n < 0) throw InputError("negative point count", lineno);
      frame.points.reserve(static_cast<std::size_t>(n));
      for (std::int64_t i = 0; i < n; ++i) {
        LidarPoint p;
        p.position_lidar = f.vec3();
        const double sigma = f.number();
        if (sigma < 0.0) throw InputError("negative point sigma", lineno);
        p.noise_cov = Mat3::Identity() * sigma * sigma;
        frame.points.push_back(p);
      }
      s.lidar.push_back(std::move(frame));
    } else if (tag == "CAMERA") {
      kind = RecordKind::kCamera;
      CameraFrame frame;
      frame.t = t = f.number();
      const std::int64_t n = f.integer();
      if (n < 0) throw InputError("negative observation count", lineno);
      frame.observations.reserve(static_cast<std::size_t>(n));
      for (std::int64_t i = 0; i < n; ++i) {
        FeatureObservation o;
        o.feature_id = f.integer();
        const double u = f.number();
        const double v = f.number();
        o.pixel = Vec2(u, v);
        frame.observations.push_back(o);
      }
      s.camera.push_back(std::move(frame));
    } else {
      throw InputError("unknown record tag '" + std::string(tag) + "'", lineno);
    }
    f.expect_end();

    if (t < last_t || (t == last_t && kind <= last_kind)) {
      throw InputError("record out of order (t = " + std::to_string(t) + ")", lineno);
    }
    last_t = t;
    last_kind = kind;
  }
  if (!have_header) throw InputError("empty dataset: missing '# livo-dataset v1' header");
  return s;
}

SensorStreams read_dataset(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw InputError("cannot open " + path.string());
  try {
    return read_dataset(is);
  } catch (const InputError& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

}  // namespace livo
