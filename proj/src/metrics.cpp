#include "livo/metrics.hpp"

#include <Eigen/Geometry>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include <spdlog/spdlog.h>

#include "livo/errors.hpp"
#include "livo/manifold.hpp"

namespace livo {

namespace {

double rad_to_deg(double r) { return r * 180.0 / std::numbers::pi; }

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + mid, v.end());
  double m = v[mid];
  if (v.size() % 2 == 0) {
    m = 0.5 * (m + *std::max_element(v.begin(), v.begin() + mid));
  }
  return m;
}

double rotation_angle(const Mat3& R) { return log_so3(normalize_rotation(R)).norm(); }

}  // namespace

void write_tum_row(std::ostream& os, const StampedPose& pose) {
  Eigen::Quaterniond q(pose.rot);
  q.normalize();
  char buf[512];
  std::snprintf(buf, sizeof(buf), "%.17g %.17g %.17g %.17g %.17g %.17g %.17g %.17g\n", pose.t,
                pose.pos.x(), pose.pos.y(), pose.pos.z(), q.x(), q.y(), q.z(), q.w());
  os << buf;
}

void write_tum(const std::filesystem::path& path, const Trajectory& traj) {
  std::ofstream os(path);
  if (!os) throw InputError("cannot open " + path.string() + " for writing");
  os << "# t x y z qx qy qz qw\n";
  for (const StampedPose& p : traj) write_tum_row(os, p);
}

Trajectory read_tum(std::istream& is) {
  Trajectory traj;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream ss(line);
    double v[8];
    for (double& x : v) {
      if (!(ss >> x)) throw InputError("expected 8 numbers per trajectory row", lineno);
    }
    std::string extra;
    if (ss >> extra) throw InputError("trailing data '" + extra + "'", lineno);
    Eigen::Quaterniond q(v[7], v[4], v[5], v[6]);
    if (!(std::abs(q.norm() - 1.0) < 1e-6)) throw InputError("quaternion is not unit length", lineno);
    if (!traj.empty() && !(v[0] > traj.back().t)) {
      throw InputError("timestamps must increase", lineno);
    }
    traj.push_back(StampedPose{v[0], q.normalized().toRotationMatrix(), Vec3(v[1], v[2], v[3])});
  }
  return traj;
}

Trajectory read_tum(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw InputError("cannot open " + path.string());
  try {
    return read_tum(is);
  } catch (const InputError& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

std::vector<MatchedPair> associate_poses(const Trajectory& est, const Trajectory& gt, double max_dt) {
  std::vector<MatchedPair> out;
  if (gt.empty()) return out;
  for (const StampedPose& e : est) {
    auto it = std::lower_bound(gt.begin(), gt.end(), e.t,
                               [](const StampedPose& p, double t) { return p.t < t; });
    const StampedPose* best = nullptr;
    if (it != gt.end()) best = &*it;
    if (it != gt.begin()) {
      const StampedPose* prev = &*(it - 1);
      if (!best || std::abs(prev->t - e.t) < std::abs(best->t - e.t)) best = prev;
    }
    if (best && std::abs(best->t - e.t) <= max_dt) out.push_back(MatchedPair{e, *best});
  }
  return out;
}

RigidTransform align_rigid(const std::vector<Vec3>& src, const std::vector<Vec3>& dst) {
  if (src.size() != dst.size() || src.empty()) {
    throw ContractViolation("align_rigid: point sets must be non-empty and of equal size");
  }
  const double n = static_cast<double>(src.size());
  Vec3 mu_s = Vec3::Zero(), mu_d = Vec3::Zero();
  for (std::size_t i = 0; i < src.size(); ++i) {
    mu_s += src[i];
    mu_d += dst[i];
  }
  mu_s /= n;
  mu_d /= n;
  Mat3 C = Mat3::Zero();
  for (std::size_t i = 0; i < src.size(); ++i) C += (dst[i] - mu_d) * (src[i] - mu_s).transpose();

  Eigen::JacobiSVD<Mat3> svd(C, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 S = Mat3::Identity();
  if ((svd.matrixU() * svd.matrixV().transpose()).determinant() < 0.0) S(2, 2) = -1.0;
  RigidTransform T;
  T.rot = svd.matrixU() * S * svd.matrixV().transpose();
  T.trans = mu_d - T.rot * mu_s;
  return T;
}

double compute_ate(const Trajectory& est, const Trajectory& gt, double max_dt) {
  const std::vector<MatchedPair> pairs = associate_poses(est, gt, max_dt);
  if (pairs.size() < 3) {
    throw InputError("ATE needs at least 3 matched poses, found " + std::to_string(pairs.size()));
  }
  std::vector<Vec3> src, dst;
  for (const MatchedPair& p : pairs) {
    src.push_back(p.est.pos);
    dst.push_back(p.gt.pos);
  }
  const RigidTransform T = align_rigid(src, dst);
  double sq = 0.0;
  for (std::size_t i = 0; i < src.size(); ++i) sq += (T.rot * src[i] + T.trans - dst[i]).squaredNorm();
  return std::sqrt(sq / static_cast<double>(src.size()));
}

std::vector<RpeEntry> compute_rpe(const Trajectory& est, const Trajectory& gt,
                                  const std::vector<double>& lengths, double max_dt) {
  const std::vector<MatchedPair> pairs = associate_poses(est, gt, max_dt);
  std::vector<double> dist(pairs.size(), 0.0);
  for (std::size_t i = 1; i < pairs.size(); ++i) {
    dist[i] = dist[i - 1] + (pairs[i].gt.pos - pairs[i - 1].gt.pos).norm();
  }

  std::vector<RpeEntry> out;
  for (double L : lengths) {
    std::vector<double> trans, rot;
    std::size_t j = 0;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      j = std::max(j, i);
      while (j < pairs.size() && dist[j] - dist[i] < L) ++j;
      if (j >= pairs.size()) break;
      const StampedPose& ei = pairs[i].est;
      const StampedPose& ej = pairs[j].est;
      const StampedPose& gi = pairs[i].gt;
      const StampedPose& gj = pairs[j].gt;
      const Mat3 dR_est = ei.rot.transpose() * ej.rot;
      const Vec3 dp_est = ei.rot.transpose() * (ej.pos - ei.pos);
      const Mat3 dR_gt = gi.rot.transpose() * gj.rot;
      const Vec3 dp_gt = gi.rot.transpose() * (gj.pos - gi.pos);
      // E = T_gt^-1 T_est
      const Mat3 E_rot = dR_gt.transpose() * dR_est;
      const Vec3 E_pos = dR_gt.transpose() * (dp_est - dp_gt);
      trans.push_back(100.0 * E_pos.norm() / L);
      rot.push_back(rad_to_deg(rotation_angle(E_rot)));
    }
    if (trans.empty()) {
      spdlog::warn("RPE: no segment of length {} m, omitted", L);
      continue;
    }
    out.push_back(RpeEntry{L, median(trans), median(rot), trans.size()});
  }
  return out;
}

MetricsReport evaluate(const Trajectory& est, const Trajectory& gt,
                       const std::vector<double>& lengths) {
  MetricsReport r;
  r.ate_rmse = compute_ate(est, gt);
  r.matched = associate_poses(est, gt).size();
  r.rpe = compute_rpe(est, gt, lengths);
  const std::vector<MatchedPair> pairs = associate_poses(est, gt);
  const MatchedPair& last = pairs.back();
  r.final_position_error = (last.est.pos - last.gt.pos).norm();
  r.final_attitude_error_deg = rad_to_deg(rotation_angle(last.gt.rot.transpose() * last.est.rot));
  return r;
}

void write_metrics(std::ostream& os, const MetricsReport& report) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "ate_rmse_m %.9g\nmatched_poses %zu\n", report.ate_rmse,
                report.matched);
  os << buf;
  std::snprintf(buf, sizeof(buf), "final_position_error_m %.9g\nfinal_attitude_error_deg %.9g\n",
                report.final_position_error, report.final_attitude_error_deg);
  os << buf;
  for (const RpeEntry& e : report.rpe) {
    std::snprintf(buf, sizeof(buf), "rpe %.6g m: translation %.6g %% rotation %.6g deg (%zu segments)\n",
                  e.length, e.translation_pct, e.rotation_deg, e.segments);
    os << buf;
  }
}

}  // namespace livo
