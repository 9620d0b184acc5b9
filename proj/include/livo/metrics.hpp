#pragma once

// Trajectory files (TUM layout) and ATE / RPE evaluation.

#include <filesystem>
#include <iosfwd>
#include <vector>

#include "livo/types.hpp"

namespace livo {

struct StampedPose {
  double t = 0.0;
  Mat3 rot = Mat3::Identity();
  Vec3 pos = Vec3::Zero();
};

using Trajectory = std::vector<StampedPose>;

/// One row "t x y z qx qy qz qw" with 17 significant digits.
void write_tum_row(std::ostream& os, const StampedPose& pose);
void write_tum(const std::filesystem::path& path, const Trajectory& traj);

/// Skips blank lines and '#' comments. Throws InputError with the line
/// number on malformed rows or non-increasing timestamps.
Trajectory read_tum(std::istream& is);
Trajectory read_tum(const std::filesystem::path& path);

struct MatchedPair {
  StampedPose est;
  StampedPose gt;
};

/// Nearest ground-truth pose for every estimate within `max_dt` seconds.
std::vector<MatchedPair> associate_poses(const Trajectory& est, const Trajectory& gt,
                                   double max_dt = 0.005);

struct RigidTransform {
  Mat3 rot = Mat3::Identity();
  Vec3 trans = Vec3::Zero();
};

/// Least-squares rigid transform T minimizing sum |T(src_i) - dst_i|^2
/// (closed form via SVD, scale fixed to one).
RigidTransform align_rigid(const std::vector<Vec3>& src, const std::vector<Vec3>& dst);

/// RMSE of translational error after rigid alignment. Needs >= 3 matches;
/// throws InputError otherwise.
double compute_ate(const Trajectory& est, const Trajectory& gt, double max_dt = 0.005);

struct RpeEntry {
  double length = 0.0;           // m
  double translation_pct = 0.0;  // median, % of segment length
  double rotation_deg = 0.0;     // median
  std::size_t segments = 0;
};

/// Relative pose error over every start pose, with segment ends chosen by
/// ground-truth path length. Lengths with no complete segment are omitted.
std::vector<RpeEntry> compute_rpe(const Trajectory& est, const Trajectory& gt,
                                  const std::vector<double>& lengths, double max_dt = 0.005);

inline const std::vector<double> kDefaultRpeLengths = {5.0, 10.0, 15.0, 20.0, 25.0, 30.0};

struct MetricsReport {
  double ate_rmse = 0.0;
  std::size_t matched = 0;
  std::vector<RpeEntry> rpe;
  double final_position_error = 0.0;  // m, unaligned
  double final_attitude_error_deg = 0.0;  // unaligned
};

MetricsReport evaluate(const Trajectory& est, const Trajectory& gt,
                       const std::vector<double>& lengths = kDefaultRpeLengths);

void write_metrics(std::ostream& os, const MetricsReport& report);

}  // namespace livo
