#pragma once

// Line-oriented dataset files.
//
//   # livo-dataset v1
//   GT t px py pz qx qy qz qw vx vy vz
//   IMU t gx gy gz ax ay az
//   LIDAR t n  x y z sigma  (n times)
//   CAMERA t n  id u v  (n times)
//
// Records are sorted by time; records sharing a timestamp appear in the
// order GT, IMU, LIDAR, CAMERA. Numbers use 17 significant digits so a
// write/read round trip is exact.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <vector>

#include "livo/sim_world.hpp"

namespace livo {

inline constexpr const char* kDatasetHeader = "# livo-dataset v1";

/// Same-timestamp ordering rank.
enum class RecordKind : std::uint8_t { kGroundTruth = 0, kImu = 1, kLidar = 2, kCamera = 3 };

struct RecordRef {
  double t = 0.0;
  RecordKind kind = RecordKind::kImu;
  std::size_t index = 0;  // into the matching SensorStreams vector
};

/// Every record of `s` in replay order.
std::vector<RecordRef> replay_order(const SensorStreams& s);

void write_dataset(std::ostream& os, const SensorStreams& s);
void write_dataset(const std::filesystem::path& path, const SensorStreams& s);

/// Throws InputError naming the line for malformed records, unknown tags, a
/// missing header, or a record that breaks the ordering.
SensorStreams read_dataset(std::istream& is);
SensorStreams read_dataset(const std::filesystem::path& path);

}  // namespace livo
