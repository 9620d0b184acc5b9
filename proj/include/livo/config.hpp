#pragma once

// INI-style configuration:
//
//   # comment
//   [section]
//   key = value
//
// Vectors are whitespace-separated numbers, rotations are quaternions
// "qx qy qz qw", intervals are "start end" pairs separated by ';'.

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "livo/odometry.hpp"
#include "livo/sim_world.hpp"

namespace livo {

class IniDocument {
 public:
  static IniDocument parse(std::istream& is);
  static IniDocument load(const std::filesystem::path& path);

  bool has(const std::string& section, const std::string& key) const;
  void set(const std::string& section, const std::string& key, const std::string& value);

  /// Missing keys fall back to `fallback`; a missing key without fallback
  /// throws InputError naming "[section] key". Malformed values throw
  /// InputError with the line number.
  double number(const std::string& section, const std::string& key,
                std::optional<double> fallback = std::nullopt) const;
  long long integer(const std::string& section, const std::string& key,
                    std::optional<long long> fallback = std::nullopt) const;
  bool boolean(const std::string& section, const std::string& key,
               std::optional<bool> fallback = std::nullopt) const;
  std::string text(const std::string& section, const std::string& key,
                   std::optional<std::string> fallback = std::nullopt) const;
  Vec3 vec3(const std::string& section, const std::string& key,
            std::optional<Vec3> fallback = std::nullopt) const;
  /// Quaternion "qx qy qz qw" as a rotation matrix. Must be unit length
  /// within 1e-6.
  Mat3 rotation(const std::string& section, const std::string& key,
                std::optional<Mat3> fallback = std::nullopt) const;
  std::vector<Interval> intervals(const std::string& section, const std::string& key) const;

  std::string dump() const;

 private:
  struct Entry {
    std::string value;
    std::size_t line = 0;
  };
  const Entry* find(const std::string& section, const std::string& key) const;
  const Entry& require(const std::string& section, const std::string& key) const;

  std::map<std::string, std::map<std::string, Entry>> sections_;
};

/// Estimator settings. The camera intrinsics and both extrinsics are
/// required; everything else has a default.
EstimatorConfig estimator_config_from(const IniDocument& ini);

/// Simulator settings; every key has a default.
SimConfig sim_config_from(const IniDocument& ini);

/// Full configuration written next to a simulated dataset. Estimator noise
/// is the simulator's truth, floored so zero-noise data stays well posed.
IniDocument render_config(const SimConfig& sim);

std::string format_vec3(const Vec3& v);
std::string format_rotation(const Mat3& R);

}  // namespace livo
