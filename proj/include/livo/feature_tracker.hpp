#pragma once

// ID-based feature tracking, keyframe selection and the landmark store.
//
// Feature ids are globally unique and supplied with each observation, so
// "tracking" reduces to a lookup. New ids are buffered per keyframe until
// they have two keyframe views, then triangulated from the first and the
// latest view.

#include <cstdint>
#include <map>
#include <unordered_map>
#include <vector>

#include "livo/visual_frontend.hpp"

namespace livo {

class LandmarkStore {
 public:
  const Landmark* find(std::int64_t id) const;
  Landmark* find(std::int64_t id);
  void upsert(const Landmark& lm);
  bool erase(std::int64_t id);
  std::size_t size() const { return landmarks_.size(); }
  bool empty() const { return landmarks_.empty(); }

  /// Ordered by id, so iteration order is deterministic.
  const std::map<std::int64_t, Landmark>& all() const { return landmarks_; }

 private:
  std::map<std::int64_t, Landmark> landmarks_;
};

struct TrackerParams {
  double keyframe_parallax_px = 10.0;
  std::size_t min_tracked = 50;
  /// Pending tracks unseen for this many keyframes are dropped.
  std::int64_t max_pending_age = 20;
  /// Length of Landmark::observing_keyframes kept per landmark.
  std::size_t max_observing_keyframes = 32;
  TriangulationParams triangulation;
};

struct TrackResult {
  std::vector<FeatureObservation> tracked;   // observations of existing landmarks
  std::vector<std::int64_t> untracked_ids;   // not yet triangulated
};

class FeatureTracker {
 public:
  explicit FeatureTracker(CameraIntrinsics K, TrackerParams params = {});

  TrackResult track(const CameraFrame& frame) const;

  /// Mean pixel parallax against the last keyframe over shared ids exceeds
  /// the threshold, or fewer than min_tracked ids are shared.
  bool should_add_keyframe(const CameraFrame& frame) const;

  /// Registers `frame` as keyframe `keyframe_id` seen from `pose`. Returns
  /// the ids of landmarks created by this call.
  std::vector<std::int64_t> add_keyframe(const CameraFrame& frame, const CameraPose& pose,
                                         std::int64_t keyframe_id);

  const LandmarkStore& landmarks() const { return store_; }
  LandmarkStore& landmarks() { return store_; }
  std::size_t pending_count() const { return pending_.size(); }
  const CameraIntrinsics& intrinsics() const { return K_; }

 private:
  struct PendingTrack {
    ViewObservation first;
    ViewObservation latest;
    std::int64_t latest_keyframe = 0;
    int views = 0;
  };

  CameraIntrinsics K_;
  TrackerParams params_;
  LandmarkStore store_;
  std::map<std::int64_t, PendingTrack> pending_;
  std::unordered_map<std::int64_t, Vec2> last_keyframe_pixels_;
  bool has_keyframe_ = false;
};

}  // namespace livo
