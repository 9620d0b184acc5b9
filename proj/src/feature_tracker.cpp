#include "livo/feature_tracker.hpp"

#include <spdlog/spdlog.h>

namespace livo {

const Landmark* LandmarkStore::find(std::int64_t id) const {
  auto it = landmarks_.find(id);
  return it == landmarks_.end() ? nullptr : &it->second;
}

Landmark* LandmarkStore::find(std::int64_t id) {
  auto it = landmarks_.find(id);
  return it == landmarks_.end() ? nullptr : &it->second;
}

void LandmarkStore::upsert(const Landmark& lm) { landmarks_[lm.feature_id] = lm; }

bool LandmarkStore::erase(std::int64_t id) { return landmarks_.erase(id) > 0; }

FeatureTracker::FeatureTracker(CameraIntrinsics K, TrackerParams params)
    : K_(K), params_(params) {}

TrackResult FeatureTracker::track(const CameraFrame& frame) const {
  TrackResult out;
  for (const FeatureObservation& obs : frame.observations) {
    if (store_.find(obs.feature_id)) {
      out.tracked.push_back(obs);
    } else {
      out.untracked_ids.push_back(obs.feature_id);
    }
  }
  return out;
}

bool FeatureTracker::should_add_keyframe(const CameraFrame& frame) const {
  if (!has_keyframe_) return true;
  std::size_t shared = 0;
  double parallax = 0.0;
  for (const FeatureObservation& obs : frame.observations) {
    auto it = last_keyframe_pixels_.find(obs.feature_id);
    if (it == last_keyframe_pixels_.end()) continue;
    ++shared;
    parallax += (obs.pixel - it->second).norm();
  }
  if (shared < params_.min_tracked) return true;
  return parallax / static_cast<double>(shared) > params_.keyframe_parallax_px;
}

std::vector<std::int64_t> FeatureTracker::add_keyframe(const CameraFrame& frame,
                                                       const CameraPose& pose,
                                                       std::int64_t keyframe_id) {
  std::vector<std::int64_t> created;
  last_keyframe_pixels_.clear();
  has_keyframe_ = true;

  for (const FeatureObservation& obs : frame.observations) {
    last_keyframe_pixels_[obs.feature_id] = obs.pixel;

    if (Landmark* lm = store_.find(obs.feature_id)) {
      lm->observing_keyframes.push_back(keyframe_id);
      if (lm->observing_keyframes.size() > params_.max_observing_keyframes) {
        lm->observing_keyframes.erase(lm->observing_keyframes.begin());
      }
      continue;
    }

    const ViewObservation view{pose, obs.pixel};
    auto [it, inserted] = pending_.try_emplace(obs.feature_id);
    PendingTrack& track = it->second;
    if (inserted) {
      track.first = view;
      track.latest = view;
      track.latest_keyframe = keyframe_id;
      track.views = 1;
      continue;
    }
    track.latest = view;
    track.latest_keyframe = keyframe_id;
    ++track.views;

    try {
      const TriangulatedPoint p = triangulate(track.first, track.latest, K_, params_.triangulation);
      Landmark lm;
      lm.feature_id = obs.feature_id;
      lm.position_world = p.position_world;
      lm.cov = p.cov;
      lm.observing_keyframes.push_back(keyframe_id);
      store_.upsert(lm);
      pending_.erase(it);
      created.push_back(obs.feature_id);
    } catch (const TriangulationError& e) {
      // Baseline may still grow; a divergent pair restarts from this view.
      if (e.kind() == TriangulationError::Kind::kDivergentRays) {
        track.first = view;
        track.views = 1;
      }
    }
  }

  for (auto it = pending_.begin(); it != pending_.end();) {
    if (keyframe_id - it->second.latest_keyframe > params_.max_pending_age) {
      it = pending_.erase(it);
    } else {
      ++it;
    }
  }
  spdlog::debug("keyframe {}: {} new landmarks, {} pending, {} total", keyframe_id,
                created.size(), pending_.size(), store_.size());
  return created;
}

}  // namespace livo
