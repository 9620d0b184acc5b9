#include <gtest/gtest.h>

#include <random>

#include "livo/manifold.hpp"
#include "livo/sim_world.hpp"
#include "livo/sliding_window.hpp"

using namespace livo;

namespace {

// Keyframes sampled from the analytic circle with exact pixel observations of
// the room landmarks.
struct Scene {
  SimConfig sim;
  WorldModel world;
  std::vector<KeyframeInput> keyframes;
  LandmarkStore store;
  WindowContext ctx;
};

Scene make_scene(int count, double spacing, bool with_imu, bool lidar) {
  Scene s;
  s.sim.imu_noise = NoiseParams{0, 0, 0, 0};
  s.sim.trajectory.duration = count * spacing + 0.1;
  s.world = make_room_world(s.sim.world, 3);
  s.ctx.rot_imu_cam = s.sim.rot_imu_cam;
  s.ctx.pos_imu_cam = s.sim.pos_imu_cam;
  s.ctx.gravity_world = s.sim.gravity_world;
  s.ctx.K = s.sim.K;

  const std::vector<ImuSample> imu = synthesize_imu(s.sim);
  for (int k = 0; k < count; ++k) {
    const double t = k * spacing;
    const TrajectoryPoint tp = evaluate_trajectory(s.sim.trajectory, t);
    KeyframeInput in;
    in.node.id = k;
    in.node.t = t;
    in.node.rot = tp.rot;
    in.node.pos = tp.pos;
    in.node.vel = tp.vel;
    in.lidar_constrained = lidar;
    NavState x;
    x.rot_world_imu = tp.rot;
    x.pos_world_imu = tp.pos;
    x.rot_imu_cam = s.ctx.rot_imu_cam;
    x.pos_imu_cam = s.ctx.pos_imu_cam;
    for (std::size_t id = 0; id < s.world.landmarks.size(); ++id) {
      const Vec3 pc = world_to_camera(x, s.world.landmarks[id]);
      if (pc.z() < 0.5) continue;
      const Vec2 px = project(pc, s.ctx.K);
      if (!s.ctx.K.in_image(px)) continue;
      in.node.observations.push_back(
          FeatureObservation{static_cast<std::int64_t>(id), px, Mat2::Identity()});
    }
    if (with_imu && k > 0) {
      for (const ImuSample& u : imu)
        if (u.t >= t - spacing - 1e-9 && u.t < t - 1e-9) in.imu_since_previous.push_back(u);
    }
    s.keyframes.push_back(std::move(in));
  }
  for (std::size_t id = 0; id < s.world.landmarks.size(); ++id) {
    Landmark lm;
    lm.feature_id = static_cast<std::int64_t>(id);
    lm.position_world = s.world.landmarks[id];
    lm.cov = Mat3::Identity() * 0.25;
    s.store.upsert(lm);
  }
  return s;
}

double max_landmark_error(const OptimizeResult& r, const WorldModel& world) {
  double worst = 0.0;
  for (const auto& [id, lm] : r.landmarks) {
    worst = std::max(worst, (lm.position - world.landmarks[id]).norm());
  }
  return worst;
}

}  // namespace

TEST(BuildWindow, TwoKeyframesWithoutSharedLandmarks) {
  Scene s = make_scene(2, 0.5, true, true);
  LandmarkStore empty;
  const WindowProblem p = build_window(s.keyframes, empty, s.ctx);
  EXPECT_EQ(p.keyframes.size(), 2u);
  EXPECT_EQ(p.preintegrations.size(), 1u);
  EXPECT_EQ(p.pose_priors.size(), 2u);
  EXPECT_TRUE(p.landmarks.empty());
  EXPECT_TRUE(p.reprojections.empty());
}

TEST(BuildWindow, LandmarksNeedTwoViews) {
  Scene s = make_scene(2, 0.5, false, true);
  // Keep one landmark only in the first keyframe.
  const std::int64_t lone = s.keyframes[0].node.observations.front().feature_id;
  auto& obs1 = s.keyframes[1].node.observations;
  std::erase_if(obs1, [&](const FeatureObservation& o) { return o.feature_id == lone; });
  const WindowProblem p = build_window(s.keyframes, s.store, s.ctx);
  EXPECT_FALSE(p.landmarks.empty());
  EXPECT_EQ(p.landmarks.count(lone), 0u);
  for (const ReprojectionFactor& f : p.reprojections) EXPECT_NE(f.landmark_id, lone);
  EXPECT_EQ(p.reprojections.size(), 2 * p.landmarks.size());
}

TEST(BuildWindow, GaugePriorWithoutLidar) {
  Scene s = make_scene(3, 0.3, false, false);
  const WindowProblem p = build_window(s.keyframes, s.store, s.ctx);
  ASSERT_EQ(p.pose_priors.size(), 1u);
  EXPECT_EQ(p.pose_priors[0].keyframe_id, 0);
}

TEST(SlidingWindow, EvictsOldestBeyondSize) {
  Scene s = make_scene(4, 0.3, true, true);
  WindowOptions opts;
  opts.window_size = 3;
  SlidingWindow w(opts);
  for (const KeyframeInput& in : s.keyframes) w.add(in, NoiseParams{});
  ASSERT_EQ(w.size(), 3u);
  EXPECT_EQ(w.keyframes().front().node.id, 1);
  EXPECT_TRUE(w.keyframes().back().preint.has_value());
  const WindowProblem p = w.build(s.store, s.ctx);
  EXPECT_EQ(p.preintegrations.size(), 2u);
  for (const ReprojectionFactor& f : p.reprojections) EXPECT_NE(f.keyframe_id, 0);
}

TEST(Optimize, ExactWindowStaysAtTruth) {
  Scene s = make_scene(4, 0.4, false, true);
  const WindowProblem p = build_window(s.keyframes, s.store, s.ctx);
  ASSERT_GT(p.landmarks.size(), 20u);
  EXPECT_LT(window_cost(p), 1e-10);
  const OptimizeResult r = optimize(p);
  EXPECT_LT(r.cost_history.back(), 1e-10);
  EXPECT_LT(max_landmark_error(r, s.world), 1e-6);
}

TEST(Optimize, PerturbedLandmarksReconverge) {
  Scene s = make_scene(5, 0.4, true, true);
  std::mt19937_64 rng(71);
  std::normal_distribution<double> g(0.0, 1.0);
  WindowProblem p = build_window(s.keyframes, s.store, s.ctx);
  for (auto& [id, lm] : p.landmarks) {
    lm.position += Vec3(g(rng), g(rng), g(rng)).normalized() * 0.5;
  }
  const OptimizeResult r = optimize(p);
  for (std::size_t i = 1; i < r.cost_history.size(); ++i) {
    EXPECT_LE(r.cost_history[i], r.cost_history[i - 1]);
  }
  EXPECT_LT(max_landmark_error(r, s.world), 1e-3);
  for (std::size_t k = 0; k < r.keyframes.size(); ++k) {
    EXPECT_LT((r.keyframes[k].pos - s.keyframes[k].node.pos).norm(), 1e-3);
  }
}

TEST(Optimize, StiffGaugeKeepsPoseFixed) {
  Scene s = make_scene(2, 0.5, false, true);
  WindowOptions opts;
  opts.prior_sigma_rot = 1e-9;
  opts.prior_sigma_pos = 1e-9;
  WindowProblem p = build_window(s.keyframes, s.store, s.ctx, opts);
  for (auto& [id, lm] : p.landmarks) lm.position += Vec3(0.1, -0.1, 0.05);
  const OptimizeResult r = optimize(p, opts);
  for (std::size_t k = 0; k < r.keyframes.size(); ++k) {
    EXPECT_LT((r.keyframes[k].pos - s.keyframes[k].node.pos).norm(), 1e-9);
  }
  EXPECT_LT(max_landmark_error(r, s.world), 1e-3);
}

TEST(MergeBack, ReplacesSurvivorsAndSkipsEvicted) {
  LandmarkStore store;
  Landmark a;
  a.feature_id = 1;
  store.upsert(a);
  const LandmarkStore before = store;

  OptimizeResult none;
  EXPECT_EQ(merge_back(none, store), 0u);
  EXPECT_EQ(store.find(1)->position_world, before.find(1)->position_world);

  OptimizeResult r;
  r.landmarks[1] = WindowLandmark{1, Vec3(1, 2, 3), Mat3::Identity() * 0.01};
  r.landmarks[2] = WindowLandmark{2, Vec3(4, 5, 6), Mat3::Identity() * 0.01};
  EXPECT_EQ(merge_back(r, store), 1u);
  EXPECT_EQ(store.find(1)->position_world, Vec3(1, 2, 3));
  EXPECT_EQ(store.find(2), nullptr);

  r.landmarks[1].cov(0, 0) = -1.0;
  r.landmarks[1].position = Vec3(7, 7, 7);
  EXPECT_EQ(merge_back(r, store), 0u);
  EXPECT_EQ(store.find(1)->position_world, Vec3(1, 2, 3));
}
