// Acceptance suite: one PASS/FAIL line per criterion.
#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include <Eigen/Cholesky>
#include <Eigen/LU>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <numbers>
#include <random>
#include <sstream>
#include <string>

#include "livo/config.hpp"
#include "livo/ieskf.hpp"
#include "livo/jacobian_check.hpp"
#include "livo/manifold.hpp"
#include "livo/metrics.hpp"
#include "livo/pipeline.hpp"
#include "livo/sim_world.hpp"
#include "livo/sliding_window.hpp"
#include "livo/state.hpp"

using namespace livo;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

int failures = 0;

void report(int id, bool ok, const std::string& detail) {
  std::printf("%s criterion %d: %s\n", ok ? "PASS" : "FAIL", id, detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), f, args...);
  return buf;
}

Vec3 random_vec(std::mt19937_64& rng, double s) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  return Vec3(u(rng), u(rng), u(rng)) * s;
}

NavState random_state(std::mt19937_64& rng) {
  NavState x;
  x.rot_world_imu = exp_so3(random_vec(rng, 2.0));
  x.pos_world_imu = random_vec(rng, 3.0);
  x.rot_imu_cam = exp_so3(random_vec(rng, 2.0));
  x.pos_imu_cam = random_vec(rng, 0.2);
  x.vel_world = random_vec(rng, 2.0);
  x.bias_gyro = random_vec(rng, 0.01);
  x.bias_accel = random_vec(rng, 0.1);
  return x;
}

Eigen::MatrixXd random_spd(std::mt19937_64& rng, int n, double floor) {
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::MatrixXd A(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) A(i, j) = g(rng);
  return A * A.transpose() / n + floor * Eigen::MatrixXd::Identity(n, n);
}

Eigen::MatrixXd numeric(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& f) {
  return numerical_jacobian(f, 3, 1e-6);
}

// ---------------------------------------------------------------------------

void criterion_1() {
  const auto start = Clock::now();
  const auto reports = run_jacobian_suites(100, 7, 1e-6);
  const double elapsed = seconds_since(start);
  bool ok = elapsed < 10.0 && reports.size() == 6;
  std::string detail;
  for (const JacobianReport& r : reports) {
    ok = ok && r.instances >= 100 && r.passed(1e-4);
    detail += fmt("%s %.2e; ", r.name.c_str(), r.max_relative_error);
  }
  report(1, ok, detail + fmt("max rel err < 1e-4, %.2f s (< 10 s)", elapsed));
}

void criterion_2() {
  const auto start = Clock::now();
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> mag(0.0, 3.0);
  double roundtrip = 0.0, exp_log = 0.0, jac_inv = 0.0, adjoint = 0.0;
  double id_exp = 0.0, id_log = 0.0, id_vec = 0.0;
  for (int i = 0; i < 10000; ++i) {
    Vec3 r = random_vec(rng, 1.0);
    r = r.normalized() * mag(rng);

    const NavState x = random_state(rng);
    ErrorVector d = ErrorVector::Random();
    d.segment<3>(block::kRot) = random_vec(rng, 1.5);
    d.segment<3>(block::kExtRot) = random_vec(rng, 1.5);
    roundtrip = std::max(roundtrip, (state_boxminus(state_boxplus(x, d), x) - d).norm());

    exp_log = std::max(exp_log, (log_so3(exp_so3(r)) - r).norm());
    jac_inv = std::max(jac_inv,
                       (right_jacobian(r) * right_jacobian_inv(r) - Mat3::Identity()).norm());

    const Mat3 R = exp_so3(r);
    const Vec3 u = random_vec(rng, 1.0);
    adjoint = std::max(adjoint, (R * exp_so3(u) * R.transpose() - exp_so3(R * u)).norm());

    // First-order identities against central differences.
    id_exp = std::max(id_exp, relative_error(right_jacobian(r), numeric([&](const Eigen::VectorXd& e) {
                                               return Eigen::VectorXd(
                                                   log_so3(R.transpose() * exp_so3(r + Vec3(e))));
                                             })));
    id_log = std::max(id_log,
                      relative_error(right_jacobian_inv(r), numeric([&](const Eigen::VectorXd& e) {
                                       return Eigen::VectorXd(log_so3(R * exp_so3(Vec3(e))));
                                     })));
    const Vec3 v = random_vec(rng, 5.0);
    id_vec = std::max(id_vec, relative_error(-R * skew(v), numeric([&](const Eigen::VectorXd& e) {
                                               return Eigen::VectorXd(R * exp_so3(Vec3(e)) * v);
                                             })));
  }
  const double elapsed = seconds_since(start);
  const bool ok = roundtrip < 1e-9 && exp_log < 1e-9 && jac_inv < 1e-9 && adjoint < 1e-12 &&
                  id_exp < 1e-4 && id_log < 1e-4 && id_vec < 1e-4 && elapsed < 5.0;
  report(2, ok,
         fmt("1e4 samples: boxplus/boxminus %.1e, exp/log %.1e, Jr*Jr^-1 %.1e (< 1e-9); "
             "adjoint %.1e (< 1e-12); first-order Jr %.1e, Jr^-1 %.1e, R Exp(d) v %.1e (< 1e-4); "
             "%.2f s (< 5 s)",
             roundtrip, exp_log, jac_inv, adjoint, id_exp, id_log, id_vec, elapsed));
}

void criterion_3() {
  std::mt19937_64 rng(33);
  std::normal_distribution<double> g(0.0, 1.0);
  double map_err = 0.0, gain_err = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const NavState x_hat = random_state(rng);
    ErrorVector offset;
    for (int i = 0; i < kStateDim; ++i) offset[i] = 0.2 * g(rng);
    const NavState x_check = state_boxplus(x_hat, offset);
    const StateCovariance Sigma = random_spd(rng, kStateDim, 0.5);

    std::vector<ResidualBlock> blocks;
    for (int b = 0; b < 12; ++b) {
      const int rows = b < 6 ? 1 : 2;
      ResidualBlock blk;
      blk.kind = b < 6 ? MeasurementKind::kLidar : MeasurementKind::kVisual;
      blk.residual = Eigen::VectorXd::NullaryExpr(rows, [&]() { return g(rng); });
      blk.jacobian = StackedJacobian::NullaryExpr(rows, kStateDim, [&]() { return g(rng); });
      blk.noise_cov = random_spd(rng, rows, 0.5);
      blocks.push_back(blk);
    }
    const StackedSystem sys = build_stacked_system(blocks);
    const PriorTransform prior = prior_transform(x_check, x_hat);
    const ErrorVector e = state_boxminus(x_check, x_hat);
    const UpdateStep step = compute_update_step(sys, prior, Sigma, e);

    // Normal equations of |e + Hcal dx|^2_Sigma + |z + H dx|^2_R.
    const Eigen::MatrixXd R = sys.dense_noise();
    const Eigen::MatrixXd R_inv = R.inverse();
    const StateMatrix Sigma_inv = Sigma.inverse();
    const StateMatrix A = prior.H_cal.transpose() * Sigma_inv * prior.H_cal +
                          sys.H.transpose() * R_inv * sys.H;
    const ErrorVector b =
        -(prior.H_cal.transpose() * Sigma_inv * e + sys.H.transpose() * R_inv * sys.z);
    const ErrorVector dx = A.fullPivLu().solve(b);
    map_err = std::max(map_err, (step.delta - dx).norm() / dx.norm());

    const StateMatrix P = prior.H_cal.inverse() * Sigma * prior.H_cal.inverse().transpose();
    const Eigen::MatrixXd S = sys.H * P * sys.H.transpose() + R;
    const Eigen::MatrixXd K_oracle = P * sys.H.transpose() * S.inverse();
    gain_err = std::max(gain_err, (step.K - K_oracle).norm() / K_oracle.norm());
  }
  report(3, map_err < 1e-8 && gain_err < 1e-8,
         fmt("50 systems: update vs quadratic minimizer %.2e, K vs PH^T(HPH^T+R)^-1 %.2e "
             "(both < 1e-8 relative)",
             map_err, gain_err));
}

// ---------------------------------------------------------------------------

struct Runs {
  std::vector<std::pair<std::string, HealthSummary>> health;
  void add(const std::string& name, const RunResult& r) { health.emplace_back(name, r.health); }
};

EstimatorConfig estimator_for(const SimConfig& sim) {
  std::istringstream is(render_config(sim).dump());
  return estimator_config_from(IniDocument::parse(is));
}

SimConfig noisy_sim(TrajectoryKind kind, double duration) {
  SimConfig sim;
  sim.trajectory.kind = kind;
  sim.trajectory.duration = duration;
  sim.imu_noise.sigma_gyro = 0.005;
  sim.imu_noise.sigma_accel = 0.05;
  sim.lidar_sigma = 0.02;
  sim.pixel_sigma = 1.0;
  return sim;
}

RunResult timed_replay(const SensorStreams& s, const EstimatorConfig& cfg, const RunOptions& o,
                       double& elapsed) {
  const auto start = Clock::now();
  RunResult r = replay(s, cfg, o);
  elapsed = seconds_since(start);
  return r;
}

void write_run(const fs::path& dir, const RunResult& r) {
  fs::create_directories(dir);
  write_tum(dir / "trajectory.txt", r.trajectory);
  if (r.metrics) {
    std::ofstream os(dir / "metrics.txt");
    write_metrics(os, *r.metrics);
  }
}

bool all_finite(const RunResult& r) {
  for (const StampedPose& p : r.trajectory)
    if (!p.pos.allFinite() || !p.rot.allFinite()) return false;
  return true;
}

double max_jump(const Trajectory& t) {
  double worst = 0.0;
  for (std::size_t i = 1; i < t.size(); ++i) worst = std::max(worst, (t[i].pos - t[i - 1].pos).norm());
  return worst;
}

void criterion_4(const fs::path& work, Runs& runs) {
  SimConfig sim;
  sim.trajectory.kind = TrajectoryKind::kCircle;
  sim.trajectory.duration = 10.0;
  sim.imu_noise = NoiseParams{0, 0, 0, 0};
  sim.lidar_sigma = 0.0;
  sim.pixel_sigma = 0.0;
  const SensorStreams s = simulate(sim);
  const EstimatorConfig cfg = estimator_for(sim);

  double elapsed = 0.0, dr_elapsed = 0.0;
  const RunResult fused = timed_replay(s, cfg, {}, elapsed);
  const RunResult dead = timed_replay(s, cfg, RunOptions{true, true}, dr_elapsed);
  runs.add("zero-noise circle", fused);
  runs.add("zero-noise dead reckoning", dead);
  write_run(work / "c4_fused", fused);
  write_run(work / "c4_dead_reckoning", dead);

  const double ate = fused.metrics->ate_rmse;
  const double att = fused.metrics->final_attitude_error_deg;
  const double drift = dead.metrics->final_position_error;
  const bool ok = ate < 1e-2 && att < 0.1 && drift >= 10.0 * ate && elapsed < 30.0;
  report(4, ok,
         fmt("ATE %.4f m (< 0.01), final attitude %.4f deg (< 0.1), dead-reckoning drift "
             "%.4f m = %.1fx ATE (>= 10x), %.1f s (< 30 s)",
             ate, att, drift, drift / ate, elapsed));
}

const RpeEntry* rpe_at(const MetricsReport& m, double length) {
  for (const RpeEntry& e : m.rpe)
    if (std::abs(e.length - length) < 1e-9) return &e;
  return nullptr;
}

void criterion_5(const fs::path& work, Runs& runs) {
  const SimConfig sim = noisy_sim(TrajectoryKind::kFigureEight, 60.0);
  const SensorStreams s = simulate(sim);
  const EstimatorConfig cfg = estimator_for(sim);

  double t_fused = 0.0, t_lidar = 0.0, t_visual = 0.0;
  const RunResult fused = timed_replay(s, cfg, {}, t_fused);
  const RunResult lidar = timed_replay(s, cfg, RunOptions{true, false}, t_lidar);
  const RunResult visual = timed_replay(s, cfg, RunOptions{false, true}, t_visual);
  runs.add("noisy figure-eight fused", fused);
  runs.add("noisy figure-eight lidar-only", lidar);
  runs.add("noisy figure-eight visual-only", visual);
  write_run(work / "c5_fused", fused);
  write_run(work / "c5_lidar_only", lidar);
  write_run(work / "c5_visual_only", visual);

  const RpeEntry* e = rpe_at(*fused.metrics, 10.0);
  const double trans = e ? e->translation_pct : INFINITY;
  const double rot = e ? e->rotation_deg : INFINITY;
  const double a_f = fused.metrics->ate_rmse;
  const double a_l = all_finite(lidar) ? lidar.metrics->ate_rmse : INFINITY;
  const double a_v = all_finite(visual) ? visual.metrics->ate_rmse : INFINITY;
  const bool ok = e && trans < 1.0 && rot < 0.5 && a_f < a_l && a_f < a_v && t_fused < 120.0;
  report(5, ok,
         fmt("RPE@10m %.3f %% (< 1.0), %.3f deg (< 0.5); ATE fused %.4f m < lidar-only %.4f m "
             "and visual-only %.4f m; fused run %.1f s (< 120 s), single-sensor runs %.1f s, %.1f s",
             trans, rot, a_f, a_l, a_v, t_fused, t_lidar, t_visual));
}

void criterion_6(const fs::path& work, Runs& runs) {
  SimConfig sim = noisy_sim(TrajectoryKind::kAggressiveSinusoid, 30.0);
  const double peak = peak_angular_rate(sim.trajectory, sim.imu_rate_hz) * 180.0 / std::numbers::pi;
  const EstimatorConfig cfg = estimator_for(sim);
  double t0 = 0.0, t1 = 0.0;
  const RunResult base = timed_replay(simulate(sim), cfg, {}, t0);
  sim.blackout.camera = {Interval{8.0, 13.0}};
  sim.blackout.lidar = {Interval{18.0, 23.0}};
  const RunResult cut = timed_replay(simulate(sim), cfg, {}, t1);
  runs.add("aggressive baseline", base);
  runs.add("aggressive with blackouts", cut);
  write_run(work / "c6_baseline", base);
  write_run(work / "c6_blackout", cut);

  const bool finite = all_finite(cut) && all_finite(base);
  const double a0 = base.metrics->ate_rmse;
  const double a1 = finite ? cut.metrics->ate_rmse : INFINITY;
  const double jump = max_jump(cut.trajectory);
  const bool ok = peak >= 300.0 && finite && a1 < 5.0 * a0 && jump <= 0.5;
  report(6, ok,
         fmt("peak rate %.0f deg/s (>= 300); camera out 8-13 s, lidar out 18-23 s: ATE %.4f m vs "
             "baseline %.4f m = %.2fx (< 5x), finite %s, max step %.3f m (<= 0.5)",
             peak, a1, a0, a1 / a0, finite ? "yes" : "no", jump));
}

void criterion_7() {
  SimConfig sim;
  sim.imu_noise = NoiseParams{0, 0, 0, 0};
  const int count = 10;
  const double spacing = 0.3;
  sim.trajectory.duration = count * spacing + 0.1;
  const WorldModel world = make_room_world(sim.world, sim.seed);
  WindowContext ctx;
  ctx.rot_imu_cam = sim.rot_imu_cam;
  ctx.pos_imu_cam = sim.pos_imu_cam;
  ctx.gravity_world = sim.gravity_world;
  ctx.K = sim.K;

  const std::vector<ImuSample> imu = synthesize_imu(sim);
  std::vector<KeyframeInput> keyframes;
  for (int k = 0; k < count; ++k) {
    const double t = k * spacing;
    const TrajectoryPoint tp = evaluate_trajectory(sim.trajectory, t);
    KeyframeInput in;
    in.node.id = k;
    in.node.t = t;
    in.node.rot = tp.rot;
    in.node.pos = tp.pos;
    in.node.vel = tp.vel;
    in.lidar_constrained = true;
    NavState x;
    x.rot_world_imu = tp.rot;
    x.pos_world_imu = tp.pos;
    x.rot_imu_cam = ctx.rot_imu_cam;
    x.pos_imu_cam = ctx.pos_imu_cam;
    for (std::size_t id = 0; id < world.landmarks.size(); ++id) {
      const Vec3 pc = world_to_camera(x, world.landmarks[id]);
      if (pc.z() < 0.5) continue;
      const Vec2 px = project(pc, ctx.K);
      if (!ctx.K.in_image(px)) continue;
      in.node.observations.push_back(
          FeatureObservation{static_cast<std::int64_t>(id), px, Mat2::Identity()});
    }
    if (k > 0) {
      for (const ImuSample& u : imu)
        if (u.t >= t - spacing - 1e-9 && u.t < t - 1e-9) in.imu_since_previous.push_back(u);
    }
    keyframes.push_back(std::move(in));
  }

  std::mt19937_64 rng(77);
  std::normal_distribution<double> g(0.0, 1.0);
  LandmarkStore store;
  for (std::size_t id = 0; id < world.landmarks.size(); ++id) {
    Landmark lm;
    lm.feature_id = static_cast<std::int64_t>(id);
    lm.position_world = world.landmarks[id] + Vec3(g(rng), g(rng), g(rng)).normalized() * 0.5;
    lm.cov = Mat3::Identity() * 0.25;
    store.upsert(lm);
  }
  const WindowProblem p = build_window(keyframes, store, ctx);
  double before = 0.0;
  for (const auto& [id, lm] : p.landmarks) before += (lm.position - world.landmarks[id]).norm();
  before /= static_cast<double>(p.landmarks.size());

  const OptimizeResult r = optimize(p);
  double after = 0.0;
  for (const auto& [id, lm] : r.landmarks) after += (lm.position - world.landmarks[id]).norm();
  after /= static_cast<double>(r.landmarks.size());
  bool monotone = true;
  for (std::size_t i = 1; i < r.cost_history.size(); ++i)
    monotone = monotone && r.cost_history[i] <= r.cost_history[i - 1];
  const double reduction = 1.0 - after / before;
  report(7, p.keyframes.size() == 10 && reduction >= 0.9 && monotone,
         fmt("%zu keyframes, %zu landmarks: mean error %.3f m -> %.2e m, reduction %.2f %% "
             "(>= 90 %%), cost non-increasing over %zu accepted steps: %s",
             p.keyframes.size(), p.landmarks.size(), before, after, 100.0 * reduction,
             r.cost_history.size() - 1, monotone ? "yes" : "no"));
}

void criterion_8(const Runs& runs) {
  bool ok = !runs.health.empty();
  double asym = 0.0, min_eig = INFINITY;
  std::size_t checks = 0;
  for (const auto& [name, h] : runs.health) {
    ok = ok && h.healthy(1e-9) && h.checks > 0;
    asym = std::max(asym, h.max_asymmetry);
    min_eig = std::min(min_eig, h.min_eigenvalue);
    checks += h.checks;
  }
  report(8, ok,
         fmt("%zu runs, %zu checks: max asymmetry %.2e (< 1e-9), min eigenvalue %.2e (> -1e-9)",
             runs.health.size(), checks, asym, min_eig));
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(is), {});
}

int shell(const std::string& cmd) { return std::system(cmd.c_str()); }

void criterion_9(const fs::path& work, const std::string& cli) {
  const fs::path dir = work / "c9";
  fs::remove_all(dir);
  fs::create_directories(dir);
  SimConfig sim = noisy_sim(TrajectoryKind::kFigureEight, 8.0);
  {
    std::ofstream os(dir / "scenario.ini");
    os << render_config(sim).dump();
  }
  bool ok = true;
  for (const char* run : {"a", "b"}) {
    const fs::path out = dir / run;
    const std::string q = "\"" + cli + "\"";
    ok = ok && shell(q + " simulate --config \"" + (dir / "scenario.ini").string() +
                     "\" --seed 11 --output-dir \"" + out.string() + "\" > /dev/null") == 0;
    ok = ok && shell(q + " run \"" + (out / "dataset.txt").string() + "\" --seed 11 --output-dir \"" +
                     (out / "run").string() + "\" > /dev/null") == 0;
  }
  const std::string da = slurp(dir / "a" / "dataset.txt"), db = slurp(dir / "b" / "dataset.txt");
  const std::string ta = slurp(dir / "a" / "run" / "trajectory.txt");
  const std::string tb = slurp(dir / "b" / "run" / "trajectory.txt");
  ok = ok && !da.empty() && !ta.empty() && da == db && ta == tb;
  report(9, ok,
         fmt("two simulate+run invocations: dataset %zu bytes %s, trajectory %zu bytes %s",
             da.size(), da == db ? "identical" : "differ", ta.size(), ta == tb ? "identical" : "differ"));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance suite"};
  std::string work_dir = "acceptance_out";
  std::string cli;
  app.add_option("--work-dir", work_dir, "Scratch directory for run artifacts");
  app.add_option("--cli", cli, "Path to the livo executable")->required();
  CLI11_PARSE(app, argc, argv);
  spdlog::set_level(spdlog::level::err);

  const fs::path work(work_dir);
  fs::create_directories(work);
  Runs runs;
  const auto guarded = [](int id, auto&& fn) {
    try {
      fn();
    } catch (const std::exception& e) {
      report(id, false, std::string("exception: ") + e.what());
    }
  };
  guarded(1, criterion_1);
  guarded(2, criterion_2);
  guarded(3, criterion_3);
  guarded(4, [&] { criterion_4(work, runs); });
  guarded(5, [&] { criterion_5(work, runs); });
  guarded(6, [&] { criterion_6(work, runs); });
  guarded(7, criterion_7);
  guarded(8, [&] { criterion_8(runs); });
  guarded(9, [&] { criterion_9(work, cli); });
  std::printf("%d of 9 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
