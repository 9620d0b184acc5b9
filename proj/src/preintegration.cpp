#include "livo/preintegration.hpp"

#include "livo/errors.hpp"
#include "livo/manifold.hpp"

namespace livo {

namespace {

// Advances `p` by one interval of length dt with body rate w and
// bias-corrected specific forces a0 (start) and a1 (end).
void integrate_step(PreintegratedImu& p, const Vec3& w, const Vec3& a0, const Vec3& a1,
                    double dt, const NoiseParams& noise) {
  const Mat3 dR = exp_so3(w * dt);
  const Mat3 R0 = p.delta_rot;
  const Mat3 R1 = R0 * dR;
  const Vec3 acc = 0.5 * (R0 * a0 + R1 * a1);

  Mat9 A = Mat9::Identity();
  A.block<3, 3>(0, 0) = dR.transpose();
  A.block<3, 3>(3, 0) = -R0 * skew(a0) * dt;
  A.block<3, 3>(6, 0) = -0.5 * R0 * skew(a0) * dt * dt;
  A.block<3, 3>(6, 3) = Mat3::Identity() * dt;

  Eigen::Matrix<double, 9, 6> B = Eigen::Matrix<double, 9, 6>::Zero();
  B.block<3, 3>(0, 0) = right_jacobian(w * dt) * dt;
  B.block<3, 3>(3, 3) = R0 * dt;
  B.block<3, 3>(6, 3) = 0.5 * R0 * dt * dt;

  Eigen::Matrix<double, 6, 1> q;
  q << Vec3::Constant(noise.sigma_gyro * noise.sigma_gyro),
      Vec3::Constant(noise.sigma_accel * noise.sigma_accel);

  p.noise_cov = A * p.noise_cov * A.transpose() + B * q.asDiagonal() * B.transpose();
  p.noise_cov = 0.5 * (p.noise_cov + p.noise_cov.transpose()).eval();

  p.delta_pos += p.delta_vel * dt + 0.5 * acc * dt * dt;
  p.delta_vel += acc * dt;
  p.delta_rot = normalize_rotation(R1);
  p.duration += dt;
}

}  // namespace

PreintegratedImu preintegrate(std::span<const ImuSample> samples, const Vec3& bias_gyro,
                              const Vec3& bias_accel, const NoiseParams& noise,
                              std::optional<double> t_end) {
  if (samples.empty()) throw ContractViolation("preintegrate: no IMU samples");
  PreintegratedImu p;
  p.bias_gyro = bias_gyro;
  p.bias_accel = bias_accel;

  for (std::size_t k = 0; k + 1 < samples.size(); ++k) {
    const ImuSample& s0 = samples[k];
    const ImuSample& s1 = samples[k + 1];
    const double dt = s1.t - s0.t;
    if (!(dt > 0.0)) throw ContractViolation("preintegrate: timestamps must increase");
    const Vec3 w = 0.5 * (s0.gyro + s1.gyro) - bias_gyro;
    integrate_step(p, w, s0.accel - bias_accel, s1.accel - bias_accel, dt, noise);
  }

  const ImuSample& last = samples.back();
  if (t_end) {
    const double dt = *t_end - last.t;
    if (dt < 0.0) throw ContractViolation("preintegrate: end time precedes last sample");
    if (dt > 0.0) {
      const Vec3 a = last.accel - bias_accel;
      integrate_step(p, last.gyro - bias_gyro, a, a, dt, noise);
    }
  }
  return p;
}

PreintegratedImu compose(const PreintegratedImu& a, const PreintegratedImu& b) {
  PreintegratedImu out;
  out.delta_rot = normalize_rotation(a.delta_rot * b.delta_rot);
  out.delta_vel = a.delta_vel + a.delta_rot * b.delta_vel;
  out.delta_pos = a.delta_pos + a.delta_vel * b.duration + a.delta_rot * b.delta_pos;
  out.duration = a.duration + b.duration;
  out.bias_gyro = a.bias_gyro;
  out.bias_accel = a.bias_accel;

  Mat9 Fa = Mat9::Identity();
  Fa.block<3, 3>(0, 0) = b.delta_rot.transpose();
  Fa.block<3, 3>(3, 0) = -a.delta_rot * skew(b.delta_vel);
  Fa.block<3, 3>(6, 0) = -a.delta_rot * skew(b.delta_pos);
  Fa.block<3, 3>(6, 3) = Mat3::Identity() * b.duration;
  Mat9 Fb = Mat9::Identity();
  Fb.block<3, 3>(3, 3) = a.delta_rot;
  Fb.block<3, 3>(6, 6) = a.delta_rot;
  out.noise_cov = Fa * a.noise_cov * Fa.transpose() + Fb * b.noise_cov * Fb.transpose();
  return out;
}

bool needs_repreintegration(const PreintegratedImu& p, const Vec3& bias_gyro,
                            const Vec3& bias_accel, double tolerance) {
  return (p.bias_gyro - bias_gyro).cwiseAbs().maxCoeff() > tolerance ||
         (p.bias_accel - bias_accel).cwiseAbs().maxCoeff() > tolerance;
}

}  // namespace livo
