#pragma once

#include <Eigen/Core>

#include <span>
#include <vector>

#include "vinit/so3.hpp"
#include "vinit/types.hpp"

namespace vinit {

using Mat9 = Eigen::Matrix<double, 9, 9>;

/// Preintegrated IMU measurement between two keyframes.
///
/// Covariance state ordering is (delta_phi, delta_v, delta_p).
struct Preintegrated {
  Mat3 delta_R = Mat3::Identity();
  Vec3 delta_v = Vec3::Zero();
  Vec3 delta_p = Vec3::Zero();
  double dt = 0.0;
  Mat9 covariance = Mat9::Zero();

  // First-order bias-correction Jacobians at the linearization bias.
  Mat3 dR_dbg = Mat3::Zero();
  Mat3 dv_dbg = Mat3::Zero();
  Mat3 dv_dba = Mat3::Zero();
  Mat3 dp_dbg = Mat3::Zero();
  Mat3 dp_dba = Mat3::Zero();

  BiasState bias_lin;
};

struct CorrectedDeltas {
  Mat3 delta_R;
  Vec3 delta_v;
  Vec3 delta_p;
};

/// Integrates samples over [t_start, t_end] with zero-order hold: each
/// measurement is held from its own timestamp until the next one; the first
/// covers from t_start, the last until t_end.
inline Preintegrated integrate(std::span<const ImuSample> samples,
                               double t_start, double t_end,
                               const BiasState& bias_lin,
                               const NoiseParams& noise) {
  if (samples.empty()) throw InvalidInput("integrate: no IMU samples");
  if (!(t_end > t_start)) throw InvalidInput("integrate: t_end <= t_start");
  for (size_t i = 1; i < samples.size(); ++i) {
    if (samples[i].t <= samples[i - 1].t)
      throw InvalidInput("integrate: non-monotone IMU timestamps");
  }

  Preintegrated out;
  out.bias_lin = bias_lin;

  const double sg2 = noise.gyro_noise_density * noise.gyro_noise_density;
  const double sa2 = noise.accel_noise_density * noise.accel_noise_density;

  for (size_t k = 0; k < samples.size(); ++k) {
    const double tk = (k == 0) ? t_start : samples[k].t;
    const double tk1 = (k + 1 < samples.size()) ? samples[k + 1].t : t_end;
    const double dt = tk1 - tk;
    if (dt <= 0.0) continue;

    const Vec3 w = samples[k].gyro - bias_lin.gyro;
    const Vec3 a = samples[k].accel - bias_lin.accel;
    const Mat3 R = out.delta_R;
    const Mat3 R_inc = exp_so3(w * dt);
    const Mat3 Jr = right_jacobian(w * dt);
    const Mat3 a_hat = hat(a);

    // Position and velocity before the rotation advances.
    out.delta_p += out.delta_v * dt + 0.5 * R * a * dt * dt;
    out.delta_v += R * a * dt;

    // Bias-correction Jacobians (same linearization as the covariance).
    out.dp_dbg += out.dv_dbg * dt - 0.5 * R * a_hat * out.dR_dbg * dt * dt;
    out.dp_dba += out.dv_dba * dt - 0.5 * R * dt * dt;
    out.dv_dbg -= R * a_hat * out.dR_dbg * dt;
    out.dv_dba -= R * dt;
    out.dR_dbg = R_inc.transpose() * out.dR_dbg - Jr * dt;

    // Error-state transition for (dphi, dv, dp).
    Mat9 A = Mat9::Identity();
    A.block<3, 3>(0, 0) = R_inc.transpose();
    A.block<3, 3>(3, 0) = -R * a_hat * dt;
    A.block<3, 3>(6, 0) = -0.5 * R * a_hat * dt * dt;
    A.block<3, 3>(6, 3) = Mat3::Identity() * dt;

    // Discrete per-sample noise covariance sigma^2 / dt, mapped through the
    // measurement Jacobians.
    Eigen::Matrix<double, 9, 6> B = Eigen::Matrix<double, 9, 6>::Zero();
    B.block<3, 3>(0, 0) = Jr * dt;
    B.block<3, 3>(3, 3) = R * dt;
    B.block<3, 3>(6, 3) = 0.5 * R * dt * dt;

    Eigen::Matrix<double, 6, 6> Q = Eigen::Matrix<double, 6, 6>::Zero();
    Q.block<3, 3>(0, 0) = (sg2 / dt) * Mat3::Identity();
    Q.block<3, 3>(3, 3) = (sa2 / dt) * Mat3::Identity();

    out.covariance = A * out.covariance * A.transpose() + B * Q * B.transpose();

    out.delta_R = R * R_inc;
    out.dt += dt;
  }

  if (out.dt <= 0.0) throw InvalidInput("integrate: empty integration span");
  return out;
}

/// First-order bias update of the preintegrated deltas (no reintegration).
inline CorrectedDeltas corrected_deltas(const Preintegrated& p,
                                        const BiasState& b) {
  const Vec3 dbg = b.gyro - p.bias_lin.gyro;
  const Vec3 dba = b.accel - p.bias_lin.accel;
  CorrectedDeltas c;
  c.delta_R = p.delta_R * exp_so3(p.dR_dbg * dbg);
  c.delta_v = p.delta_v + p.dv_dbg * dbg + p.dv_dba * dba;
  c.delta_p = p.delta_p + p.dp_dbg * dbg + p.dp_dba * dba;
  return c;
}

/// Splits an IMU stream into per-keyframe-interval slices. A sample exactly
/// at a keyframe timestamp begins the next interval.
inline std::vector<std::vector<ImuSample>> slice_intervals(
    std::span<const ImuSample> samples, std::span<const double> kf_times) {
  if (kf_times.size() < 2) throw InvalidInput("slice_intervals: < 2 keyframes");
  std::vector<std::vector<ImuSample>> out(kf_times.size() - 1);
  for (const ImuSample& s : samples) {
    for (size_t i = 0; i + 1 < kf_times.size(); ++i) {
      if (s.t >= kf_times[i] && s.t < kf_times[i + 1]) {
        out[i].push_back(s);
        break;
      }
    }
  }
  return out;
}

/// Preintegrates every consecutive keyframe interval at the given bias.
inline std::vector<Preintegrated> preintegrate_intervals(
    std::span<const ImuSample> samples, std::span<const double> kf_times,
    const BiasState& bias_lin, const NoiseParams& noise) {
  const auto slices = slice_intervals(samples, kf_times);
  std::vector<Preintegrated> out;
  out.reserve(slices.size());
  for (size_t i = 0; i < slices.size(); ++i) {
    if (slices[i].empty())
      throw InvalidInput("preintegrate_intervals: interval " +
                         std::to_string(i) + " has no IMU samples");
    out.push_back(integrate(slices[i], kf_times[i], kf_times[i + 1], bias_lin,
                            noise));
  }
  return out;
}

/// Full re-preintegration of retained per-interval samples at a new bias
/// linearization point.
inline std::vector<Preintegrated> repreintegrate(
    const std::vector<std::vector<ImuSample>>& interval_samples,
    std::span<const double> kf_times, const BiasState& new_bias,
    const NoiseParams& noise) {
  if (interval_samples.size() + 1 != kf_times.size())
    throw InvalidInput("repreintegrate: interval/keyframe count mismatch");
  std::vector<Preintegrated> out;
  out.reserve(interval_samples.size());
  for (size_t i = 0; i < interval_samples.size(); ++i) {
    out.push_back(integrate(interval_samples[i], kf_times[i], kf_times[i + 1],
                            new_bias, noise));
  }
  return out;
}

}  // namespace vinit
