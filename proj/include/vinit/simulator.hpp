#pragma once

#include <Eigen/Core>

#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "vinit/preintegration.hpp"
#include "vinit/so3.hpp"
#include "vinit/solver.hpp"
#include "vinit/types.hpp"

namespace vinit {

struct Sinusoid {
  double amplitude = 0.0;  // m or rad
  double frequency = 0.0;  // Hz
  double phase = 0.0;      // rad
};

struct AxisModel {
  std::vector<Sinusoid> terms;
  double drift = 0.0;  // linear term, units/s

  double value(double t) const {
    double x = drift * t;
    for (const Sinusoid& s : terms)
      x += s.amplitude * std::sin(2.0 * M_PI * s.frequency * t + s.phase);
    return x;
  }
  double derivative(double t) const {
    double x = drift;
    for (const Sinusoid& s : terms) {
      const double w = 2.0 * M_PI * s.frequency;
      x += s.amplitude * w * std::cos(w * t + s.phase);
    }
    return x;
  }
  double second_derivative(double t) const {
    double x = 0.0;
    for (const Sinusoid& s : terms) {
      const double w = 2.0 * M_PI * s.frequency;
      x -= s.amplitude * w * w * std::sin(w * t + s.phase);
    }
    return x;
  }
};

/// Analytic trajectory: per-axis position sinusoids plus drift, and an
/// axis-angle orientation model with closed-form derivatives.
struct TrajectoryModel {
  std::array<AxisModel, 3> position;
  std::array<AxisModel, 3> orientation;
  double duration = 20.0;  // s
};

struct SimConfig {
  double imu_rate = 200.0;     // Hz
  double keyframe_rate = 4.0;  // Hz
  double true_scale = 1.0;
  BiasState true_bias;
  NoiseParams noise;
  Mat3 visual_world_rotation = Mat3::Identity();  // R_vw
  std::uint64_t rng_seed = 0;
  bool noise_free = false;
};

struct TrueState {
  double t = 0.0;
  Mat3 rotation = Mat3::Identity();
  Vec3 position = Vec3::Zero();
  Vec3 velocity = Vec3::Zero();
};

struct SimOutput {
  std::vector<TrueState> keyframe_states;  // metric world, keyframe grid
  std::vector<TrueState> grid_states;      // metric world, full IMU grid
  std::vector<ImuSample> imu;
  UpToScaleTrajectory visual;
  InertialState ground_truth;  // zeroes the solver residuals when noise-free
};

struct ModelEval {
  Mat3 rotation;
  Vec3 position;
  Vec3 velocity;
  Vec3 acceleration;
  Vec3 body_rate;
};

inline ModelEval evaluate_model(const TrajectoryModel& model, double t) {
  if (t < 0.0 || t > model.duration)
    throw InvalidInput("evaluate_model: t outside [0, duration]");
  ModelEval e;
  Vec3 theta, theta_dot;
  for (int i = 0; i < 3; ++i) {
    e.position[i] = model.position[i].value(t);
    e.velocity[i] = model.position[i].derivative(t);
    e.acceleration[i] = model.position[i].second_derivative(t);
    theta[i] = model.orientation[i].value(t);
    theta_dot[i] = model.orientation[i].derivative(t);
  }
  e.rotation = exp_so3(theta);
  // R(t + dt) = Exp(theta + theta_dot dt) = R Exp(Jr(theta) theta_dot dt)
  e.body_rate = right_jacobian(theta) * theta_dot;
  return e;
}

/// Bias-free, noise-free angular rate and specific force on the IMU grid.
/// Specific force is R^T (a - g_world) with g_world = (0, 0, -G) in the
/// metric world.
inline std::vector<ImuSample> ideal_samples(const TrajectoryModel& model,
                                            double imu_rate,
                                            double gravity_magnitude) {
  const Vec3 g_world(0.0, 0.0, -gravity_magnitude);
  const double dt = 1.0 / imu_rate;
  const auto n = static_cast<size_t>(std::floor(model.duration / dt)) + 1;
  std::vector<ImuSample> out;
  out.reserve(n);
  for (size_t k = 0; k < n; ++k) {
    const double t = static_cast<double>(k) * dt;
    if (t > model.duration) break;
    const ModelEval e = evaluate_model(model, t);
    ImuSample s;
    s.t = t;
    s.gyro = e.body_rate;
    s.accel = e.rotation.transpose() * (e.acceleration - g_world);
    out.push_back(s);
  }
  return out;
}

inline void add_bias_and_noise(std::vector<ImuSample>& samples,
                               const SimConfig& config) {
  const double sg =
      config.noise.gyro_noise_density * std::sqrt(config.imu_rate);
  const double sa =
      config.noise.accel_noise_density * std::sqrt(config.imu_rate);
  std::mt19937_64 rng(config.rng_seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (ImuSample& s : samples) {
    s.gyro += config.true_bias.gyro;
    s.accel += config.true_bias.accel;
    if (!config.noise_free) {
      s.gyro += sg * Vec3(gauss(rng), gauss(rng), gauss(rng));
      s.accel += sa * Vec3(gauss(rng), gauss(rng), gauss(rng));
    }
  }
}

/// Synthesizes the measured IMU stream: ideal samples plus bias and
/// per-sample noise of standard deviation sigma * sqrt(rate).
inline std::vector<ImuSample> sample_imu(const TrajectoryModel& model,
                                         const SimConfig& config) {
  std::vector<ImuSample> out =
      ideal_samples(model, config.imu_rate, config.noise.gravity_magnitude);
  add_bias_and_noise(out, config);
  return out;
}

/// Up-to-scale "visual" trajectory emulating a monocular front-end:
/// positions divided by the true scale and rotated into a random visual
/// world frame.
inline UpToScaleTrajectory make_visual_trajectory(
    const std::vector<TrueState>& states, double true_scale, const Mat3& R_vw) {
  if (true_scale <= 0.0)
    throw InvalidInput("make_visual_trajectory: true_scale must be positive");
  UpToScaleTrajectory traj;
  traj.keyframes.reserve(states.size());
  for (const TrueState& st : states) {
    Keyframe kf;
    kf.t = st.t;
    kf.rotation = R_vw * st.rotation;
    kf.position = R_vw * st.position / true_scale;
    traj.keyframes.push_back(kf);
  }
  return traj;
}

/// Generates an internally consistent scenario. Ground-truth keyframe states
/// come from discrete strapdown propagation of the ideal sample stream, so a
/// noise-free run zeroes every solver residual at the recorded ground truth.
inline SimOutput simulate(const TrajectoryModel& model,
                          const SimConfig& config) {
  if (config.imu_rate < 2.0 * config.keyframe_rate)
    throw InvalidInput("simulate: IMU rate must be >= 2x keyframe rate");

  SimOutput out;
  const std::vector<ImuSample> ideal =
      ideal_samples(model, config.imu_rate, config.noise.gravity_magnitude);

  // Discrete strapdown truth on the IMU grid, seeded from the analytic model.
  const Vec3 g_world(0.0, 0.0, -config.noise.gravity_magnitude);
  const double dt = 1.0 / config.imu_rate;
  const ModelEval e0 = evaluate_model(model, 0.0);
  std::vector<TrueState> grid(ideal.size());
  grid[0] = {0.0, e0.rotation, e0.position, e0.velocity};
  for (size_t k = 0; k + 1 < ideal.size(); ++k) {
    const TrueState& s = grid[k];
    TrueState& n = grid[k + 1];
    n.t = ideal[k + 1].t;
    const Vec3 acc_world = s.rotation * ideal[k].accel + g_world;
    n.position = s.position + s.velocity * dt + 0.5 * acc_world * dt * dt;
    n.velocity = s.velocity + acc_world * dt;
    n.rotation = s.rotation * exp_so3(ideal[k].gyro * dt);
  }

  const auto stride = static_cast<size_t>(
      std::llround(config.imu_rate / config.keyframe_rate));
  for (size_t k = 0; k < grid.size(); k += stride)
    out.keyframe_states.push_back(grid[k]);
  out.grid_states = std::move(grid);

  out.imu = ideal;
  add_bias_and_noise(out.imu, config);

  out.visual = make_visual_trajectory(out.keyframe_states, config.true_scale,
                                      config.visual_world_rotation);

  // Ground-truth inertial state for this window. The gravity rotation maps
  // the canonical (0, 0, G) onto the visual-world gravity vector.
  out.ground_truth.scale = config.true_scale;
  out.ground_truth.gravity_rotation = rotation_between(
      Vec3::UnitZ(), config.visual_world_rotation * Vec3(0.0, 0.0, -1.0));
  out.ground_truth.bias = config.true_bias;
  out.ground_truth.velocities.reserve(out.keyframe_states.size());
  for (const TrueState& st : out.keyframe_states)
    out.ground_truth.velocities.push_back(
        config.visual_world_rotation * st.velocity / config.true_scale);
  return out;
}

/// Uniformly distributed random rotation (deterministic given the engine).
inline Mat3 random_rotation(std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::Quaterniond q(gauss(rng), gauss(rng), gauss(rng), gauss(rng));
  q.normalize();
  return q.toRotationMatrix();
}

/// Excited-motion preset: sinusoids on every axis with enough specific-force
/// variation to pass the observability gate.
inline TrajectoryModel excited_model(double duration = 20.0) {
  TrajectoryModel m;
  m.duration = duration;
  m.position[0].terms = {{0.8, 0.5, 0.0}, {0.15, 1.7, 1.1}};
  m.position[1].terms = {{0.6, 0.7, 0.9}, {0.12, 2.1, 0.3}};
  m.position[2].terms = {{0.4, 0.9, 2.0}, {0.10, 1.3, 0.7}};
  m.position[0].drift = 0.1;
  m.orientation[0].terms = {{0.25, 0.4, 0.5}};
  m.orientation[1].terms = {{0.20, 0.6, 1.5}};
  m.orientation[2].terms = {{0.30, 0.3, 0.0}};
  return m;
}

/// Randomized excited motion for repeated trials.
inline TrajectoryModel random_excited_model(std::mt19937_64& rng,
                                            double duration = 20.0) {
  std::uniform_real_distribution<double> amp(0.3, 0.9);
  std::uniform_real_distribution<double> freq(0.4, 1.2);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * M_PI);
  std::uniform_real_distribution<double> oamp(0.1, 0.35);

  TrajectoryModel m;
  m.duration = duration;
  for (int i = 0; i < 3; ++i) {
    m.position[i].terms = {{amp(rng), freq(rng), phase(rng)},
                           {0.2 * amp(rng), 2.0 * freq(rng), phase(rng)}};
    m.orientation[i].terms = {{oamp(rng), freq(rng), phase(rng)}};
  }
  return m;
}

/// Constant-velocity preset; specific force is constant, so initialization
/// attempts on it must be rejected.
inline TrajectoryModel degenerate_model(double duration = 20.0) {
  TrajectoryModel m;
  m.duration = duration;
  m.position[0].drift = 0.5;
  m.position[1].drift = -0.2;
  return m;
}

}  // namespace vinit
