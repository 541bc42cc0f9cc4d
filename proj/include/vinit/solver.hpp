#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "vinit/preintegration.hpp"
#include "vinit/so3.hpp"
#include "vinit/types.hpp"

namespace vinit {

using VecX = Eigen::VectorXd;
using MatX = Eigen::MatrixXd;
using Vec9 = Eigen::Matrix<double, 9, 1>;
using Mat9x15 = Eigen::Matrix<double, 9, 15>;

/// Inertial parameters estimated by the initialization:
/// scale, gravity rotation, shared biases, and per-keyframe up-to-scale
/// body velocities.
struct InertialState {
  double scale = 1.0;
  Mat3 gravity_rotation = Mat3::Identity();  // R_wg
  BiasState bias;
  std::vector<Vec3> velocities;

  /// Gravity vector in the visual world frame.
  Vec3 gravity(double gravity_magnitude) const {
    return gravity_rotation * Vec3(0.0, 0.0, gravity_magnitude);
  }
};

struct PriorConfig {
  // Isotropic accelerometer-bias prior, std 0.1 m/s^2 per axis.
  Mat3 accel_bias_covariance = 0.01 * Mat3::Identity();
};

struct SolverConfig {
  int max_iterations = 50;
  double initial_damping = 1e-4;  // scaled by mean(diag(H))
  double cost_tolerance = 1e-9;   // relative cost decrease
  double update_tolerance = 1e-10;
  std::vector<double> scale_seeds = {1.0, 4.0, 16.0};
  double rejection_threshold = 0.005;  // fraction of gravity magnitude
};

struct SeedDiagnostics {
  double seed = 1.0;
  double final_cost = 0.0;
  int iterations = 0;
  bool converged = false;
};

struct OptimizeResult {
  InertialState state;
  double cost = 0.0;
  int iterations = 0;
  bool converged = false;
  std::string message;
};

struct InitResult {
  InertialState state;
  double final_cost = 0.0;
  std::vector<SeedDiagnostics> seeds;
  bool accepted = false;
  bool observable = false;
  bool degenerate_gravity_guess = false;

  Vec3 gravity(double gravity_magnitude) const {
    return state.gravity(gravity_magnitude);
  }
};

// Tangent layout: [ds, dg(2), dbg(3), dba(3), dv_0..dv_k].
inline int tangent_dim(size_t num_keyframes) {
  return 9 + 3 * static_cast<int>(num_keyframes);
}

/// Two-column basis of the gravity-direction tangent (the third column of
/// hat(g_I) is zero, so updates never rotate gravity about itself).
inline Eigen::Matrix<double, 3, 2> gravity_tangent_basis(double G) {
  Eigen::Matrix<double, 3, 2> g;
  g << 0.0, -G,
       G, 0.0,
       0.0, 0.0;
  return g;
}

/// Inertial residual (r_dR, r_dv, r_dp) for one consecutive-keyframe pair.
inline Vec9 residual_block(const InertialState& state,
                           const Preintegrated& preint, const Keyframe& kf_i,
                           const Keyframe& kf_j, size_t vel_index_i,
                           double gravity_magnitude) {
  const CorrectedDeltas d = corrected_deltas(preint, state.bias);
  const double dt = preint.dt;
  const double s = state.scale;
  const Mat3 Ri_t = kf_i.rotation.transpose();
  const Vec3 g = state.gravity(gravity_magnitude);
  const Vec3& vi = state.velocities[vel_index_i];
  const Vec3& vj = state.velocities[vel_index_i + 1];

  Vec9 r;
  r.segment<3>(0) = log_so3(d.delta_R.transpose() * Ri_t * kf_j.rotation);
  r.segment<3>(3) = Ri_t * (s * vj - s * vi - g * dt) - d.delta_v;
  r.segment<3>(6) =
      Ri_t * (s * kf_j.position - s * kf_i.position - s * vi * dt -
              0.5 * g * dt * dt) -
      d.delta_p;
  return r;
}

/// Weighted accelerometer-bias prior cost ||b_a||^2_{Sigma_p}.
inline double prior_residual(const InertialState& state,
                             const PriorConfig& prior) {
  const Vec3& ba = state.bias.accel;
  return ba.dot(prior.accel_bias_covariance.ldlt().solve(ba));
}

/// Analytic Jacobian of one residual block over
/// (ds, dg_dir, dbg, dba, dv_i, dv_j), evaluated at the current state.
inline Mat9x15 jacobians(const InertialState& state, const Preintegrated& preint,
                         const Keyframe& kf_i, const Keyframe& kf_j,
                         size_t vel_index_i, double gravity_magnitude) {
  const double dt = preint.dt;
  const double s = state.scale;
  const Mat3 Ri_t = kf_i.rotation.transpose();
  const Vec3& vi = state.velocities[vel_index_i];
  const Vec3& vj = state.velocities[vel_index_i + 1];
  const Eigen::Matrix<double, 3, 2> Gm =
      gravity_tangent_basis(gravity_magnitude);

  Mat9x15 J = Mat9x15::Zero();

  // Rotation residual: independent of scale, gravity and velocities; only
  // the gyro bias enters, through the exponential bias correction.
  const Vec3 dbg = state.bias.gyro - preint.bias_lin.gyro;
  const Vec3 phi = preint.dR_dbg * dbg;
  const Mat3 corrected_R = preint.delta_R * exp_so3(phi);
  const Vec3 r_dR = log_so3(corrected_R.transpose() * Ri_t * kf_j.rotation);
  J.block<3, 3>(0, 3) = -right_jacobian_inverse(r_dR) *
                        exp_so3(r_dR).transpose() * right_jacobian(phi) *
                        preint.dR_dbg;

  // Velocity residual.
  J.block<3, 1>(3, 0) = Ri_t * (vj - vi) * s;
  J.block<3, 2>(3, 1) = Ri_t * state.gravity_rotation * Gm * dt;
  J.block<3, 3>(3, 3) = -preint.dv_dbg;
  J.block<3, 3>(3, 6) = -preint.dv_dba;
  J.block<3, 3>(3, 9) = -s * Ri_t;
  J.block<3, 3>(3, 12) = s * Ri_t;

  // Position residual.
  J.block<3, 1>(6, 0) =
      Ri_t * (kf_j.position - kf_i.position - vi * dt) * s;
  J.block<3, 2>(6, 1) = 0.5 * Ri_t * state.gravity_rotation * Gm * dt * dt;
  J.block<3, 3>(6, 3) = -preint.dp_dbg;
  J.block<3, 3>(6, 6) = -preint.dp_dba;
  J.block<3, 3>(6, 9) = -s * Ri_t * dt;

  return J;
}

/// On-manifold retraction: multiplicative scale, two-angle gravity rotation,
/// additive biases and velocities.
inline InertialState retract(const InertialState& state, const VecX& delta) {
  const int expected = tangent_dim(state.velocities.size());
  if (delta.size() != expected)
    throw InvalidInput("retract: update dimension mismatch");
  InertialState out = state;
  out.scale = state.scale * std::exp(delta[0]);
  out.gravity_rotation =
      state.gravity_rotation * exp_so3(Vec3(delta[1], delta[2], 0.0));
  out.bias.gyro += delta.segment<3>(3);
  out.bias.accel += delta.segment<3>(6);
  for (size_t i = 0; i < state.velocities.size(); ++i)
    out.velocities[i] += delta.segment<3>(9 + 3 * i);
  return out;
}

struct InitialGuess {
  InertialState state;
  bool degenerate_gravity = false;
};

/// Initial guess: zero biases, gravity along the mean rotated specific force,
/// velocities from finite differences of the up-to-scale positions.
inline InitialGuess initial_guess(const UpToScaleTrajectory& traj,
                                  std::span<const ImuSample> samples,
                                  const NoiseParams& noise,
                                  double seed_scale = 1.0) {
  traj.validate();
  const auto& kfs = traj.keyframes;

  InitialGuess out;
  out.state.scale = seed_scale;

  // Mean specific force rotated into the visual world, using each sample's
  // nearest keyframe rotation.
  Vec3 mean = Vec3::Zero();
  size_t count = 0;
  size_t nearest = 0;
  for (const ImuSample& s : samples) {
    while (nearest + 1 < kfs.size() &&
           std::abs(kfs[nearest + 1].t - s.t) < std::abs(kfs[nearest].t - s.t))
      ++nearest;
    mean += kfs[nearest].rotation * s.accel;
    ++count;
  }
  if (count > 0) mean /= static_cast<double>(count);

  if (mean.norm() < 1e-6 * noise.gravity_magnitude) {
    out.degenerate_gravity = true;
    out.state.gravity_rotation = Mat3::Identity();
  } else {
    const Vec3 g_dir = -mean.normalized();
    out.state.gravity_rotation = rotation_between(Vec3::UnitZ(), g_dir);
  }

  // Central differences of the up-to-scale positions; one-sided at the ends.
  const size_t n = kfs.size();
  out.state.velocities.resize(n);
  for (size_t i = 0; i < n; ++i) {
    const size_t lo = (i == 0) ? 0 : i - 1;
    const size_t hi = (i + 1 == n) ? i : i + 1;
    out.state.velocities[i] =
        (kfs[hi].position - kfs[lo].position) / (kfs[hi].t - kfs[lo].t);
  }
  return out;
}

/// Rejects windows whose specific force barely deviates from its mean:
/// near-constant-velocity motion leaves scale and gravity unobservable.
inline bool observability_check(std::span<const ImuSample> samples,
                                double gravity_magnitude, double threshold) {
  if (samples.empty()) throw InvalidInput("observability_check: no samples");
  Vec3 mean = Vec3::Zero();
  for (const ImuSample& s : samples) mean += s.accel;
  mean /= static_cast<double>(samples.size());
  double dev = 0.0;
  for (const ImuSample& s : samples) dev += (s.accel - mean).norm();
  dev /= static_cast<double>(samples.size());
  return dev >= threshold * gravity_magnitude;
}

namespace detail {

struct Problem {
  const UpToScaleTrajectory* traj;
  const std::vector<Preintegrated>* preints;
  const PriorConfig* prior;
  double gravity_magnitude;
  std::vector<Mat9> whiteners;  // L^-1 factors of each interval covariance
  Mat3 prior_whitener;

  void build(const UpToScaleTrajectory& trajectory,
             const std::vector<Preintegrated>& pre, const PriorConfig& pr,
             double G) {
    traj = &trajectory;
    preints = &pre;
    prior = &pr;
    gravity_magnitude = G;
    whiteners.clear();
    whiteners.reserve(pre.size());
    for (size_t i = 0; i < pre.size(); ++i) {
      Eigen::LLT<Mat9> llt(pre[i].covariance);
      if (llt.info() != Eigen::Success)
        throw NumericalError("non-PSD preintegration covariance in interval " +
                             std::to_string(i));
      Mat9 Linv = Mat9::Identity();
      llt.matrixL().solveInPlace(Linv);
      whiteners.push_back(Linv);
    }
    Eigen::LLT<Mat3> pllt(pr.accel_bias_covariance);
    if (pllt.info() != Eigen::Success)
      throw NumericalError("accel-bias prior covariance is not PD");
    Mat3 Lp = Mat3::Identity();
    pllt.matrixL().solveInPlace(Lp);
    prior_whitener = Lp;
  }

  double cost(const InertialState& state) const {
    double c = 0.0;
    for (size_t i = 0; i < preints->size(); ++i) {
      const Vec9 r = residual_block(state, (*preints)[i], traj->keyframes[i],
                                    traj->keyframes[i + 1], i,
                                    gravity_magnitude);
      c += (whiteners[i] * r).squaredNorm();
    }
    c += (prior_whitener * state.bias.accel).squaredNorm();
    return c;
  }

  // Normal equations H = J^T J, g = J^T r with whitened blocks.
  void linearize(const InertialState& state, MatX& H, VecX& grad,
                 double& c) const {
    const int n = tangent_dim(state.velocities.size());
    H.setZero(n, n);
    grad.setZero(n);
    c = 0.0;
    for (size_t i = 0; i < preints->size(); ++i) {
      const Vec9 r = whiteners[i] * residual_block(state, (*preints)[i],
                                                   traj->keyframes[i],
                                                   traj->keyframes[i + 1], i,
                                                   gravity_magnitude);
      const Mat9x15 Jb =
          whiteners[i] * jacobians(state, (*preints)[i], traj->keyframes[i],
                                   traj->keyframes[i + 1], i,
                                   gravity_magnitude);
      c += r.squaredNorm();

      // Scatter: shared columns 0..8, then velocities i and j.
      const int vi = 9 + 3 * static_cast<int>(i);
      const int cols[5] = {0, 3, 6, vi, vi + 3};
      for (int bi = 0; bi < 5; ++bi) {
        for (int bj = 0; bj < 5; ++bj) {
          H.block(cols[bi], cols[bj], 3, 3) +=
              Jb.block<9, 3>(0, 3 * bi).transpose() *
              Jb.block<9, 3>(0, 3 * bj);
        }
        grad.segment(cols[bi], 3) += Jb.block<9, 3>(0, 3 * bi).transpose() * r;
      }
    }
    // Accelerometer-bias prior (columns 6..8).
    const Vec3 rp = prior_whitener * state.bias.accel;
    c += rp.squaredNorm();
    H.block<3, 3>(6, 6) += prior_whitener.transpose() * prior_whitener;
    grad.segment<3>(6) += prior_whitener.transpose() * rp;
  }
};

}  // namespace detail

/// Dense Levenberg-Marquardt over the inertial tangent space.
inline OptimizeResult optimize(const UpToScaleTrajectory& trajectory,
                               const std::vector<Preintegrated>& preints,
                               const PriorConfig& prior,
                               const SolverConfig& config,
                               const NoiseParams& noise,
                               const InertialState& seed_state) {
  trajectory.validate();
  if (preints.size() + 1 != trajectory.keyframes.size())
    throw InvalidInput("optimize: preintegration/keyframe count mismatch");
  if (seed_state.velocities.size() != trajectory.keyframes.size())
    throw InvalidInput("optimize: velocity/keyframe count mismatch");

  detail::Problem problem;
  problem.build(trajectory, preints, prior, noise.gravity_magnitude);

  OptimizeResult res;
  res.state = seed_state;

  MatX H;
  VecX grad;
  double cost = 0.0;
  problem.linearize(res.state, H, grad, cost);

  double lambda = config.initial_damping * H.diagonal().mean();
  const int n = static_cast<int>(H.rows());

  for (int it = 0; it < config.max_iterations; ++it) {
    res.iterations = it + 1;
    const VecX delta =
        (H + lambda * MatX::Identity(n, n)).ldlt().solve(-grad);
    if (delta.norm() < config.update_tolerance) {
      res.converged = true;
      res.iterations = it;
      break;
    }
    const InertialState candidate = retract(res.state, delta);
    const double new_cost = problem.cost(candidate);
    if (new_cost < cost) {
      const double decrease = (cost - new_cost) / std::max(cost, 1e-300);
      res.state = candidate;
      problem.linearize(res.state, H, grad, cost);
      lambda *= 0.5;
      if (decrease < config.cost_tolerance) {
        res.converged = true;
        break;
      }
    } else {
      lambda *= 10.0;
      if (lambda > 1e32) {
        res.message = "LM damping overflow";
        break;
      }
    }
  }
  res.cost = cost;
  if (!res.converged && res.message.empty() &&
      res.iterations >= config.max_iterations)
    res.message = "max iterations reached";
  return res;
}

/// Multi-start over the configured scale seeds; keeps the lowest final cost,
/// ties broken by smallest seed value.
inline InitResult multi_start_optimize(const UpToScaleTrajectory& trajectory,
                                       const std::vector<Preintegrated>& preints,
                                       std::span<const ImuSample> samples,
                                       const PriorConfig& prior,
                                       const SolverConfig& config,
                                       const NoiseParams& noise) {
  if (config.scale_seeds.empty())
    throw InvalidInput("multi_start_optimize: no scale seeds");

  const InitialGuess guess = initial_guess(trajectory, samples, noise);

  InitResult result;
  result.degenerate_gravity_guess = guess.degenerate_gravity;
  result.observable = observability_check(samples, noise.gravity_magnitude,
                                          config.rejection_threshold);

  std::vector<double> seeds = config.scale_seeds;
  std::sort(seeds.begin(), seeds.end());

  int best = -1;
  std::vector<OptimizeResult> runs;
  for (double seed : seeds) {
    InertialState s0 = guess.state;
    s0.scale = seed;
    OptimizeResult run = optimize(trajectory, preints, prior, config, noise, s0);
    result.seeds.push_back(
        {seed, run.cost, run.iterations, run.converged});
    runs.push_back(std::move(run));
    const int idx = static_cast<int>(runs.size()) - 1;
    if (best < 0 || runs[idx].cost < runs[best].cost) best = idx;
  }

  result.state = runs[best].state;
  result.final_cost = runs[best].cost;
  result.accepted = result.observable && runs[best].converged;
  return result;
}

/// Metric trajectory after applying an accepted initialization: scaled by s
/// and rotated so gravity is the canonical (0, 0, G).
struct MetricTrajectory {
  std::vector<Keyframe> keyframes;
  std::vector<Vec3> velocities;
  Vec3 gravity = Vec3::Zero();
};

inline MetricTrajectory apply_initialization(
    const UpToScaleTrajectory& trajectory, const InitResult& result,
    double gravity_magnitude) {
  if (!result.accepted)
    throw InvalidState("apply_initialization: initialization not accepted");
  const double s = result.state.scale;
  const Mat3 Rgw = result.state.gravity_rotation.transpose();

  MetricTrajectory out;
  out.keyframes.reserve(trajectory.keyframes.size());
  for (const Keyframe& kf : trajectory.keyframes) {
    Keyframe m;
    m.t = kf.t;
    m.rotation = Rgw * kf.rotation;
    m.position = Rgw * (s * kf.position);
    out.keyframes.push_back(m);
  }
  out.velocities.reserve(result.state.velocities.size());
  for (const Vec3& v : result.state.velocities)
    out.velocities.push_back(Rgw * (s * v));
  out.gravity = Vec3(0.0, 0.0, gravity_magnitude);
  return out;
}

/// Inertial-only refinement on an already-metric trajectory: single unit
/// scale seed, warm-started from the previous bias and velocity estimates.
/// Samples are re-preintegrated at the warm-start bias; the refined scale
/// multiplies the caller's running estimate.
inline InitResult refine(const MetricTrajectory& metric,
                         std::span<const ImuSample> samples,
                         const BiasState& warm_bias, const PriorConfig& prior,
                         const SolverConfig& config, const NoiseParams& noise) {
  UpToScaleTrajectory traj;
  traj.keyframes = metric.keyframes;
  traj.validate();
  if (metric.velocities.size() != metric.keyframes.size())
    throw InvalidInput("refine: velocity/keyframe count mismatch");

  std::vector<double> kf_times;
  kf_times.reserve(traj.keyframes.size());
  for (const Keyframe& kf : traj.keyframes) kf_times.push_back(kf.t);

  const InitialGuess gravity_guess = initial_guess(traj, samples, noise);

  SolverConfig single = config;
  single.scale_seeds = {1.0};

  InertialState s0 = gravity_guess.state;
  s0.scale = 1.0;
  s0.bias = warm_bias;
  s0.velocities = metric.velocities;

  const std::vector<Preintegrated> preints =
      preintegrate_intervals(samples, kf_times, warm_bias, noise);

  InitResult result;
  result.degenerate_gravity_guess = gravity_guess.degenerate_gravity;
  result.observable = observability_check(samples, noise.gravity_magnitude,
                                          single.rejection_threshold);
  OptimizeResult run = optimize(traj, preints, prior, single, noise, s0);
  result.seeds.push_back({1.0, run.cost, run.iterations, run.converged});
  result.state = run.state;
  result.final_cost = run.cost;
  result.accepted = result.observable && run.converged;
  return result;
}

}  // namespace vinit
