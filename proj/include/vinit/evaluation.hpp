#pragma once

#include <Eigen/Core>
#include <Eigen/SVD>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "vinit/solver.hpp"
#include "vinit/types.hpp"

namespace vinit {

struct Sim3Transform {
  double scale = 1.0;
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  Vec3 apply(const Vec3& p) const { return scale * rotation * p + translation; }
};

/// Closed-form similarity alignment (Horn/Umeyama): finds the Sim(3)
/// transform minimizing sum ||estimated_i - (s R reference_i + t)||^2.
inline Sim3Transform horn_sim3_align(const std::vector<Vec3>& estimated,
                                     const std::vector<Vec3>& reference,
                                     bool with_scale = true) {
  const size_t n = estimated.size();
  if (n != reference.size())
    throw InvalidInput("horn_sim3_align: size mismatch");
  if (n < 3) throw DegenerateInput("horn_sim3_align: need >= 3 points");

  Vec3 mu_e = Vec3::Zero(), mu_r = Vec3::Zero();
  for (size_t i = 0; i < n; ++i) {
    mu_e += estimated[i];
    mu_r += reference[i];
  }
  mu_e /= static_cast<double>(n);
  mu_r /= static_cast<double>(n);

  Mat3 sigma = Mat3::Zero();
  double var_r = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const Vec3 de = estimated[i] - mu_e;
    const Vec3 dr = reference[i] - mu_r;
    sigma += de * dr.transpose();
    var_r += dr.squaredNorm();
  }
  sigma /= static_cast<double>(n);
  var_r /= static_cast<double>(n);

  Eigen::JacobiSVD<Mat3> svd(sigma, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Vec3 d = svd.singularValues();
  if (var_r < 1e-18 || d(1) < 1e-12 * std::max(d(0), 1e-300))
    throw DegenerateInput("horn_sim3_align: rank-deficient point configuration");

  Vec3 s_diag = Vec3::Ones();
  if ((svd.matrixU() * svd.matrixV().transpose()).determinant() < 0.0)
    s_diag(2) = -1.0;

  Sim3Transform T;
  T.rotation =
      svd.matrixU() * s_diag.asDiagonal() * svd.matrixV().transpose();
  T.scale = with_scale ? d.dot(s_diag) / var_r : 1.0;
  T.translation = mu_e - T.scale * T.rotation * mu_r;
  return T;
}

/// Scale error in percent: 100 |s_align - 1| with the Sim(3) scale that maps
/// ground truth onto the metric estimate.
inline double scale_error_percent(const std::vector<Vec3>& estimated,
                                  const std::vector<Vec3>& ground_truth) {
  return 100.0 * std::abs(horn_sim3_align(estimated, ground_truth).scale - 1.0);
}

struct TimedPosition {
  double t = 0.0;
  Vec3 p = Vec3::Zero();
};

enum class AlignMode { Sim3, SE3 };

/// ATE RMSE after Sim(3) or SE(3) alignment; association by nearest
/// timestamp within `max_dt`.
inline double ate_rmse(const std::vector<TimedPosition>& estimated,
                       const std::vector<TimedPosition>& ground_truth,
                       AlignMode mode, double max_dt) {
  std::vector<Vec3> est, ref;
  size_t j = 0;
  for (const TimedPosition& e : estimated) {
    while (j + 1 < ground_truth.size() &&
           std::abs(ground_truth[j + 1].t - e.t) <
               std::abs(ground_truth[j].t - e.t))
      ++j;
    if (j < ground_truth.size() && std::abs(ground_truth[j].t - e.t) <= max_dt) {
      est.push_back(e.p);
      ref.push_back(ground_truth[j].p);
    }
  }
  if (est.empty()) throw InvalidInput("ate_rmse: no timestamp associations");
  const Sim3Transform T =
      horn_sim3_align(est, ref, mode == AlignMode::Sim3);
  double sq = 0.0;
  for (size_t i = 0; i < est.size(); ++i)
    sq += (est[i] - T.apply(ref[i])).squaredNorm();
  return std::sqrt(sq / static_cast<double>(est.size()));
}

struct TimingStats {
  double mean_ms = 0.0;
  double median_ms = 0.0;
  double max_ms = 0.0;
};

inline TimingStats timing_capture(std::vector<double> samples_ms) {
  TimingStats s;
  if (samples_ms.empty()) return s;
  s.mean_ms = std::accumulate(samples_ms.begin(), samples_ms.end(), 0.0) /
              static_cast<double>(samples_ms.size());
  std::sort(samples_ms.begin(), samples_ms.end());
  s.median_ms = samples_ms[samples_ms.size() / 2];
  s.max_ms = samples_ms.back();
  return s;
}

struct WindowReport {
  double start_time = 0.0;
  double t_init = 0.0;  // trajectory span of this attempt
  double t_tot = std::numeric_limits<double>::quiet_NaN();
  bool accepted = false;
  double scale_error_pct = 0.0;   // alignment-based
  double scale_ratio = 0.0;       // s_recovered / s_true
  double gravity_error_deg = 0.0;
  Vec3 gyro_bias_error = Vec3::Zero();
  Vec3 accel_bias_error = Vec3::Zero();
  double solve_ms = 0.0;       // all scale seeds
  double map_update_ms = 0.0;
  double total_ms = 0.0;
};

struct ExperimentAggregates {
  int windows = 0;
  int accepted = 0;
  double acceptance_rate = 0.0;
  double mean_scale_error_pct = 0.0;    // over accepted windows
  double median_scale_error_pct = 0.0;  // over accepted windows
  double mean_t_init = 0.0;
  double mean_t_tot = 0.0;  // over windows with a resolved t_tot
};

struct ExperimentReport {
  std::vector<WindowReport> windows;
  ExperimentAggregates aggregates;
  double hist_bin_width = 0.05;
  double hist_max = 2.5;
  std::vector<std::int64_t> hist_counts;  // last bin is overflow
  std::string metadata;
};

inline ExperimentAggregates compute_aggregates(
    const std::vector<WindowReport>& windows) {
  ExperimentAggregates a;
  a.windows = static_cast<int>(windows.size());
  std::vector<double> errs;
  double t_init_sum = 0.0, t_tot_sum = 0.0;
  int t_tot_count = 0;
  for (const WindowReport& w : windows) {
    t_init_sum += w.t_init;
    if (w.accepted) {
      ++a.accepted;
      errs.push_back(w.scale_error_pct);
    }
    if (std::isfinite(w.t_tot)) {
      t_tot_sum += w.t_tot;
      ++t_tot_count;
    }
  }
  if (a.windows > 0) {
    a.acceptance_rate = static_cast<double>(a.accepted) / a.windows;
    a.mean_t_init = t_init_sum / a.windows;
  }
  if (t_tot_count > 0) a.mean_t_tot = t_tot_sum / t_tot_count;
  if (!errs.empty()) {
    a.mean_scale_error_pct =
        std::accumulate(errs.begin(), errs.end(), 0.0) / errs.size();
    std::sort(errs.begin(), errs.end());
    a.median_scale_error_pct = errs[errs.size() / 2];
  }
  return a;
}

/// Histogram of s_recovered / s_true over accepted windows; the final bin
/// collects overflow.
inline std::vector<std::int64_t> scale_histogram(
    const std::vector<WindowReport>& windows, double bin_width,
    double range_max) {
  const auto bins = static_cast<size_t>(std::ceil(range_max / bin_width)) + 1;
  std::vector<std::int64_t> counts(bins, 0);
  for (const WindowReport& w : windows) {
    if (!w.accepted) continue;
    auto b = static_cast<size_t>(std::floor(w.scale_ratio / bin_width));
    if (b >= bins - 1 || w.scale_ratio >= range_max) b = bins - 1;
    ++counts[b];
  }
  return counts;
}

struct GroundTruthState {
  double t = 0.0;
  Mat3 rotation = Mat3::Identity();
  Vec3 position = Vec3::Zero();
  Vec3 velocity = Vec3::Zero();
  Vec3 gyro_bias = Vec3::Zero();
  Vec3 accel_bias = Vec3::Zero();
};

/// A dataset as the experiment runner consumes it: an IMU stream plus
/// ground-truth states sampled densely enough to pick keyframes from.
struct SequenceData {
  std::vector<ImuSample> imu;
  std::vector<GroundTruthState> ground_truth;
  NoiseParams noise;
};

struct RunConfig {
  int window_keyframes = 10;
  double keyframe_rate = 4.0;  // Hz
  double stride = 0.5;         // s
  SolverConfig solver;
  PriorConfig prior;
  std::uint64_t rng_seed = 0;
  // Surrogate front-end: ground-truth poses are rotated by a random
  // orientation and divided by a random scale, drawn per window.
  double surrogate_scale_min = 1.0;
  double surrogate_scale_max = 16.0;
  int workers = 0;  // 0 = hardware concurrency
  double hist_bin_width = 0.05;
  double hist_max = 2.5;
  bool record_timing = true;
};

namespace detail {

inline size_t nearest_index(const std::vector<GroundTruthState>& states,
                            double t, size_t hint) {
  size_t j = std::min(hint, states.size() - 1);
  while (j + 1 < states.size() &&
         std::abs(states[j + 1].t - t) < std::abs(states[j].t - t))
    ++j;
  while (j > 0 && std::abs(states[j - 1].t - t) < std::abs(states[j].t - t))
    --j;
  return j;
}

inline Mat3 window_random_rotation(std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  const double w = gauss(rng), x = gauss(rng), y = gauss(rng), z = gauss(rng);
  const double norm = std::sqrt(w * w + x * x + y * y + z * z);
  Eigen::Quaterniond q(w / norm, x / norm, y / norm, z / norm);
  return q.toRotationMatrix();
}

}  // namespace detail

/// Exhaustive sliding-window initialization: one attempt every `stride`
/// seconds, metrics against ground truth, timing per stage.
inline ExperimentReport exhaustive_experiment(const SequenceData& data,
                                              const RunConfig& config) {
  if (data.imu.size() < 2 || data.ground_truth.size() < 2)
    throw InvalidInput("exhaustive_experiment: empty dataset");
  const double t0_data = data.ground_truth.front().t;
  const double t_end_data =
      std::min(data.ground_truth.back().t, data.imu.back().t);
  const double window_span =
      (config.window_keyframes - 1) / config.keyframe_rate;
  if (t_end_data - t0_data < window_span)
    throw InvalidInput("exhaustive_experiment: dataset shorter than a window");

  const int num_windows =
      1 + static_cast<int>(
              std::floor((t_end_data - t0_data - window_span) / config.stride));

  std::vector<WindowReport> windows(num_windows);
  const double half_kf = 0.5 / config.keyframe_rate;
  const double G = data.noise.gravity_magnitude;

  auto run_window = [&](int w) {
    WindowReport& rep = windows[w];
    const double t0 = t0_data + w * config.stride;
    rep.start_time = t0;
    rep.t_init = window_span;

    const auto wall_start = std::chrono::steady_clock::now();

    // Pick ground-truth keyframes on the window grid.
    std::vector<GroundTruthState> kfs;
    size_t hint = 0;
    for (int j = 0; j < config.window_keyframes; ++j) {
      const double t = t0 + j / config.keyframe_rate;
      hint = detail::nearest_index(data.ground_truth, t, hint);
      if (std::abs(data.ground_truth[hint].t - t) > half_kf) return;
      kfs.push_back(data.ground_truth[hint]);
    }

    // Per-window deterministic surrogate front-end.
    std::mt19937_64 rng(config.rng_seed + 0x9e3779b97f4a7c15ull *
                                              (static_cast<std::uint64_t>(w) + 1));
    const Mat3 R_vis = detail::window_random_rotation(rng);
    std::uniform_real_distribution<double> log_scale(
        std::log(config.surrogate_scale_min),
        std::log(config.surrogate_scale_max));
    const double s_true = std::exp(log_scale(rng));

    UpToScaleTrajectory traj;
    for (const GroundTruthState& kf : kfs) {
      traj.keyframes.push_back(
          {kf.t, R_vis * kf.rotation, R_vis * kf.position / s_true});
    }

    // IMU slice over the window.
    std::vector<ImuSample> slice;
    for (const ImuSample& s : data.imu) {
      if (s.t >= traj.keyframes.front().t && s.t <= traj.keyframes.back().t)
        slice.push_back(s);
    }
    if (slice.empty()) return;

    std::vector<double> kf_times;
    for (const Keyframe& kf : traj.keyframes) kf_times.push_back(kf.t);

    InitResult result;
    const auto solve_start = std::chrono::steady_clock::now();
    try {
      const std::vector<Preintegrated> preints =
          preintegrate_intervals(slice, kf_times, BiasState{}, data.noise);
      result = multi_start_optimize(traj, preints, slice, config.prior,
                                    config.solver, data.noise);
    } catch (const Error&) {
      return;  // window left unaccepted
    }
    const auto solve_end = std::chrono::steady_clock::now();

    rep.accepted = result.accepted;
    rep.scale_ratio = result.state.scale / s_true;

    const Vec3 g_true = R_vis * Vec3(0.0, 0.0, -G);
    const Vec3 g_est = result.gravity(G);
    rep.gravity_error_deg =
        std::acos(std::clamp(g_true.normalized().dot(g_est.normalized()),
                             -1.0, 1.0)) *
        180.0 / M_PI;

    Vec3 bg_true = Vec3::Zero(), ba_true = Vec3::Zero();
    for (const GroundTruthState& kf : kfs) {
      bg_true += kf.gyro_bias;
      ba_true += kf.accel_bias;
    }
    bg_true /= static_cast<double>(kfs.size());
    ba_true /= static_cast<double>(kfs.size());
    rep.gyro_bias_error = result.state.bias.gyro - bg_true;
    rep.accel_bias_error = result.state.bias.accel - ba_true;

    auto map_update_end = solve_end;
    if (result.accepted) {
      const MetricTrajectory metric = apply_initialization(traj, result, G);
      map_update_end = std::chrono::steady_clock::now();
      std::vector<Vec3> est, gt;
      for (size_t i = 0; i < kfs.size(); ++i) {
        est.push_back(metric.keyframes[i].position);
        gt.push_back(kfs[i].position);
      }
      try {
        rep.scale_error_pct = scale_error_percent(est, gt);
      } catch (const DegenerateInput&) {
        rep.scale_error_pct = 100.0 * std::abs(rep.scale_ratio - 1.0);
      }
    }

    if (config.record_timing) {
      using ms = std::chrono::duration<double, std::milli>;
      rep.solve_ms = ms(solve_end - solve_start).count();
      rep.map_update_ms = ms(map_update_end - solve_end).count();
      rep.total_ms =
          ms(std::chrono::steady_clock::now() - wall_start).count();
    }
  };

  int workers = config.workers > 0
                    ? config.workers
                    : static_cast<int>(std::thread::hardware_concurrency());
  workers = std::max(1, std::min(workers, num_windows));
  if (workers == 1) {
    for (int w = 0; w < num_windows; ++w) run_window(w);
  } else {
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    for (int i = 0; i < workers; ++i) {
      pool.emplace_back([&] {
        for (int w = next.fetch_add(1); w < num_windows;
             w = next.fetch_add(1))
          run_window(w);
      });
    }
    for (std::thread& t : pool) t.join();
  }

  // t_tot: elapsed data time from each window's start until the first
  // accepted attempt at or after it.
  for (int w = 0; w < num_windows; ++w) {
    for (int w2 = w; w2 < num_windows; ++w2) {
      if (windows[w2].accepted) {
        windows[w].t_tot = (windows[w2].start_time - windows[w].start_time) +
                           windows[w2].t_init;
        break;
      }
    }
  }

  ExperimentReport report;
  report.windows = std::move(windows);
  report.aggregates = compute_aggregates(report.windows);
  report.hist_bin_width = config.hist_bin_width;
  report.hist_max = config.hist_max;
  report.hist_counts = scale_histogram(report.windows, config.hist_bin_width,
                                       config.hist_max);
  report.metadata =
      "surrogate front-end from ground truth; t_tot counts inertial "
      "rejections only";
  return report;
}

}  // namespace vinit
