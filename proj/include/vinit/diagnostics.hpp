#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "vinit/preintegration.hpp"
#include "vinit/simulator.hpp"
#include "vinit/solver.hpp"

namespace vinit {

struct JacobianBlockReport {
  std::string name;
  double worst_rel_error = 0.0;
};

struct JacobianCheckReport {
  std::vector<JacobianBlockReport> blocks;
  double tolerance = 1e-5;
  bool pass = false;
};

namespace detail {

inline const char* row_names[3] = {"r_dR", "r_dv", "r_dp"};
inline const char* col_names[6] = {"ds", "dg", "dbg", "dba", "dv_i", "dv_j"};
inline const int col_offsets[7] = {0, 1, 3, 6, 9, 12, 15};

}  // namespace detail

/// Central finite differences of every residual Jacobian block through the
/// retraction, over random states and random preintegrations. `corrupt_block`
/// (e.g. "r_dv/ds") perturbs the named analytic block; used as a negative
/// control.
inline JacobianCheckReport jacobian_check(int trials, std::uint64_t seed,
                                          const std::string& corrupt_block = "",
                                          double tolerance = 1e-5) {
  JacobianCheckReport report;
  report.tolerance = tolerance;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 6; ++c)
      report.blocks.push_back({std::string(detail::row_names[r]) + "/" +
                                   detail::col_names[c],
                               0.0});

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  NoiseParams noise;
  const double h = 1e-6;

  for (int trial = 0; trial < trials; ++trial) {
    // Random preintegration from a short random sample stream.
    BiasState bias_lin;
    bias_lin.gyro = 0.01 * Vec3(gauss(rng), gauss(rng), gauss(rng));
    bias_lin.accel = 0.05 * Vec3(gauss(rng), gauss(rng), gauss(rng));
    std::vector<ImuSample> samples;
    const int n = 20;
    const double dt = 0.0125;
    for (int k = 0; k < n; ++k) {
      ImuSample s;
      s.t = k * dt;
      s.gyro = 0.5 * Vec3(gauss(rng), gauss(rng), gauss(rng));
      s.accel = Vec3(gauss(rng), gauss(rng), gauss(rng) + 9.8);
      samples.push_back(s);
    }
    const Preintegrated preint =
        integrate(samples, 0.0, n * dt, bias_lin, noise);

    Keyframe kf_i, kf_j;
    kf_i.t = 0.0;
    kf_j.t = preint.dt;
    kf_i.rotation = random_rotation(rng);
    kf_j.rotation = random_rotation(rng);
    kf_i.position = Vec3(gauss(rng), gauss(rng), gauss(rng));
    kf_j.position = kf_i.position + 0.3 * Vec3(gauss(rng), gauss(rng), gauss(rng));

    InertialState state;
    state.scale = std::exp(uni(rng) * 2.0 - 1.0);
    state.gravity_rotation = random_rotation(rng);
    state.bias.gyro = bias_lin.gyro + 0.01 * Vec3(gauss(rng), gauss(rng), gauss(rng));
    state.bias.accel =
        bias_lin.accel + 0.02 * Vec3(gauss(rng), gauss(rng), gauss(rng));
    state.velocities = {Vec3(gauss(rng), gauss(rng), gauss(rng)),
                        Vec3(gauss(rng), gauss(rng), gauss(rng))};

    Mat9x15 analytic = jacobians(state, preint, kf_i, kf_j, 0,
                                 noise.gravity_magnitude);

    Mat9x15 numeric = Mat9x15::Zero();
    for (int c = 0; c < 15; ++c) {
      VecX delta = VecX::Zero(15);
      delta[c] = h;
      const Vec9 rp = residual_block(retract(state, delta), preint, kf_i, kf_j,
                                     0, noise.gravity_magnitude);
      delta[c] = -h;
      const Vec9 rm = residual_block(retract(state, delta), preint, kf_i, kf_j,
                                     0, noise.gravity_magnitude);
      numeric.col(c) = (rp - rm) / (2.0 * h);
    }

    size_t idx = 0;
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 6; ++c, ++idx) {
        const int c0 = detail::col_offsets[c];
        const int cw = detail::col_offsets[c + 1] - c0;
        if (report.blocks[idx].name == corrupt_block)
          analytic.block(3 * r, c0, 3, cw).array() += 1e-3;
        const auto a = analytic.block(3 * r, c0, 3, cw);
        const auto d = numeric.block(3 * r, c0, 3, cw);
        const double scale = std::max(
            {1.0, a.cwiseAbs().maxCoeff(), d.cwiseAbs().maxCoeff()});
        const double err = (a - d).cwiseAbs().maxCoeff() / scale;
        report.blocks[idx].worst_rel_error =
            std::max(report.blocks[idx].worst_rel_error, err);
      }
    }
  }

  report.pass = true;
  for (const JacobianBlockReport& b : report.blocks)
    if (b.worst_rel_error >= tolerance) report.pass = false;
  return report;
}

}  // namespace vinit
