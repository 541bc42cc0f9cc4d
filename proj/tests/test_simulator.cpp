#include <catch_amalgamated.hpp>

#include "vinit/simulator.hpp"

using namespace vinit;

TEST_CASE("model evaluation calculus") {
  const TrajectoryModel m = excited_model(10.0);
  const double h = 1e-6;
  for (double t : {0.5, 2.0, 4.9, 7.3}) {
    const ModelEval e = evaluate_model(m, t);
    const ModelEval ep = evaluate_model(m, t + h);
    const ModelEval em = evaluate_model(m, t - h);
    REQUIRE((e.velocity - (ep.position - em.position) / (2 * h)).norm() < 1e-6);
    REQUIRE((e.acceleration - (ep.velocity - em.velocity) / (2 * h)).norm() <
            1e-6);
    // Body rate: R(t+h) = R(t) Exp(w h).
    const Vec3 w_fd = log_so3(e.rotation.transpose() * ep.rotation) / h;
    REQUIRE((e.body_rate - w_fd).norm() < 1e-5);
  }
  REQUIRE_THROWS_AS(evaluate_model(m, -0.1), InvalidInput);
  REQUIRE_THROWS_AS(evaluate_model(m, 10.1), InvalidInput);
}

TEST_CASE("static model produces gravity-only specific force") {
  TrajectoryModel still;
  still.duration = 1.0;
  NoiseParams noise;
  const auto samples = ideal_samples(still, 200.0, noise.gravity_magnitude);
  REQUIRE(samples.size() == 201);
  for (const ImuSample& s : samples) {
    REQUIRE(s.gyro.norm() == 0.0);
    REQUIRE((s.accel - Vec3(0, 0, noise.gravity_magnitude)).norm() < 1e-12);
  }
}

TEST_CASE("bias offsets the measured stream") {
  SimConfig cfg;
  cfg.noise_free = true;
  cfg.true_bias.gyro = Vec3(0.01, -0.02, 0.03);
  cfg.true_bias.accel = Vec3(0.1, 0.2, -0.1);
  const TrajectoryModel m = excited_model(2.0);
  const auto ideal = ideal_samples(m, cfg.imu_rate, cfg.noise.gravity_magnitude);
  const auto measured = sample_imu(m, cfg);
  REQUIRE(measured.size() == ideal.size());
  for (size_t k = 0; k < ideal.size(); ++k) {
    REQUIRE((measured[k].gyro - ideal[k].gyro - cfg.true_bias.gyro).norm() <
            1e-15);
    REQUIRE((measured[k].accel - ideal[k].accel - cfg.true_bias.accel).norm() <
            1e-14);
  }
}

TEST_CASE("noise generation is seeded and matches its density") {
  SimConfig cfg;
  cfg.rng_seed = 77;
  const TrajectoryModel m = excited_model(30.0);
  const auto a = sample_imu(m, cfg);
  const auto b = sample_imu(m, cfg);
  for (size_t k = 0; k < a.size(); ++k) {
    REQUIRE((a[k].gyro - b[k].gyro).norm() == 0.0);
    REQUIRE((a[k].accel - b[k].accel).norm() == 0.0);
  }
  cfg.rng_seed = 78;
  const auto c = sample_imu(m, cfg);
  REQUIRE((a[0].gyro - c[0].gyro).norm() > 0.0);

  // Empirical standard deviation of the injected noise vs sigma * sqrt(rate).
  const auto ideal = ideal_samples(m, cfg.imu_rate, cfg.noise.gravity_magnitude);
  double g2 = 0.0, a2 = 0.0;
  for (size_t k = 0; k < a.size(); ++k) {
    g2 += (a[k].gyro - ideal[k].gyro).squaredNorm();
    a2 += (a[k].accel - ideal[k].accel).squaredNorm();
  }
  const double n = 3.0 * static_cast<double>(a.size());
  const double sg = cfg.noise.gyro_noise_density * std::sqrt(cfg.imu_rate);
  const double sa = cfg.noise.accel_noise_density * std::sqrt(cfg.imu_rate);
  REQUIRE(std::sqrt(g2 / n) == Catch::Approx(sg).epsilon(0.02));
  REQUIRE(std::sqrt(a2 / n) == Catch::Approx(sa).epsilon(0.02));
}

TEST_CASE("visual trajectory construction") {
  SimConfig cfg;
  cfg.noise_free = true;
  const SimOutput sim = simulate(excited_model(2.0), cfg);

  SECTION("identity frame and unit scale reproduce the states") {
    const UpToScaleTrajectory t =
        make_visual_trajectory(sim.keyframe_states, 1.0, Mat3::Identity());
    for (size_t i = 0; i < t.keyframes.size(); ++i) {
      REQUIRE((t.keyframes[i].position - sim.keyframe_states[i].position)
                  .norm() == 0.0);
      REQUIRE((t.keyframes[i].rotation - sim.keyframe_states[i].rotation)
                  .norm() == 0.0);
    }
  }
  SECTION("positions scale inversely with the true scale") {
    const UpToScaleTrajectory t2 =
        make_visual_trajectory(sim.keyframe_states, 2.0, Mat3::Identity());
    const UpToScaleTrajectory t1 =
        make_visual_trajectory(sim.keyframe_states, 1.0, Mat3::Identity());
    for (size_t i = 0; i < t1.keyframes.size(); ++i)
      REQUIRE((2.0 * t2.keyframes[i].position - t1.keyframes[i].position)
                  .norm() < 1e-12);
  }
  SECTION("non-positive scale is rejected") {
    REQUIRE_THROWS_AS(
        make_visual_trajectory(sim.keyframe_states, 0.0, Mat3::Identity()),
        InvalidInput);
  }
}

TEST_CASE("simulate validates rates and keyframe cadence") {
  SimConfig cfg;
  cfg.imu_rate = 6.0;
  cfg.keyframe_rate = 4.0;
  REQUIRE_THROWS_AS(simulate(excited_model(2.0), cfg), InvalidInput);

  cfg = SimConfig{};
  const SimOutput sim = simulate(excited_model(3.0), cfg);
  REQUIRE(sim.grid_states.size() == sim.imu.size());
  REQUIRE(sim.keyframe_states.size() == 13);  // 4 Hz over 3 s inclusive
  for (size_t i = 1; i < sim.keyframe_states.size(); ++i)
    REQUIRE(sim.keyframe_states[i].t - sim.keyframe_states[i - 1].t ==
            Catch::Approx(0.25).margin(1e-12));
  REQUIRE(sim.ground_truth.velocities.size() == sim.keyframe_states.size());
}

TEST_CASE("noise-free scenarios zero the solver residuals at ground truth") {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 3; ++trial) {
    SimConfig cfg;
    cfg.noise_free = true;
    cfg.true_scale = 0.5 + 2.0 * trial;
    cfg.visual_world_rotation = random_rotation(rng);
    const SimOutput sim = simulate(random_excited_model(rng, 2.0), cfg);

    std::vector<double> kf_times;
    for (const Keyframe& kf : sim.visual.keyframes) kf_times.push_back(kf.t);
    const auto preints =
        preintegrate_intervals(sim.imu, kf_times, BiasState{}, cfg.noise);
    for (size_t i = 0; i < preints.size(); ++i) {
      const Vec9 r = residual_block(sim.ground_truth, preints[i],
                                    sim.visual.keyframes[i],
                                    sim.visual.keyframes[i + 1], i,
                                    cfg.noise.gravity_magnitude);
      REQUIRE(r.norm() < 1e-8);
    }
  }
}

TEST_CASE("ground-truth gravity aligns with the visual-world down direction") {
  std::mt19937_64 rng(5);
  SimConfig cfg;
  cfg.noise_free = true;
  cfg.visual_world_rotation = random_rotation(rng);
  const SimOutput sim = simulate(excited_model(2.0), cfg);
  const Vec3 g = sim.ground_truth.gravity(cfg.noise.gravity_magnitude);
  const Vec3 expected = cfg.visual_world_rotation *
                        Vec3(0, 0, -cfg.noise.gravity_magnitude);
  REQUIRE((g - expected).norm() < 1e-12);
}
