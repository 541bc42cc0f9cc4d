// Command-line front end: simulate / init / eval / jacobian-check / report.

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>

#include "vinit/dataset_io.hpp"
#include "vinit/diagnostics.hpp"
#include "vinit/evaluation.hpp"
#include "vinit/simulator.hpp"
#include "vinit/solver.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitCheckFailed = 1;
constexpr int kExitUsage = 2;
constexpr int kExitRejected = 3;

bool verbose_logging() {
  const char* env = std::getenv("VINIT_LOG");
  return env != nullptr && std::string(env) != "" && std::string(env) != "0";
}

void log_verbose(const std::string& msg) {
  if (verbose_logging()) std::cerr << "[vinit] " << msg << "\n";
}

std::vector<vinit::GroundTruthState> to_ground_truth(
    const vinit::SimOutput& sim, const vinit::BiasState& bias) {
  std::vector<vinit::GroundTruthState> out;
  out.reserve(sim.grid_states.size());
  for (const vinit::TrueState& st : sim.grid_states) {
    vinit::GroundTruthState g;
    g.t = st.t;
    g.rotation = st.rotation;
    g.position = st.position;
    g.velocity = st.velocity;
    g.gyro_bias = bias.gyro;
    g.accel_bias = bias.accel;
    out.push_back(g);
  }
  return out;
}

int cmd_simulate(const std::string& scenario_path, const std::string& out_dir,
                 std::int64_t seed_override, bool as_json) {
  vinit::Scenario sc;
  if (!scenario_path.empty()) {
    sc = vinit::load_scenario(scenario_path);
  } else {
    sc.model = vinit::excited_model(120.0);
    sc.config.true_scale = 2.0;
  }
  if (seed_override >= 0)
    sc.config.rng_seed = static_cast<std::uint64_t>(seed_override);
  if (sc.random_visual_rotation) {
    std::mt19937_64 rng(sc.config.rng_seed ^ 0xda7a5e7ull);
    sc.config.visual_world_rotation = vinit::random_rotation(rng);
  }

  const vinit::SimOutput sim = vinit::simulate(sc.model, sc.config);

  fs::create_directories(fs::path(out_dir) / "mav0" / "imu0");
  fs::create_directories(fs::path(out_dir) / "mav0" /
                         "state_groundtruth_estimate0");
  vinit::write_euroc_imu(out_dir + "/mav0/imu0/data.csv", sim.imu);
  vinit::write_euroc_groundtruth(
      out_dir + "/mav0/state_groundtruth_estimate0/data.csv",
      to_ground_truth(sim, sc.config.true_bias));

  json sensor = {{"gyro_noise_density", sc.config.noise.gyro_noise_density},
                 {"accel_noise_density", sc.config.noise.accel_noise_density},
                 {"gravity_magnitude", sc.config.noise.gravity_magnitude}};
  std::ofstream(out_dir + "/sensor.json") << sensor.dump(2) << '\n';

  json sidecar = {
      {"true_scale", sc.config.true_scale},
      {"rng_seed", sc.config.rng_seed},
      {"gyro_bias", {sc.config.true_bias.gyro[0], sc.config.true_bias.gyro[1],
                     sc.config.true_bias.gyro[2]}},
      {"accel_bias",
       {sc.config.true_bias.accel[0], sc.config.true_bias.accel[1],
        sc.config.true_bias.accel[2]}},
      {"duration", sc.model.duration},
      {"imu_samples", sim.imu.size()},
      {"keyframes", sim.keyframe_states.size()}};
  std::ofstream(out_dir + "/ground_truth_init.json") << sidecar.dump(2) << '\n';

  if (as_json) {
    std::cout << json{{"dataset", out_dir},
                      {"imu_samples", sim.imu.size()},
                      {"keyframes", sim.keyframe_states.size()},
                      {"duration", sc.model.duration}}
                     .dump()
              << "\n";
  } else {
    std::cout << "wrote " << sim.imu.size() << " IMU samples and "
              << sim.grid_states.size() << " ground-truth states ("
              << sc.model.duration << " s) to " << out_dir << "\n";
  }
  return kExitOk;
}

int cmd_init(const std::string& dataset_dir, double start, int keyframes,
             double kf_rate, const std::vector<double>& seeds,
             double prior_std, double threshold, std::uint64_t surrogate_seed,
             bool as_json) {
  const vinit::SequenceData data = vinit::load_dataset(dataset_dir);
  const double G = data.noise.gravity_magnitude;

  vinit::RunConfig rc;
  rc.window_keyframes = keyframes;
  rc.keyframe_rate = kf_rate;
  rc.rng_seed = surrogate_seed;
  if (!seeds.empty()) rc.solver.scale_seeds = seeds;
  rc.solver.rejection_threshold = threshold;
  rc.prior.accel_bias_covariance =
      prior_std * prior_std * vinit::Mat3::Identity();

  // Surrogate up-to-scale front-end drawn from the dataset ground truth.
  std::mt19937_64 rng(surrogate_seed);
  const vinit::Mat3 R_vis = vinit::random_rotation(rng);
  std::uniform_real_distribution<double> log_scale(std::log(1.0),
                                                   std::log(16.0));
  const double s_true = std::exp(log_scale(rng));

  std::vector<vinit::GroundTruthState> kfs;
  const double half_kf = 0.5 / kf_rate;
  size_t hint = 0;
  for (int j = 0; j < keyframes; ++j) {
    const double t = data.ground_truth.front().t + start + j / kf_rate;
    hint = vinit::detail::nearest_index(data.ground_truth, t, hint);
    if (std::abs(data.ground_truth[hint].t - t) > half_kf)
      throw vinit::InvalidInput("window outside dataset ground-truth span");
    kfs.push_back(data.ground_truth[hint]);
  }

  vinit::UpToScaleTrajectory traj;
  for (const vinit::GroundTruthState& kf : kfs)
    traj.keyframes.push_back(
        {kf.t, R_vis * kf.rotation, R_vis * kf.position / s_true});

  std::vector<vinit::ImuSample> slice;
  for (const vinit::ImuSample& s : data.imu)
    if (s.t >= traj.keyframes.front().t && s.t <= traj.keyframes.back().t)
      slice.push_back(s);

  std::vector<double> kf_times;
  for (const auto& kf : traj.keyframes) kf_times.push_back(kf.t);

  const auto t_solve0 = std::chrono::steady_clock::now();
  const auto preints = vinit::preintegrate_intervals(
      slice, kf_times, vinit::BiasState{}, data.noise);
  const vinit::InitResult result = vinit::multi_start_optimize(
      traj, preints, slice, rc.prior, rc.solver, data.noise);
  const auto t_solve1 = std::chrono::steady_clock::now();
  const double solve_ms =
      std::chrono::duration<double, std::milli>(t_solve1 - t_solve0).count();

  const vinit::Vec3 g_est = result.gravity(G);
  const double scale_error_pct = 100.0 * std::abs(result.state.scale / s_true - 1.0);

  json j;
  j["accepted"] = result.accepted;
  j["observable"] = result.observable;
  j["degenerate_gravity_guess"] = result.degenerate_gravity_guess;
  j["scale"] = result.state.scale;
  j["scale_error_pct_vs_surrogate"] = scale_error_pct;
  j["gravity"] = {g_est[0], g_est[1], g_est[2]};
  j["gyro_bias"] = {result.state.bias.gyro[0], result.state.bias.gyro[1],
                    result.state.bias.gyro[2]};
  j["accel_bias"] = {result.state.bias.accel[0], result.state.bias.accel[1],
                     result.state.bias.accel[2]};
  j["final_cost"] = result.final_cost;
  j["solve_ms"] = solve_ms;
  j["seeds"] = json::array();
  for (const vinit::SeedDiagnostics& s : result.seeds)
    j["seeds"].push_back({{"seed", s.seed},
                          {"final_cost", s.final_cost},
                          {"iterations", s.iterations},
                          {"converged", s.converged}});

  if (as_json) {
    std::cout << j.dump() << "\n";
  } else {
    std::cout << "accepted: " << (result.accepted ? "yes" : "no") << "\n"
              << "scale: " << result.state.scale
              << "  (error vs surrogate truth: " << scale_error_pct << " %)\n"
              << "gravity (visual world): " << g_est.transpose() << "\n"
              << "gyro bias: " << result.state.bias.gyro.transpose() << "\n"
              << "accel bias: " << result.state.bias.accel.transpose() << "\n"
              << "final cost: " << result.final_cost << "  solve: " << solve_ms
              << " ms\n";
    for (const vinit::SeedDiagnostics& s : result.seeds)
      std::cout << "  seed " << s.seed << ": cost " << s.final_cost << ", "
                << s.iterations << " iters, "
                << (s.converged ? "converged" : "not converged") << "\n";
    if (!result.accepted)
      std::cout << "rejected: "
                << (!result.observable ? "insufficient acceleration variation"
                                       : "solver did not converge")
                << "\n";
  }
  return result.accepted ? kExitOk : kExitRejected;
}

int cmd_eval(const std::string& dataset_dir, const vinit::RunConfig& rc,
             const std::string& report_path, const std::string& hist_path,
             const std::string& table_path, bool as_json) {
  const vinit::SequenceData data = vinit::load_dataset(dataset_dir);
  log_verbose("loaded " + std::to_string(data.imu.size()) + " IMU samples");

  const vinit::ExperimentReport report = vinit::exhaustive_experiment(data, rc);
  if (!report_path.empty()) vinit::write_report(report, report_path);
  if (!hist_path.empty()) vinit::write_histogram(report, hist_path);
  if (!table_path.empty()) vinit::write_window_table(report, table_path);

  const vinit::ExperimentAggregates& a = report.aggregates;
  if (as_json) {
    std::cout << json{{"windows", a.windows},
                      {"accepted", a.accepted},
                      {"acceptance_rate", a.acceptance_rate},
                      {"mean_scale_error_pct", a.mean_scale_error_pct},
                      {"median_scale_error_pct", a.median_scale_error_pct},
                      {"mean_t_init", a.mean_t_init},
                      {"mean_t_tot", a.mean_t_tot}}
                     .dump()
              << "\n";
  } else {
    std::cout << "windows: " << a.windows << "  accepted: " << a.accepted
              << " (" << 100.0 * a.acceptance_rate << " %)\n"
              << "scale error (accepted): mean " << a.mean_scale_error_pct
              << " %  median " << a.median_scale_error_pct << " %\n"
              << "t_init mean: " << a.mean_t_init
              << " s  t_tot mean: " << a.mean_t_tot << " s\n";
  }
  return kExitOk;
}

int cmd_jacobian_check(int trials, std::uint64_t seed,
                       const std::string& corrupt, bool as_json) {
  const vinit::JacobianCheckReport report =
      vinit::jacobian_check(trials, seed, corrupt);
  if (as_json) {
    json j;
    j["pass"] = report.pass;
    j["tolerance"] = report.tolerance;
    for (const auto& b : report.blocks)
      j["blocks"].push_back(
          {{"name", b.name}, {"worst_rel_error", b.worst_rel_error}});
    std::cout << j.dump() << "\n";
  } else {
    for (const auto& b : report.blocks)
      std::cout << (b.worst_rel_error < report.tolerance ? "ok  " : "FAIL")
                << "  " << b.name << "  worst rel error "
                << b.worst_rel_error << "\n";
    std::cout << (report.pass ? "PASS" : "FAIL") << " (" << trials
              << " trials, tolerance " << report.tolerance << ")\n";
  }
  return report.pass ? kExitOk : kExitCheckFailed;
}

int cmd_report(const std::string& path, bool as_json) {
  const vinit::ExperimentReport report = vinit::read_report(path);
  const vinit::ExperimentAggregates& a = report.aggregates;
  if (as_json) {
    std::cout << json{{"windows", a.windows},
                      {"accepted", a.accepted},
                      {"acceptance_rate", a.acceptance_rate},
                      {"mean_scale_error_pct", a.mean_scale_error_pct},
                      {"median_scale_error_pct", a.median_scale_error_pct},
                      {"mean_t_init", a.mean_t_init},
                      {"mean_t_tot", a.mean_t_tot}}
                     .dump()
              << "\n";
  } else {
    std::cout << "windows: " << a.windows << "  accepted: " << a.accepted
              << "\nmean scale error: " << a.mean_scale_error_pct
              << " %  median: " << a.median_scale_error_pct
              << " %\nmean t_init: " << a.mean_t_init
              << " s  mean t_tot: " << a.mean_t_tot << " s\n"
              << "metadata: " << report.metadata << "\n";
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Inertial-only initialization toolkit for monocular "
               "visual-inertial systems"};
  app.require_subcommand(1);

  // simulate
  auto* sim = app.add_subcommand("simulate", "Generate a synthetic dataset");
  std::string scenario, out_dir = "dataset";
  std::int64_t sim_seed = -1;
  bool sim_json = false;
  sim->add_option("--scenario", scenario, "Scenario file (JSON)");
  sim->add_option("--out", out_dir, "Output dataset directory")->required();
  sim->add_option("--seed", sim_seed, "RNG seed override");
  sim->add_flag("--json", sim_json, "Machine-readable output");

  // init
  auto* init = app.add_subcommand("init", "Run one initialization window");
  std::string init_dataset;
  double init_start = 0.0, init_kf_rate = 4.0, init_prior_std = 0.1,
         init_threshold = 0.005;
  int init_kfs = 10;
  std::uint64_t init_surrogate_seed = 0;
  std::vector<double> init_seeds;
  bool init_json = false;
  init->add_option("--dataset", init_dataset, "Dataset directory")->required();
  init->add_option("--start", init_start, "Window start offset (s)");
  init->add_option("--keyframes", init_kfs, "Keyframes per window");
  init->add_option("--kf-rate", init_kf_rate, "Keyframe rate (Hz)");
  init->add_option("--seeds", init_seeds, "Scale seeds")->delimiter(',');
  init->add_option("--prior-std", init_prior_std,
                   "Accel-bias prior std (m/s^2)");
  init->add_option("--threshold", init_threshold,
                   "Rejection threshold (fraction of gravity)");
  init->add_option("--surrogate-seed", init_surrogate_seed,
                   "Seed for the surrogate front-end");
  init->add_flag("--json", init_json, "Machine-readable output");

  // eval
  auto* ev = app.add_subcommand("eval", "Exhaustive sliding-window experiment");
  std::string eval_dataset, eval_config, eval_report = "report.json",
                             eval_hist, eval_table;
  vinit::RunConfig rc;
  bool eval_json = false, no_timing = false;
  ev->add_option("--dataset", eval_dataset, "Dataset directory")->required();
  ev->add_option("--config", eval_config, "Run configuration file (JSON)");
  ev->add_option("--out", eval_report, "Report output path");
  ev->add_option("--hist", eval_hist, "Histogram output path");
  ev->add_option("--table", eval_table, "Per-window table output path");
  ev->add_option("--window-kfs", rc.window_keyframes, "Keyframes per window");
  ev->add_option("--kf-rate", rc.keyframe_rate, "Keyframe rate (Hz)");
  ev->add_option("--stride", rc.stride, "Window stride (s)");
  ev->add_option("--seed", rc.rng_seed, "Surrogate RNG seed");
  ev->add_option("--workers", rc.workers, "Worker threads (0 = cores)");
  ev->add_flag("--no-timing", no_timing,
               "Omit wall times (deterministic report files)");
  ev->add_flag("--json", eval_json, "Machine-readable output");

  // jacobian-check
  auto* jc = app.add_subcommand("jacobian-check",
                                "Finite-difference Jacobian validation");
  int jc_trials = 100;
  std::uint64_t jc_seed = 1;
  std::string jc_corrupt;
  bool jc_json = false;
  jc->add_option("--trials", jc_trials, "Random states to test");
  jc->add_option("--seed", jc_seed, "RNG seed");
  jc->add_option("--corrupt", jc_corrupt,
                 "Corrupt a named block (negative control)");
  jc->add_flag("--json", jc_json, "Machine-readable output");

  // report
  auto* rp = app.add_subcommand("report", "Print a stored report");
  std::string rp_path;
  bool rp_json = false;
  rp->add_option("--in", rp_path, "Report file")->required();
  rp->add_flag("--json", rp_json, "Machine-readable output");

  CLI11_PARSE(app, argc, argv);

  try {
    if (sim->parsed())
      return cmd_simulate(scenario, out_dir, sim_seed, sim_json);
    if (init->parsed())
      return cmd_init(init_dataset, init_start, init_kfs, init_kf_rate,
                      init_seeds, init_prior_std, init_threshold,
                      init_surrogate_seed, init_json);
    if (ev->parsed()) {
      // Config file first, explicit flags override it.
      vinit::RunConfig effective = rc;
      if (!eval_config.empty()) {
        effective = vinit::load_run_config(eval_config);
        if (ev->count("--window-kfs")) effective.window_keyframes = rc.window_keyframes;
        if (ev->count("--kf-rate")) effective.keyframe_rate = rc.keyframe_rate;
        if (ev->count("--stride")) effective.stride = rc.stride;
        if (ev->count("--seed")) effective.rng_seed = rc.rng_seed;
        if (ev->count("--workers")) effective.workers = rc.workers;
      }
      if (no_timing) effective.record_timing = false;
      return cmd_eval(eval_dataset, effective, eval_report, eval_hist,
                      eval_table, eval_json);
    }
    if (jc->parsed())
      return cmd_jacobian_check(jc_trials, jc_seed, jc_corrupt, jc_json);
    if (rp->parsed()) return cmd_report(rp_path, rp_json);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}
