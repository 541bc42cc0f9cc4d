#pragma once

#include <nlohmann/json.hpp>

#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "vinit/evaluation.hpp"
#include "vinit/simulator.hpp"
#include "vinit/types.hpp"

namespace vinit {

namespace io_detail {

// Nanosecond timestamps exceed double precision; go through long double so
// ordering is preserved to well under a microsecond.
inline double ns_to_seconds(std::int64_t ns) {
  return static_cast<double>(static_cast<long double>(ns) * 1e-9L);
}

inline std::int64_t seconds_to_ns(double t) {
  return static_cast<std::int64_t>(std::llroundl(static_cast<long double>(t) * 1e9L));
}

inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(field);
  return out;
}

inline double parse_double(const std::string& s, const std::string& file,
                           size_t line_no) {
  try {
    size_t pos = 0;
    const double v = std::stod(s, &pos);
    while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos])))
      ++pos;
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ParseError(file + ":" + std::to_string(line_no) +
                     ": malformed number '" + s + "'");
  }
}

inline std::int64_t parse_ns(const std::string& s, const std::string& file,
                             size_t line_no) {
  std::int64_t v = 0;
  const char* begin = s.data();
  const char* end = s.data() + s.size();
  while (begin < end && std::isspace(static_cast<unsigned char>(*begin)))
    ++begin;
  const auto res = std::from_chars(begin, end, v);
  if (res.ec != std::errc{} || res.ptr != end)
    throw ParseError(file + ":" + std::to_string(line_no) +
                     ": malformed timestamp '" + s + "'");
  return v;
}

}  // namespace io_detail

/// EuRoC imu0 data.csv: header line, then
/// "timestamp [ns], w_x, w_y, w_z [rad s^-1], a_x, a_y, a_z [m s^-2]".
inline std::vector<ImuSample> load_euroc_imu(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path);
  std::vector<ImuSample> out;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    const auto fields = io_detail::split_csv(line);
    if (fields.size() != 7)
      throw ParseError(path + ":" + std::to_string(line_no) +
                       ": expected 7 fields, got " +
                       std::to_string(fields.size()));
    ImuSample s;
    s.t = io_detail::ns_to_seconds(
        io_detail::parse_ns(fields[0], path, line_no));
    for (int i = 0; i < 3; ++i) {
      s.gyro[i] = io_detail::parse_double(fields[1 + i], path, line_no);
      s.accel[i] = io_detail::parse_double(fields[4 + i], path, line_no);
    }
    out.push_back(s);
  }
  if (out.empty()) throw ParseError(path + ": no IMU rows");
  for (size_t i = 1; i < out.size(); ++i) {
    if (out[i].t <= out[i - 1].t)
      throw InvalidData(path + ": non-monotone timestamps at row " +
                        std::to_string(i));
  }
  return out;
}

struct Extrinsics {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();
};

/// EuRoC state_groundtruth_estimate0 data.csv: timestamp [ns], position,
/// quaternion (w, x, y, z), velocity, gyro bias, accel bias.
inline std::vector<GroundTruthState> load_euroc_groundtruth(
    const std::string& path, const Extrinsics& body_to_sensor = {}) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path);
  std::vector<GroundTruthState> out;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    const auto fields = io_detail::split_csv(line);
    if (fields.size() != 17)
      throw ParseError(path + ":" + std::to_string(line_no) +
                       ": expected 17 fields, got " +
                       std::to_string(fields.size()));
    double v[16];
    for (int i = 0; i < 16; ++i)
      v[i] = io_detail::parse_double(fields[1 + i], path, line_no);

    GroundTruthState st;
    st.t = io_detail::ns_to_seconds(
        io_detail::parse_ns(fields[0], path, line_no));
    st.position = Vec3(v[0], v[1], v[2]);
    Eigen::Quaterniond q(v[3], v[4], v[5], v[6]);
    if (std::abs(q.norm() - 1.0) > 1e-6)
      throw InvalidData(path + ":" + std::to_string(line_no) +
                        ": quaternion norm deviates from 1");
    q.normalize();
    st.rotation = q.toRotationMatrix();
    st.velocity = Vec3(v[7], v[8], v[9]);
    st.gyro_bias = Vec3(v[10], v[11], v[12]);
    st.accel_bias = Vec3(v[13], v[14], v[15]);

    // Optional body-to-sensor transform applied on load.
    st.position += st.rotation * body_to_sensor.translation;
    st.rotation = st.rotation * body_to_sensor.rotation;
    out.push_back(st);
  }
  if (out.empty()) throw ParseError(path + ": no ground-truth rows");
  for (size_t i = 1; i < out.size(); ++i) {
    if (out[i].t <= out[i - 1].t)
      throw InvalidData(path + ": non-monotone timestamps at row " +
                        std::to_string(i));
  }
  return out;
}

inline void write_euroc_imu(const std::string& path,
                            const std::vector<ImuSample>& samples) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << "#timestamp [ns],w_RS_S_x [rad s^-1],w_RS_S_y [rad s^-1],"
         "w_RS_S_z [rad s^-1],a_RS_S_x [m s^-2],a_RS_S_y [m s^-2],"
         "a_RS_S_z [m s^-2]\n";
  char buf[64];
  auto fmt = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf);
  };
  for (const ImuSample& s : samples) {
    out << io_detail::seconds_to_ns(s.t) << ',' << fmt(s.gyro[0]) << ','
        << fmt(s.gyro[1]) << ',' << fmt(s.gyro[2]) << ',' << fmt(s.accel[0])
        << ',' << fmt(s.accel[1]) << ',' << fmt(s.accel[2]) << '\n';
  }
}

inline void write_euroc_groundtruth(
    const std::string& path, const std::vector<GroundTruthState>& states) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << "#timestamp [ns],p_RS_R_x [m],p_RS_R_y [m],p_RS_R_z [m],"
         "q_RS_w [],q_RS_x [],q_RS_y [],q_RS_z [],"
         "v_RS_R_x [m s^-1],v_RS_R_y [m s^-1],v_RS_R_z [m s^-1],"
         "b_w_RS_S_x [rad s^-1],b_w_RS_S_y [rad s^-1],b_w_RS_S_z [rad s^-1],"
         "b_a_RS_S_x [m s^-2],b_a_RS_S_y [m s^-2],b_a_RS_S_z [m s^-2]\n";
  char buf[64];
  auto fmt = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf);
  };
  for (const GroundTruthState& st : states) {
    const Eigen::Quaterniond q(st.rotation);
    out << io_detail::seconds_to_ns(st.t);
    for (int i = 0; i < 3; ++i) out << ',' << fmt(st.position[i]);
    out << ',' << fmt(q.w()) << ',' << fmt(q.x()) << ',' << fmt(q.y()) << ','
        << fmt(q.z());
    for (int i = 0; i < 3; ++i) out << ',' << fmt(st.velocity[i]);
    for (int i = 0; i < 3; ++i) out << ',' << fmt(st.gyro_bias[i]);
    for (int i = 0; i < 3; ++i) out << ',' << fmt(st.accel_bias[i]);
    out << '\n';
  }
}

/// Loads a dataset in EuRoC ASL layout:
/// dir/mav0/imu0/data.csv and dir/mav0/state_groundtruth_estimate0/data.csv,
/// with optional dir/sensor.json holding the noise parameters.
inline SequenceData load_dataset(const std::string& dir,
                                 const Extrinsics& body_to_sensor = {}) {
  namespace fs = std::filesystem;
  SequenceData data;
  data.imu = load_euroc_imu(dir + "/mav0/imu0/data.csv");
  data.ground_truth = load_euroc_groundtruth(
      dir + "/mav0/state_groundtruth_estimate0/data.csv", body_to_sensor);

  const fs::path sensor = fs::path(dir) / "sensor.json";
  if (fs::exists(sensor)) {
    std::ifstream in(sensor);
    nlohmann::json j;
    in >> j;
    data.noise.gyro_noise_density =
        j.value("gyro_noise_density", data.noise.gyro_noise_density);
    data.noise.accel_noise_density =
        j.value("accel_noise_density", data.noise.accel_noise_density);
    data.noise.gravity_magnitude =
        j.value("gravity_magnitude", data.noise.gravity_magnitude);
  }
  return data;
}

// ---- scenario files -------------------------------------------------------

struct Scenario {
  TrajectoryModel model;
  SimConfig config;
  bool random_visual_rotation = true;
};

namespace io_detail {

inline nlohmann::json axis_to_json(const AxisModel& a) {
  nlohmann::json terms = nlohmann::json::array();
  for (const Sinusoid& s : a.terms)
    terms.push_back({{"amplitude", s.amplitude},
                     {"frequency", s.frequency},
                     {"phase", s.phase}});
  return {{"terms", terms}, {"drift", a.drift}};
}

inline AxisModel axis_from_json(const nlohmann::json& j) {
  AxisModel a;
  a.drift = j.value("drift", 0.0);
  for (const auto& t : j.value("terms", nlohmann::json::array()))
    a.terms.push_back({t.value("amplitude", 0.0), t.value("frequency", 0.0),
                       t.value("phase", 0.0)});
  return a;
}

inline nlohmann::json vec3_to_json(const Vec3& v) {
  return {v[0], v[1], v[2]};
}

inline Vec3 vec3_from_json(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 3)
    throw ParseError("expected 3-element array");
  return Vec3(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
}

}  // namespace io_detail

inline void save_scenario(const std::string& path, const Scenario& sc) {
  nlohmann::json j;
  j["model"]["duration"] = sc.model.duration;
  for (int i = 0; i < 3; ++i) {
    j["model"]["position"].push_back(
        io_detail::axis_to_json(sc.model.position[i]));
    j["model"]["orientation"].push_back(
        io_detail::axis_to_json(sc.model.orientation[i]));
  }
  j["config"] = {
      {"imu_rate", sc.config.imu_rate},
      {"keyframe_rate", sc.config.keyframe_rate},
      {"true_scale", sc.config.true_scale},
      {"gyro_bias", io_detail::vec3_to_json(sc.config.true_bias.gyro)},
      {"accel_bias", io_detail::vec3_to_json(sc.config.true_bias.accel)},
      {"gyro_noise_density", sc.config.noise.gyro_noise_density},
      {"accel_noise_density", sc.config.noise.accel_noise_density},
      {"gravity_magnitude", sc.config.noise.gravity_magnitude},
      {"rng_seed", sc.config.rng_seed},
      {"noise_free", sc.config.noise_free},
      {"random_visual_rotation", sc.random_visual_rotation}};
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << j.dump(2) << '\n';
}

inline Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
  Scenario sc;
  const auto& m = j.at("model");
  sc.model.duration = m.value("duration", 20.0);
  for (int i = 0; i < 3; ++i) {
    if (m.contains("position") && i < static_cast<int>(m["position"].size()))
      sc.model.position[i] = io_detail::axis_from_json(m["position"][i]);
    if (m.contains("orientation") &&
        i < static_cast<int>(m["orientation"].size()))
      sc.model.orientation[i] = io_detail::axis_from_json(m["orientation"][i]);
  }
  const auto& c = j.value("config", nlohmann::json::object());
  sc.config.imu_rate = c.value("imu_rate", 200.0);
  sc.config.keyframe_rate = c.value("keyframe_rate", 4.0);
  sc.config.true_scale = c.value("true_scale", 1.0);
  if (c.contains("gyro_bias"))
    sc.config.true_bias.gyro = io_detail::vec3_from_json(c["gyro_bias"]);
  if (c.contains("accel_bias"))
    sc.config.true_bias.accel = io_detail::vec3_from_json(c["accel_bias"]);
  sc.config.noise.gyro_noise_density = c.value("gyro_noise_density", 1.7e-4);
  sc.config.noise.accel_noise_density = c.value("accel_noise_density", 2.0e-3);
  sc.config.noise.gravity_magnitude = c.value("gravity_magnitude", 9.80665);
  sc.config.rng_seed = c.value("rng_seed", std::uint64_t{0});
  sc.config.noise_free = c.value("noise_free", false);
  sc.random_visual_rotation = c.value("random_visual_rotation", true);
  if (sc.config.true_scale <= 0.0 || sc.config.imu_rate <= 0.0 ||
      sc.config.keyframe_rate <= 0.0)
    throw InvalidInput(path + ": non-positive scenario parameter");
  return sc;
}

// ---- reports --------------------------------------------------------------

inline constexpr int kReportFormatVersion = 1;

inline void write_report(const ExperimentReport& report,
                         const std::string& path) {
  nlohmann::json j;
  j["format_version"] = kReportFormatVersion;
  j["metadata"] = report.metadata;
  j["hist_bin_width"] = report.hist_bin_width;
  j["hist_max"] = report.hist_max;
  j["hist_counts"] = report.hist_counts;
  j["aggregates"] = {
      {"windows", report.aggregates.windows},
      {"accepted", report.aggregates.accepted},
      {"acceptance_rate", report.aggregates.acceptance_rate},
      {"mean_scale_error_pct", report.aggregates.mean_scale_error_pct},
      {"median_scale_error_pct", report.aggregates.median_scale_error_pct},
      {"mean_t_init", report.aggregates.mean_t_init},
      {"mean_t_tot", report.aggregates.mean_t_tot}};
  j["windows"] = nlohmann::json::array();
  for (const WindowReport& w : report.windows) {
    nlohmann::json jw = {
        {"start_time", w.start_time},
        {"t_init", w.t_init},
        {"accepted", w.accepted},
        {"scale_error_pct", w.scale_error_pct},
        {"scale_ratio", w.scale_ratio},
        {"gravity_error_deg", w.gravity_error_deg},
        {"gyro_bias_error", io_detail::vec3_to_json(w.gyro_bias_error)},
        {"accel_bias_error", io_detail::vec3_to_json(w.accel_bias_error)},
        {"solve_ms", w.solve_ms},
        {"map_update_ms", w.map_update_ms},
        {"total_ms", w.total_ms}};
    if (std::isfinite(w.t_tot)) jw["t_tot"] = w.t_tot;
    j["windows"].push_back(std::move(jw));
  }
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << j.dump(2) << '\n';
}

inline ExperimentReport read_report(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
  if (!j.contains("format_version") ||
      j["format_version"].get<int>() != kReportFormatVersion)
    throw UnsupportedVersion(path + ": unsupported report format version");

  ExperimentReport r;
  r.metadata = j.value("metadata", "");
  r.hist_bin_width = j.value("hist_bin_width", 0.05);
  r.hist_max = j.value("hist_max", 2.5);
  r.hist_counts = j.value("hist_counts", std::vector<std::int64_t>{});
  const auto& a = j.at("aggregates");
  r.aggregates.windows = a.value("windows", 0);
  r.aggregates.accepted = a.value("accepted", 0);
  r.aggregates.acceptance_rate = a.value("acceptance_rate", 0.0);
  r.aggregates.mean_scale_error_pct = a.value("mean_scale_error_pct", 0.0);
  r.aggregates.median_scale_error_pct = a.value("median_scale_error_pct", 0.0);
  r.aggregates.mean_t_init = a.value("mean_t_init", 0.0);
  r.aggregates.mean_t_tot = a.value("mean_t_tot", 0.0);
  for (const auto& jw : j.value("windows", nlohmann::json::array())) {
    WindowReport w;
    w.start_time = jw.value("start_time", 0.0);
    w.t_init = jw.value("t_init", 0.0);
    w.t_tot = jw.contains("t_tot")
                  ? jw["t_tot"].get<double>()
                  : std::numeric_limits<double>::quiet_NaN();
    w.accepted = jw.value("accepted", false);
    w.scale_error_pct = jw.value("scale_error_pct", 0.0);
    w.scale_ratio = jw.value("scale_ratio", 0.0);
    w.gravity_error_deg = jw.value("gravity_error_deg", 0.0);
    if (jw.contains("gyro_bias_error"))
      w.gyro_bias_error = io_detail::vec3_from_json(jw["gyro_bias_error"]);
    if (jw.contains("accel_bias_error"))
      w.accel_bias_error = io_detail::vec3_from_json(jw["accel_bias_error"]);
    w.solve_ms = jw.value("solve_ms", 0.0);
    w.map_update_ms = jw.value("map_update_ms", 0.0);
    w.total_ms = jw.value("total_ms", 0.0);
    r.windows.push_back(w);
  }
  return r;
}

/// Two-column histogram text: bin center, count. The overflow bin is marked
/// with the range maximum.
inline void write_histogram(const ExperimentReport& report,
                            const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << "# bin_center count\n";
  for (size_t i = 0; i < report.hist_counts.size(); ++i) {
    const bool overflow = (i + 1 == report.hist_counts.size());
    const double center = overflow
                              ? report.hist_max
                              : (static_cast<double>(i) + 0.5) *
                                    report.hist_bin_width;
    out << center << ' ' << report.hist_counts[i] << '\n';
  }
}

/// One record per window, documented column order.
inline void write_window_table(const ExperimentReport& report,
                               const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << "# start_time t_init t_tot accepted scale_error_pct scale_ratio "
         "gravity_error_deg solve_ms map_update_ms total_ms\n";
  for (const WindowReport& w : report.windows) {
    out << w.start_time << ' ' << w.t_init << ' ' << w.t_tot << ' '
        << (w.accepted ? 1 : 0) << ' ' << w.scale_error_pct << ' '
        << w.scale_ratio << ' ' << w.gravity_error_deg << ' ' << w.solve_ms
        << ' ' << w.map_update_ms << ' ' << w.total_ms << '\n';
  }
}

// ---- run configuration ----------------------------------------------------

inline RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
  RunConfig c;
  c.window_keyframes = j.value("window_keyframes", c.window_keyframes);
  c.keyframe_rate = j.value("keyframe_rate", c.keyframe_rate);
  c.stride = j.value("stride", c.stride);
  c.rng_seed = j.value("rng_seed", c.rng_seed);
  c.surrogate_scale_min = j.value("surrogate_scale_min", c.surrogate_scale_min);
  c.surrogate_scale_max = j.value("surrogate_scale_max", c.surrogate_scale_max);
  c.workers = j.value("workers", c.workers);
  c.hist_bin_width = j.value("hist_bin_width", c.hist_bin_width);
  c.hist_max = j.value("hist_max", c.hist_max);
  c.record_timing = j.value("record_timing", c.record_timing);
  if (j.contains("scale_seeds"))
    c.solver.scale_seeds = j["scale_seeds"].get<std::vector<double>>();
  c.solver.rejection_threshold =
      j.value("rejection_threshold", c.solver.rejection_threshold);
  c.solver.max_iterations = j.value("max_iterations", c.solver.max_iterations);
  if (j.contains("prior_std")) {
    const double std_p = j["prior_std"].get<double>();
    c.prior.accel_bias_covariance = std_p * std_p * Mat3::Identity();
  }
  if (c.window_keyframes < 2 || c.keyframe_rate <= 0.0 || c.stride <= 0.0)
    throw InvalidInput(path + ": non-positive run configuration value");
  return c;
}

}  // namespace vinit
