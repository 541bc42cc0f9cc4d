#pragma once

#include <Eigen/Core>

#include <stdexcept>
#include <string>
#include <vector>

#include "vinit/so3.hpp"

namespace vinit {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct InvalidInput : Error {
  using Error::Error;
};
struct InvalidData : Error {
  using Error::Error;
};
struct ParseError : Error {
  using Error::Error;
};
struct NumericalError : Error {
  using Error::Error;
};
struct DegenerateInput : Error {
  using Error::Error;
};
struct UnsupportedVersion : Error {
  using Error::Error;
};
struct InvalidState : Error {
  using Error::Error;
};

/// One IMU reading: angular rate and specific force in the body frame.
struct ImuSample {
  double t = 0.0;            // seconds
  Vec3 gyro = Vec3::Zero();  // rad/s
  Vec3 accel = Vec3::Zero(); // m/s^2
};

struct NoiseParams {
  double gyro_noise_density = 1.7e-4;  // rad/s/sqrt(Hz)
  double accel_noise_density = 2.0e-3; // m/s^2/sqrt(Hz)
  double gravity_magnitude = 9.80665;  // m/s^2

  // Canonical gravity g_I = (0, 0, G); the gravity rotation maps this into
  // the visual world frame.
  Vec3 canonical_gravity() const { return Vec3(0.0, 0.0, gravity_magnitude); }
};

struct BiasState {
  Vec3 gyro = Vec3::Zero();  // rad/s
  Vec3 accel = Vec3::Zero(); // m/s^2
};

/// One keyframe of the up-to-scale visual trajectory: body-to-world rotation
/// and up-to-scale position.
struct Keyframe {
  double t = 0.0;
  Mat3 rotation = Mat3::Identity();
  Vec3 position = Vec3::Zero();
};

struct UpToScaleTrajectory {
  std::vector<Keyframe> keyframes;

  void validate() const {
    if (keyframes.size() < 2)
      throw InvalidInput("trajectory needs at least 2 keyframes");
    for (size_t i = 1; i < keyframes.size(); ++i) {
      if (keyframes[i].t <= keyframes[i - 1].t)
        throw InvalidInput("keyframe timestamps must be strictly increasing");
    }
  }
};

inline void check_monotone(const std::vector<ImuSample>& samples) {
  for (size_t i = 1; i < samples.size(); ++i) {
    if (samples[i].t <= samples[i - 1].t)
      throw InvalidInput("IMU timestamps must be strictly increasing (sample " +
                         std::to_string(i) + ")");
  }
}

}  // namespace vinit
