#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cmath>

namespace vinit {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

// Branch switch between closed-form Rodrigues coefficients and their
// second-order Taylor expansions. Below this angle the closed forms lose
// more to cancellation (e.g. 1 - cos) than the truncated series do.
inline constexpr double kSmallAngle = 1e-3;

inline Mat3 hat(const Vec3& v) {
  Mat3 m;
  m << 0.0, -v.z(), v.y(),
       v.z(), 0.0, -v.x(),
      -v.y(), v.x(), 0.0;
  return m;
}

inline Vec3 vee(const Mat3& m) {
  return Vec3(m(2, 1), m(0, 2), m(1, 0));
}

/// Exponential map so(3) -> SO(3), Rodrigues formula.
inline Mat3 exp_so3(const Vec3& phi) {
  const double theta2 = phi.squaredNorm();
  const double theta = std::sqrt(theta2);
  const Mat3 w = hat(phi);
  double a, b;  // sin(t)/t and (1-cos(t))/t^2
  if (theta < kSmallAngle) {
    a = 1.0 - theta2 / 6.0;
    b = 0.5 - theta2 / 24.0;
  } else {
    a = std::sin(theta) / theta;
    b = (1.0 - std::cos(theta)) / theta2;
  }
  return Mat3::Identity() + a * w + b * w * w;
}

/// Logarithm map SO(3) -> so(3); returns the canonical representative with
/// norm <= pi. Goes through the unit quaternion, whose extraction pivots on
/// the largest component and stays well-conditioned for every angle
/// including pi, where the antisymmetric part of R vanishes.
inline Vec3 log_so3(const Mat3& R) {
  Eigen::Quaterniond q(R);
  q.normalize();
  if (q.w() < 0.0) q.coeffs() = -q.coeffs();  // canonical half-angle in [0, pi/2]
  const Vec3 v = q.vec();                     // sin(theta/2) * axis
  const double sin_half = v.norm();
  if (sin_half < 1e-9) return 2.0 * v;        // phi ~ 2 v, error O(theta^3)
  const double theta = 2.0 * std::atan2(sin_half, q.w());
  return v * (theta / sin_half);
}

/// Right Jacobian of SO(3): exp(phi + d) ~ exp(phi) * exp(Jr(phi) * d).
inline Mat3 right_jacobian(const Vec3& phi) {
  const double theta2 = phi.squaredNorm();
  const double theta = std::sqrt(theta2);
  const Mat3 w = hat(phi);
  double b, c;  // (1-cos(t))/t^2 and (t-sin(t))/t^3
  if (theta < kSmallAngle) {
    b = 0.5 - theta2 / 24.0;
    c = 1.0 / 6.0 - theta2 / 120.0;
  } else {
    b = (1.0 - std::cos(theta)) / theta2;
    c = (theta - std::sin(theta)) / (theta2 * theta);
  }
  return Mat3::Identity() - b * w + c * w * w;
}

inline Mat3 right_jacobian_inverse(const Vec3& phi) {
  const double theta2 = phi.squaredNorm();
  const double theta = std::sqrt(theta2);
  const Mat3 w = hat(phi);
  double c;
  if (theta < kSmallAngle) {
    c = 1.0 / 12.0 + theta2 / 720.0;
  } else {
    c = 1.0 / theta2 - (1.0 + std::cos(theta)) / (2.0 * theta * std::sin(theta));
  }
  return Mat3::Identity() + 0.5 * w + c * w * w;
}

/// Shortest-arc rotation mapping unit vector `from` onto unit vector `to`.
inline Mat3 rotation_between(const Vec3& from, const Vec3& to) {
  const Vec3 a = from.normalized();
  const Vec3 b = to.normalized();
  const Vec3 cross = a.cross(b);
  const double sin_theta = cross.norm();
  const double cos_theta = a.dot(b);
  if (sin_theta < 1e-12) {
    if (cos_theta > 0.0) return Mat3::Identity();
    // Antiparallel: rotate by pi about any axis orthogonal to a.
    Vec3 ortho = a.cross(Vec3::UnitX());
    if (ortho.squaredNorm() < 1e-12) ortho = a.cross(Vec3::UnitY());
    return exp_so3(M_PI * ortho.normalized());
  }
  const double theta = std::atan2(sin_theta, cos_theta);
  return exp_so3(theta * cross / sin_theta);
}

}  // namespace vinit
