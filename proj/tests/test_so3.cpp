#include <catch_amalgamated.hpp>

#include <random>

#include "vinit/so3.hpp"

using namespace vinit;

namespace {

std::mt19937_64 rng(42);

Vec3 random_axis_angle(double max_norm) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> uni(0.0, max_norm);
  Vec3 v(gauss(rng), gauss(rng), gauss(rng));
  return v.normalized() * uni(rng);
}

}  // namespace

TEST_CASE("hat zero vector") {
  REQUIRE(hat(Vec3::Zero()).isZero(0.0));
}

TEST_CASE("hat canonical basis") {
  Mat3 expected;
  expected << 0, -1, 0, 1, 0, 0, 0, 0, 0;
  REQUIRE((hat(Vec3(0, 0, 1)) - expected).norm() == 0.0);
}

TEST_CASE("hat reproduces cross product") {
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int i = 0; i < 100; ++i) {
    const Vec3 v(gauss(rng), gauss(rng), gauss(rng));
    const Vec3 w(gauss(rng), gauss(rng), gauss(rng));
    REQUIRE((hat(v) * w - v.cross(w)).norm() < 1e-14);
    REQUIRE((hat(v).transpose() + hat(v)).norm() == 0.0);
  }
}

TEST_CASE("exp identity and quarter turn") {
  REQUIRE((exp_so3(Vec3::Zero()) - Mat3::Identity()).norm() == 0.0);
  const Mat3 R = exp_so3(Vec3(0, 0, M_PI / 2));
  REQUIRE((R * Vec3::UnitX() - Vec3::UnitY()).norm() < 1e-15);
}

TEST_CASE("log identity and pi rotation") {
  REQUIRE(log_so3(Mat3::Identity()).norm() == 0.0);
  const Vec3 phi = log_so3(exp_so3(Vec3(0, 0, M_PI)));
  REQUIRE(std::abs(phi.norm() - M_PI) < 1e-9);
  REQUIRE(std::abs(std::abs(phi.z()) - M_PI) < 1e-9);
}

TEST_CASE("exp/log round trip") {
  for (int i = 0; i < 1000; ++i) {
    const Vec3 phi = random_axis_angle(M_PI - 1e-3);
    REQUIRE((log_so3(exp_so3(phi)) - phi).norm() < 1e-9);
  }
}

TEST_CASE("log round trip near pi") {
  for (int i = 0; i < 200; ++i) {
    std::uniform_real_distribution<double> near_pi(M_PI - 1e-5, M_PI - 1e-12);
    Vec3 phi = random_axis_angle(1.0).normalized() * near_pi(rng);
    const Mat3 R = exp_so3(phi);
    REQUIRE((exp_so3(log_so3(R)) - R).norm() < 1e-9);
  }
}

TEST_CASE("group consistency") {
  for (int i = 0; i < 100; ++i) {
    const Mat3 R = exp_so3(random_axis_angle(M_PI - 1e-3));
    REQUIRE((R * R.transpose() - Mat3::Identity()).norm() < 1e-12);
    REQUIRE(std::abs(R.determinant() - 1.0) < 1e-12);
  }
}

TEST_CASE("right jacobian identity at zero") {
  REQUIRE((right_jacobian(Vec3::Zero()) - Mat3::Identity()).norm() == 0.0);
}

TEST_CASE("right jacobian defining property") {
  for (int i = 0; i < 200; ++i) {
    const Vec3 phi = random_axis_angle(M_PI - 0.1);
    const Vec3 delta = random_axis_angle(1.0).normalized() * 1e-6;
    const Mat3 lhs = exp_so3(phi + delta);
    const Mat3 rhs = exp_so3(phi) * exp_so3(right_jacobian(phi) * delta);
    REQUIRE((lhs - rhs).norm() < 1e-9);
  }
}

TEST_CASE("right jacobian matches finite differences") {
  const Vec3 phi(0, 0, M_PI / 2);
  const double h = 1e-7;
  Mat3 fd;
  for (int c = 0; c < 3; ++c) {
    Vec3 dp = Vec3::Zero();
    dp[c] = h;
    // exp(phi + h e_c) = exp(phi) exp(Jr h e_c) => column of Jr from log
    fd.col(c) =
        log_so3(exp_so3(phi).transpose() * exp_so3(phi + dp)) / h;
  }
  REQUIRE((fd - right_jacobian(phi)).norm() < 1e-6);
}

TEST_CASE("right jacobian inverse") {
  for (int i = 0; i < 100; ++i) {
    const Vec3 phi = random_axis_angle(M_PI - 0.1);
    REQUIRE((right_jacobian(phi) * right_jacobian_inverse(phi) -
             Mat3::Identity())
                .norm() < 1e-10);
  }
}

TEST_CASE("small-angle branch continuity") {
  // The Taylor and closed-form paths must agree across the switch; the
  // smooth variation over 2*eps is far below the tolerance.
  const double eps = 1e-13;
  const Vec3 dir = Vec3(1, 2, 3).normalized();
  const Vec3 lo = dir * (kSmallAngle - eps);
  const Vec3 hi = dir * (kSmallAngle + eps);
  REQUIRE((exp_so3(lo) - exp_so3(hi)).norm() < 1e-12);
  REQUIRE((right_jacobian(lo) - right_jacobian(hi)).norm() < 1e-12);
}

TEST_CASE("rotation_between maps vectors") {
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int i = 0; i < 100; ++i) {
    const Vec3 a = Vec3(gauss(rng), gauss(rng), gauss(rng)).normalized();
    const Vec3 b = Vec3(gauss(rng), gauss(rng), gauss(rng)).normalized();
    REQUIRE((rotation_between(a, b) * a - b).norm() < 1e-12);
  }
  REQUIRE((rotation_between(Vec3::UnitZ(), -Vec3::UnitZ()) * Vec3::UnitZ() +
           Vec3::UnitZ())
              .norm() < 1e-12);
}
