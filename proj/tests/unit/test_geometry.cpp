#include "keypose/error.hpp"
#include "keypose/geometry.hpp"
#include "keypose/random.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <functional>

using namespace keypose;

namespace {

CameraModel test_camera(const Pose6D& extrinsic = Pose6D::identity()) {
  return CameraModel(500, 500, 320, 240, 640, 480, extrinsic);
}

Quat random_quat(Rng& rng) {
  Quat q(uniform(rng, -1, 1), uniform(rng, -1, 1), uniform(rng, -1, 1), uniform(rng, -1, 1));
  return q.normalized();
}

void expect_error(ErrorKind kind, const std::function<void()>& fn) {
  try {
    fn();
    FAIL() << "expected " << to_string(kind);
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), kind) << e.what();
  }
}

}  // namespace

TEST(Pose, CanonicalSign) {
  const Pose6D p(Vec3::Zero(), Quat(-0.5, 0.5, 0.5, 0.5));
  EXPECT_GE(p.orientation().w(), 0.0);
  EXPECT_DOUBLE_EQ(p.orientation().x(), -0.5);
  // w == 0: the first nonzero component decides.
  const Pose6D q(Vec3::Zero(), Quat(0.0, 0.0, -1.0, 0.0));
  EXPECT_EQ(q.orientation().y(), 1.0);
}

TEST(Pose, CanonicalizeIdempotentAndRotationPreserving) {
  Rng rng(3);
  for (int i = 0; i < 1000; ++i) {
    const Quat q = random_quat(rng);
    const Quat c = canonicalize(q);
    EXPECT_EQ(canonicalize(c).coeffs(), c.coeffs());
    EXPECT_LE((q.toRotationMatrix() - c.toRotationMatrix()).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_NEAR(c.norm(), 1.0, 1e-9);
  }
}

TEST(Pose, UnitQuaternionStoredExactly) {
  Rng rng(4);
  for (int i = 0; i < 100; ++i) {
    const Pose6D p(Vec3::Random(), random_quat(rng));
    const Pose6D again(p.position(), p.orientation());
    EXPECT_EQ(again.orientation().coeffs(), p.orientation().coeffs());
  }
}

TEST(Pose, ComposeInverse) {
  Rng rng(5);
  const Pose6D a(Vec3(0.1, -0.2, 0.3), random_quat(rng));
  const Pose6D id = a.compose(a.inverse());
  EXPECT_LE(id.position().norm(), 1e-12);
  EXPECT_LE(rotation_angle_deg(id.orientation()), 1e-9);
}

TEST(Rotation, AngleProperties) {
  Rng rng(6);
  for (int i = 0; i < 500; ++i) {
    const Quat a = random_quat(rng), b = random_quat(rng);
    const double ab = relative_angle_deg(a, b);
    EXPECT_GE(ab, 0.0);
    EXPECT_LE(ab, 180.0);
    EXPECT_NEAR(ab, relative_angle_deg(b, a), 1e-9);
    EXPECT_NEAR(ab, oracle::chord_angle_deg(a, b), 1e-9);
    EXPECT_EQ(relative_angle_deg(a, a), 0.0);
  }
  EXPECT_NEAR(rotation_angle_deg(Quat(Eigen::AngleAxisd(M_PI / 3, Vec3::UnitY()))), 60.0, 1e-12);
}

TEST(Rotation, EulerRoundTrip) {
  Rng rng(7);
  for (int i = 0; i < 1000; ++i) {
    const Quat q = random_quat(rng);
    const EulerXYZ e = euler_xyz_from_rotation(q.toRotationMatrix());
    EXPECT_GE(e.pitch, -M_PI / 2);
    EXPECT_LE(e.pitch, M_PI / 2);
    EXPECT_LE(relative_angle_deg(q, quaternion_from_euler_xyz(e)), 1e-7);
  }
  // Intrinsic X-Y-Z: R = Rx * Ry * Rz.
  const EulerXYZ e{0.3, -0.4, 1.2};
  const Mat3 r = (Eigen::AngleAxisd(e.roll, Vec3::UnitX()) * Eigen::AngleAxisd(e.pitch, Vec3::UnitY()) *
                  Eigen::AngleAxisd(e.yaw, Vec3::UnitZ()))
                     .toRotationMatrix();
  const EulerXYZ back = euler_xyz_from_rotation(r);
  EXPECT_NEAR(back.roll, e.roll, 1e-12);
  EXPECT_NEAR(back.pitch, e.pitch, 1e-12);
  EXPECT_NEAR(back.yaw, e.yaw, 1e-12);
}

TEST(Rotation, GimbalLock) {
  const EulerXYZ e{0.7, M_PI / 2, 0.2};
  const Quat q = quaternion_from_euler_xyz(e);
  const EulerXYZ back = euler_xyz_from_rotation(q.toRotationMatrix());
  EXPECT_NEAR(back.pitch, M_PI / 2, 1e-6);
  EXPECT_LE(relative_angle_deg(q, quaternion_from_euler_xyz(back)), 1e-6);
}

TEST(Camera, ValidatesIntrinsics) {
  expect_error(ErrorKind::InvalidArgument, [] { CameraModel(0, 500, 320, 240, 640, 480, Pose6D()); });
  expect_error(ErrorKind::InvalidArgument, [] { CameraModel(500, 500, 640, 240, 640, 480, Pose6D()); });
  expect_error(ErrorKind::InvalidArgument, [] { CameraModel(500, 500, 320, 0, 640, 480, Pose6D()); });
}

TEST(Project, OpticalAxisHitsPrincipalPoint) {
  const CameraModel cam = test_camera();
  const ImageAction a = project(Pose6D(Vec3(0, 0, 1), Quat::Identity()), cam);
  EXPECT_DOUBLE_EQ(a.u, 320.0 / 640.0);
  EXPECT_DOUBLE_EQ(a.v, 240.0 / 480.0);
  EXPECT_DOUBLE_EQ(a.depth, 1.0);
  EXPECT_TRUE(a.in_frame);
}

TEST(Project, HandPinholeArithmetic) {
  const CameraModel cam = test_camera();
  const ImageAction a = project(Pose6D(Vec3(0.1, 0, 1), Quat::Identity()), cam);
  EXPECT_DOUBLE_EQ(a.u, 0.578125);
  // Same value from an independent projection written out here.
  const Vec3 p(0.1, 0, 1);
  EXPECT_DOUBLE_EQ(a.u, (500.0 * p.x() / p.z() + 320.0) / 640.0);
}

TEST(Project, BehindCameraAndOutOfFrame) {
  const CameraModel cam = test_camera();
  expect_error(ErrorKind::BehindCamera, [&] { project(Pose6D(Vec3(0, 0, -0.5), Quat::Identity()), cam); });
  expect_error(ErrorKind::BehindCamera, [&] { project(Pose6D(Vec3(0, 0, 1e-7), Quat::Identity()), cam); });
  const ImageAction off = project(Pose6D(Vec3(5, 0, 1), Quat::Identity()), cam);
  EXPECT_FALSE(off.in_frame);
  EXPECT_GT(off.u, 1.0);
}

TEST(Project, OrientationInCameraFrame) {
  const Quat ext_q(Eigen::AngleAxisd(0.4, Vec3::UnitX()));
  const CameraModel cam = test_camera(Pose6D(Vec3(0, 0, 2), ext_q));
  const Quat world(Eigen::AngleAxisd(0.3, Vec3::UnitZ()));
  const ImageAction a = project(Pose6D(Vec3(0, 0, 0), world), cam);
  EXPECT_LE(relative_angle_deg(a.orientation, ext_q * world), 1e-12);
}

TEST(Unproject, RoundTripRandomFrustum) {
  Rng rng(11);
  const CameraModel cam = CameraModel::look_at(Vec3(1.2, 0.3, 0.8), Vec3(0.5, 0, 0), 50, 640, 480);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const ImageAction a{uniform(rng, 0, 1), uniform(rng, 0, 1), uniform(rng, 0.2, 2.0), random_quat(rng), true};
    const Pose6D p = unproject(a, cam);
    const ImageAction b = project(p, cam);
    EXPECT_NEAR(b.u, a.u, 1e-9);
    EXPECT_NEAR(b.v, a.v, 1e-9);
    EXPECT_NEAR(b.depth, a.depth, 1e-9);
    EXPECT_LE(relative_angle_deg(b.orientation, a.orientation), 1e-6);
    const Pose6D back = unproject(b, cam);
    worst = std::max(worst, (back.position() - p.position()).norm());
  }
  EXPECT_LT(worst, 1e-9);
}

TEST(Unproject, PrincipalPointAndErrors) {
  const CameraModel cam = test_camera();
  const Pose6D p = unproject({0.5, 0.5, 2.0, Quat::Identity(), true}, cam);
  EXPECT_NEAR(p.position().x(), 0.0, 1e-15);
  EXPECT_NEAR(p.position().y(), 0.0, 1e-15);
  EXPECT_DOUBLE_EQ(p.position().z(), 2.0);
  expect_error(ErrorKind::NonPositiveDepth, [&] { unproject({0.5, 0.5, 0.0, Quat::Identity(), true}, cam); });
}

TEST(Camera, LookAtPointsAtTarget) {
  const Vec3 target(0.5, 0.0, 0.0);
  const CameraModel cam = CameraModel::look_at(Vec3(1.1, 0.2, 0.7), target, 50, 640, 480);
  const ImageAction a = project(Pose6D(target, Quat::Identity()), cam);
  EXPECT_NEAR(a.u, 0.5, 1e-12);
  EXPECT_NEAR(a.v, 0.5, 1e-12);
  EXPECT_NEAR(cam.vertical_fov_deg(), 50.0, 1e-9);
  // World up projects upward in the image (smaller v).
  const ImageAction up = project(Pose6D(target + Vec3(0, 0, 0.1), Quat::Identity()), cam);
  EXPECT_LT(up.v, 0.5);
}

TEST(Trajectory, Validation) {
  const Keypose g{Pose6D(), Gripper::Grasp};
  const Keypose r{Pose6D(), Gripper::Release};
  const std::vector<Keypose> ok{g, r};
  EXPECT_NO_THROW(Trajectory{std::span<const Keypose>(ok)});
  const std::vector<Keypose> swapped{r, g};
  expect_error(ErrorKind::InvalidArgument, [&] { Trajectory{std::span<const Keypose>(swapped)}; });
  const std::vector<Keypose> three{g, r, r};
  expect_error(ErrorKind::InvalidArgument, [&] { Trajectory{std::span<const Keypose>(three)}; });
}

TEST(Waypoints, FiveWaypointConstruction) {
  const Trajectory t(Pose6D(Vec3(0, 0, 0), Quat::Identity()), Pose6D(Vec3(0.3, 0, 0), Quat::Identity()));
  const auto w = expand_waypoints(t, 0.15);
  ASSERT_EQ(w.size(), 5u);
  EXPECT_DOUBLE_EQ(w[0].position().z(), 0.15);
  EXPECT_DOUBLE_EQ(w[1].position().z(), 0.0);
  EXPECT_DOUBLE_EQ(w[2].position().z(), 0.15);
  EXPECT_DOUBLE_EQ(w[3].position().z(), 0.15);
  EXPECT_DOUBLE_EQ(w[3].position().x(), 0.3);
  EXPECT_DOUBLE_EQ(w[4].position().x(), 0.3);
}

TEST(Waypoints, DegenerateTrajectoryStillValid) {
  const Pose6D p(Vec3(0.4, 0.1, 0.02), Quat::Identity());
  EXPECT_EQ(expand_waypoints(Trajectory(p, p)).size(), 5u);
}

TEST(Waypoints, GraspAndReleaseExactAndOrientationOnlyChangesInAlignment) {
  Rng rng(12);
  for (int i = 0; i < 200; ++i) {
    const Pose6D g(Vec3::Random() * 0.3, random_quat(rng));
    const Pose6D r(Vec3::Random() * 0.3, random_quat(rng));
    const auto w = expand_waypoints(Trajectory(g, r), 0.15, 4);
    ASSERT_EQ(w.size(), 9u);
    EXPECT_EQ(w[1].position(), g.position());
    EXPECT_EQ(w[1].orientation().coeffs(), g.orientation().coeffs());
    EXPECT_EQ(w.back().position(), r.position());
    EXPECT_EQ(w.back().orientation().coeffs(), r.orientation().coeffs());
    EXPECT_EQ(w[0].orientation().coeffs(), g.orientation().coeffs());
    EXPECT_EQ(w[2].orientation().coeffs(), g.orientation().coeffs());
    EXPECT_LE(relative_angle_deg(w[w.size() - 2].orientation(), r.orientation()), 1e-9);
  }
}
