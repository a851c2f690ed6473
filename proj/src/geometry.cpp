#include "keypose/geometry.hpp"

#include "keypose/error.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace keypose {

namespace {

constexpr double kRadToDeg = 180.0 / std::numbers::pi;

bool is_finite(const Quat& q) {
  return std::isfinite(q.w()) && std::isfinite(q.x()) && std::isfinite(q.y()) &&
         std::isfinite(q.z());
}

}  // namespace

Quat canonicalize(const Quat& q) {
  const std::array<double, 4> c{q.w(), q.x(), q.y(), q.z()};
  for (double value : c) {
    if (value > 0.0) return q;
    if (value < 0.0) return Quat(-q.w(), -q.x(), -q.y(), -q.z());
  }
  return q;
}

double rotation_angle_deg(const Quat& q) {
  return 2.0 * std::atan2(q.vec().norm(), std::abs(q.w())) * kRadToDeg;
}

double relative_angle_deg(const Quat& a, const Quat& b) {
  return rotation_angle_deg(a.conjugate() * b);
}

EulerXYZ euler_xyz_from_rotation(const Mat3& r) {
  EulerXYZ e;
  const double cos_pitch = std::hypot(r(0, 0), r(0, 1));
  e.pitch = std::atan2(r(0, 2), cos_pitch);
  if (cos_pitch > 1e-12) {
    e.roll = std::atan2(-r(1, 2), r(2, 2));
    e.yaw = std::atan2(-r(0, 1), r(0, 0));
  } else {
    // Gimbal lock: roll and yaw are coupled, put everything into roll.
    e.roll = std::atan2(r(2, 1), r(1, 1));
    e.yaw = 0.0;
  }
  return e;
}

Quat quaternion_from_euler_xyz(const EulerXYZ& e) {
  const Quat q = Eigen::AngleAxisd(e.roll, Vec3::UnitX()) *
                 Eigen::AngleAxisd(e.pitch, Vec3::UnitY()) *
                 Eigen::AngleAxisd(e.yaw, Vec3::UnitZ());
  return q.normalized();
}

Pose6D::Pose6D() : position_(Vec3::Zero()), orientation_(Quat::Identity()) {}

Pose6D::Pose6D(const Vec3& position, const Quat& orientation) : position_(position) {
  if (!position.allFinite() || !is_finite(orientation)) {
    throw Error(ErrorKind::InvalidArgument, "pose has non-finite components");
  }
  const double sq = orientation.squaredNorm();
  if (sq < 1e-24) throw Error(ErrorKind::InvalidArgument, "zero-norm quaternion");
  Quat q = orientation;
  if (std::abs(sq - 1.0) > 1e-12) q.coeffs() /= std::sqrt(sq);
  orientation_ = canonicalize(q);
}

Vec3 Pose6D::transform_point(const Vec3& p) const {
  return orientation_ * p + position_;
}

Pose6D Pose6D::compose(const Pose6D& other) const {
  return {transform_point(other.position_), orientation_ * other.orientation_};
}

Pose6D Pose6D::inverse() const {
  const Quat inv = orientation_.conjugate();
  return {-(inv * position_), inv};
}

CameraModel::CameraModel(double fx, double fy, double cx, double cy, int width, int height,
                         const Pose6D& extrinsic)
    : fx_(fx), fy_(fy), cx_(cx), cy_(cy), width_(width), height_(height), extrinsic_(extrinsic) {
  if (!(fx > 0.0) || !(fy > 0.0)) {
    throw Error(ErrorKind::InvalidArgument, "focal lengths must be positive");
  }
  if (width <= 0 || height <= 0) {
    throw Error(ErrorKind::InvalidArgument, "image size must be positive");
  }
  if (!(cx > 0.0 && cx < width) || !(cy > 0.0 && cy < height)) {
    throw Error(ErrorKind::InvalidArgument, "principal point must lie inside the image");
  }
}

CameraModel CameraModel::look_at(const Vec3& eye, const Vec3& target, double vertical_fov_deg,
                                 int width, int height) {
  const Vec3 forward = (target - eye).normalized();
  Vec3 up = Vec3::UnitZ();
  if (std::abs(forward.dot(up)) > 1.0 - 1e-9) up = Vec3::UnitY();
  const Vec3 right = forward.cross(up).normalized();
  const Vec3 down = forward.cross(right);
  Mat3 cam_to_world;
  cam_to_world.col(0) = right;
  cam_to_world.col(1) = down;
  cam_to_world.col(2) = forward;
  const Mat3 world_to_cam = cam_to_world.transpose();
  const Pose6D extrinsic(-(world_to_cam * eye), Quat(world_to_cam));

  const double fov = vertical_fov_deg / kRadToDeg;
  const double f = 0.5 * height / std::tan(0.5 * fov);
  return {f, f, 0.5 * width, 0.5 * height, width, height, extrinsic};
}

double CameraModel::vertical_fov_deg() const {
  return 2.0 * std::atan(0.5 * height_ / fy_) * kRadToDeg;
}

ImageAction project(const Pose6D& pose, const CameraModel& cam) {
  const Vec3 p = cam.extrinsic().transform_point(pose.position());
  if (!(p.z() > kMinDepth)) {
    throw Error(ErrorKind::BehindCamera, "camera-frame z = " + std::to_string(p.z()));
  }
  ImageAction a;
  a.u = (cam.fx() * p.x() / p.z() + cam.cx()) / cam.width();
  a.v = (cam.fy() * p.y() / p.z() + cam.cy()) / cam.height();
  a.depth = p.z();
  a.orientation = canonicalize(cam.extrinsic().orientation() * pose.orientation());
  a.in_frame = a.u >= 0.0 && a.u <= 1.0 && a.v >= 0.0 && a.v <= 1.0;
  return a;
}

Pose6D unproject(const ImageAction& action, const CameraModel& cam) {
  if (!(action.depth > 0.0)) {
    throw Error(ErrorKind::NonPositiveDepth, "depth = " + std::to_string(action.depth));
  }
  const double z = action.depth;
  const Vec3 p_cam((action.u * cam.width() - cam.cx()) * z / cam.fx(),
                   (action.v * cam.height() - cam.cy()) * z / cam.fy(), z);
  const Pose6D cam_to_world = cam.extrinsic().inverse();
  return {cam_to_world.transform_point(p_cam),
          cam_to_world.orientation() * action.orientation};
}

Eigen::Vector2d project_pixel(const Vec3& world_point, const CameraModel& cam) {
  const Vec3 p = cam.extrinsic().transform_point(world_point);
  if (!(p.z() > kMinDepth)) {
    throw Error(ErrorKind::BehindCamera, "camera-frame z = " + std::to_string(p.z()));
  }
  return {cam.fx() * p.x() / p.z() + cam.cx(), cam.fy() * p.y() / p.z() + cam.cy()};
}

Trajectory::Trajectory(const Pose6D& grasp, const Pose6D& release)
    : keyposes_{Keypose{grasp, Gripper::Grasp}, Keypose{release, Gripper::Release}} {}

Trajectory::Trajectory(std::span<const Keypose> keyposes) {
  if (keyposes.size() != 2) {
    throw Error(ErrorKind::InvalidArgument,
                "trajectory needs exactly 2 keyposes, got " + std::to_string(keyposes.size()));
  }
  if (keyposes[0].gripper != Gripper::Grasp || keyposes[1].gripper != Gripper::Release) {
    throw Error(ErrorKind::InvalidArgument, "trajectory order must be grasp then release");
  }
  keyposes_ = {keyposes[0], keyposes[1]};
}

std::vector<Pose6D> expand_waypoints(const Trajectory& traj, double lift_height,
                                     int alignment_substeps) {
  if (!(lift_height > 0.0)) {
    throw Error(ErrorKind::InvalidArgument, "lift height must be positive");
  }
  const Pose6D& grasp = traj.grasp().pose;
  const Pose6D& release = traj.release().pose;
  const Vec3 lift(0.0, 0.0, lift_height);

  const Pose6D lifted_grasp(grasp.position() + lift, grasp.orientation());
  const Pose6D above_release(release.position() + lift, release.orientation());

  std::vector<Pose6D> out;
  out.reserve(5 + static_cast<std::size_t>(std::max(alignment_substeps, 0)));
  out.push_back(lifted_grasp);  // pre-grasp approach
  out.push_back(grasp);
  out.push_back(lifted_grasp);
  for (int i = 1; i <= alignment_substeps; ++i) {
    const double t = static_cast<double>(i) / (alignment_substeps + 1);
    out.emplace_back((1.0 - t) * lifted_grasp.position() + t * above_release.position(),
                     lifted_grasp.orientation().slerp(t, above_release.orientation()));
  }
  out.push_back(above_release);
  out.push_back(release);
  return out;
}

}  // namespace keypose
