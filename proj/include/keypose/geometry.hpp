#pragma once

#include <Eigen/Geometry>

#include <array>
#include <span>
#include <vector>

namespace keypose {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Quat = Eigen::Quaterniond;

/// Quaternion sign canonicalization: w >= 0, and when w == 0 the first nonzero
/// of (x, y, z) is positive. Exact (only flips signs).
Quat canonicalize(const Quat& q);

/// Rotation angle of q in degrees, in [0, 180]. Uses 2*atan2(|vec|, |w|).
double rotation_angle_deg(const Quat& q);

/// Angle of the relative rotation a^-1 * b, in degrees.
double relative_angle_deg(const Quat& a, const Quat& b);

/// Intrinsic X-Y-Z Euler angles (R = Rx(roll) * Ry(pitch) * Rz(yaw)), radians.
/// roll, yaw in (-pi, pi]; pitch in [-pi/2, pi/2].
struct EulerXYZ {
  double roll = 0.0;
  double pitch = 0.0;
  double yaw = 0.0;
};

EulerXYZ euler_xyz_from_rotation(const Mat3& r);
Quat quaternion_from_euler_xyz(const EulerXYZ& e);

/// Rigid pose: position in meters and a canonical unit quaternion.
class Pose6D {
 public:
  Pose6D();
  // Normalizes q unless it is already unit within 1e-12 (so stored poses
  // reconstruct bit-exactly), then canonicalizes its sign.
  Pose6D(const Vec3& position, const Quat& orientation);

  static Pose6D identity() { return {}; }

  const Vec3& position() const noexcept { return position_; }
  const Quat& orientation() const noexcept { return orientation_; }
  Mat3 rotation() const { return orientation_.toRotationMatrix(); }

  /// Applies this transform to a point: R * p + t.
  Vec3 transform_point(const Vec3& p) const;
  /// this * other (other expressed in this frame).
  Pose6D compose(const Pose6D& other) const;
  Pose6D inverse() const;

 private:
  Vec3 position_;
  Quat orientation_;
};

/// Pinhole camera. `extrinsic` maps world to camera coordinates
/// (x right, y down, z forward).
class CameraModel {
 public:
  CameraModel(double fx, double fy, double cx, double cy, int width, int height,
              const Pose6D& extrinsic);

  double fx() const noexcept { return fx_; }
  double fy() const noexcept { return fy_; }
  double cx() const noexcept { return cx_; }
  double cy() const noexcept { return cy_; }
  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  const Pose6D& extrinsic() const noexcept { return extrinsic_; }

  /// Builds a camera at `eye` looking at `target` with world +z as up hint.
  static CameraModel look_at(const Vec3& eye, const Vec3& target, double vertical_fov_deg,
                             int width, int height);

  double vertical_fov_deg() const;

 private:
  double fx_, fy_, cx_, cy_;
  int width_, height_;
  Pose6D extrinsic_;
};

/// Action expressed in normalized image coordinates plus camera-frame depth.
struct ImageAction {
  double u = 0.0;
  double v = 0.0;
  double depth = 0.0;
  Quat orientation = Quat::Identity();  // in camera frame
  bool in_frame = true;
};

inline constexpr double kMinDepth = 1e-6;

/// Throws BehindCamera when camera-frame z <= 1e-6. Orientation in camera
/// frame is R_extrinsic * R_world.
ImageAction project(const Pose6D& pose, const CameraModel& cam);
/// Throws NonPositiveDepth when depth <= 0.
Pose6D unproject(const ImageAction& action, const CameraModel& cam);

/// Pixel coordinates of a world point (no range check beyond depth).
Eigen::Vector2d project_pixel(const Vec3& world_point, const CameraModel& cam);

enum class Gripper { Grasp, Release };

struct Keypose {
  Pose6D pose;
  Gripper gripper = Gripper::Grasp;
};

/// Pick-and-place trajectory: one grasp keypose followed by one release keypose.
class Trajectory {
 public:
  Trajectory(const Pose6D& grasp, const Pose6D& release);
  explicit Trajectory(std::span<const Keypose> keyposes);

  const Keypose& grasp() const noexcept { return keyposes_[0]; }
  const Keypose& release() const noexcept { return keyposes_[1]; }
  std::span<const Keypose> keyposes() const noexcept { return keyposes_; }

 private:
  std::array<Keypose, 2> keyposes_;
};

inline constexpr double kDefaultLiftHeight = 0.15;

/// Dense waypoint list: pre-grasp, grasp, lifted grasp, aligned above release,
/// release. `alignment_substeps` inserts slerped poses between the lifted
/// grasp and the aligned-above-release waypoint; orientation changes nowhere
/// else.
std::vector<Pose6D> expand_waypoints(const Trajectory& traj,
                                     double lift_height = kDefaultLiftHeight,
                                     int alignment_substeps = 0);

}  // namespace keypose
