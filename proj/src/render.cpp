#include "keypose/render.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace keypose {

namespace {

constexpr double kEps = 1e-9;

std::optional<RayHit> intersect_sphere(const Vec3& center, double radius, const Vec3& o,
                                       const Vec3& d) {
  const Vec3 oc = o - center;
  const double a = d.squaredNorm();
  const double b = 2.0 * oc.dot(d);
  const double c = oc.squaredNorm() - radius * radius;
  const double disc = b * b - 4.0 * a * c;
  if (disc < 0.0) return std::nullopt;
  const double root = std::sqrt(disc);
  double t = (-b - root) / (2.0 * a);
  if (t <= kEps) t = (-b + root) / (2.0 * a);
  if (t <= kEps) return std::nullopt;
  return RayHit{t, (o + t * d - center) / radius};
}

std::optional<RayHit> intersect_box(const SceneObject& obj, const Vec3& o, const Vec3& d) {
  const Quat q(Eigen::AngleAxisd(obj.yaw, Vec3::UnitZ()));
  const Quat inv = q.conjugate();
  const Vec3 lo = inv * (o - obj.position);
  const Vec3 ld = inv * d;
  const Vec3 h = obj.asset.half_extents();
  double t_near = -std::numeric_limits<double>::infinity();
  double t_far = std::numeric_limits<double>::infinity();
  int near_axis = -1;
  double near_sign = 0.0;
  for (int i = 0; i < 3; ++i) {
    if (std::abs(ld[i]) < 1e-15) {
      if (std::abs(lo[i]) > h[i]) return std::nullopt;
      continue;
    }
    double t0 = (-h[i] - lo[i]) / ld[i];
    double t1 = (h[i] - lo[i]) / ld[i];
    double sign = -1.0;  // entering through the -h face
    if (t0 > t1) {
      std::swap(t0, t1);
      sign = 1.0;
    }
    if (t0 > t_near) {
      t_near = t0;
      near_axis = i;
      near_sign = sign;
    }
    t_far = std::min(t_far, t1);
    if (t_near > t_far) return std::nullopt;
  }
  if (t_far <= kEps) return std::nullopt;
  Vec3 n_local = Vec3::Zero();
  double t = t_near;
  if (t_near <= kEps || near_axis < 0) {
    // Origin inside the box: report the exit point.
    t = t_far;
    n_local = -ld.normalized();
  } else {
    n_local[near_axis] = near_sign;
  }
  return RayHit{t, q * n_local};
}

}  // namespace

std::optional<RayHit> intersect_ray(const SceneObject& object, const Vec3& origin,
                                    const Vec3& direction) {
  if (object.asset.shape == Shape::Sphere) {
    return intersect_sphere(object.position, 0.5 * object.asset.diameter(), origin, direction);
  }
  return intersect_box(object, origin, direction);
}

void pixel_ray(const CameraModel& camera, double px, double py, Vec3& origin, Vec3& direction) {
  const Pose6D cam_to_world = camera.extrinsic().inverse();
  origin = cam_to_world.position();
  direction = cam_to_world.orientation() *
              Vec3((px - camera.cx()) / camera.fx(), (py - camera.cy()) / camera.fy(), 1.0);
}

RenderOutput render_stub(std::span<const SceneObject> objects, const CameraModel& camera,
                         const RenderConfig& cfg) {
  const int w = camera.width();
  const int h = camera.height();
  RenderOutput out{RgbImage(w, h, cfg.background), DepthImage(w, h, cfg.far_plane),
                   LabelImage{w, h, std::vector<std::int16_t>(static_cast<std::size_t>(w) * h, -1)}};

  const Pose6D cam_to_world = camera.extrinsic().inverse();
  const Vec3 origin = cam_to_world.position();
  const Quat to_world = cam_to_world.orientation();

  for (std::size_t k = 0; k < objects.size(); ++k) {
    const SceneObject& obj = objects[k];
    // Screen-space bounds from the projected bounding box corners.
    int x0 = 0, y0 = 0, x1 = w, y1 = h;
    const Vec3 half = obj.asset.half_extents();
    const Quat q(Eigen::AngleAxisd(obj.yaw, Vec3::UnitZ()));
    double min_x = std::numeric_limits<double>::infinity(), min_y = min_x;
    double max_x = -min_x, max_y = -min_x;
    bool all_in_front = true;
    for (int c = 0; c < 8; ++c) {
      const Vec3 corner((c & 1 ? 1 : -1) * half.x(), (c & 2 ? 1 : -1) * half.y(),
                        (c & 4 ? 1 : -1) * half.z());
      const Vec3 p = camera.extrinsic().transform_point(obj.position + q * corner);
      if (p.z() <= kMinDepth) {
        all_in_front = false;
        break;
      }
      const double px = camera.fx() * p.x() / p.z() + camera.cx();
      const double py = camera.fy() * p.y() / p.z() + camera.cy();
      min_x = std::min(min_x, px);
      max_x = std::max(max_x, px);
      min_y = std::min(min_y, py);
      max_y = std::max(max_y, py);
    }
    if (all_in_front) {
      x0 = std::clamp(static_cast<int>(std::floor(min_x)) - 1, 0, w);
      x1 = std::clamp(static_cast<int>(std::ceil(max_x)) + 1, 0, w);
      y0 = std::clamp(static_cast<int>(std::floor(min_y)) - 1, 0, h);
      y1 = std::clamp(static_cast<int>(std::ceil(max_y)) + 1, 0, h);
    }
    const Rgb base = palette(obj.asset.color);
    for (int y = y0; y < y1; ++y) {
      for (int x = x0; x < x1; ++x) {
        const Vec3 dir = to_world * Vec3((x + 0.5 - camera.cx()) / camera.fx(),
                                         (y + 0.5 - camera.cy()) / camera.fy(), 1.0);
        const auto hit = intersect_ray(obj, origin, dir);
        if (!hit) continue;
        const std::size_t idx = static_cast<std::size_t>(y) * w + x;
        const auto depth = static_cast<float>(hit->t);
        if (depth >= out.depth.data[idx]) continue;
        out.depth.data[idx] = depth;
        out.labels.data[idx] = static_cast<std::int16_t>(k);
        const double shade =
            cfg.ambient + (1.0 - cfg.ambient) * std::max(0.0, hit->normal.dot(cfg.light_direction));
        Rgb c;
        for (int ch = 0; ch < 3; ++ch) {
          c[ch] = static_cast<std::uint8_t>(std::clamp(std::lround(base[ch] * shade), 0L, 255L));
        }
        out.rgb.set(x, y, c);
      }
    }
  }
  return out;
}

RenderOutput render_stub(const SceneSpec& scene, const RenderConfig& cfg) {
  return render_stub(scene.objects, scene.camera, cfg);
}

}  // namespace keypose
