#pragma once

#include "keypose/geometry.hpp"
#include "keypose/image.hpp"
#include "keypose/scene.hpp"

#include <optional>
#include <span>

namespace keypose {

struct RayHit {
  double t = 0.0;  // ray parameter; equals camera-frame depth for camera rays
  Vec3 normal = Vec3::UnitZ();
};

/// Ray against a sphere or an oriented box (slab test in the object frame).
/// Only hits with t > 0 count.
std::optional<RayHit> intersect_ray(const SceneObject& object, const Vec3& origin,
                                    const Vec3& direction);

struct RenderConfig {
  Rgb background{180, 180, 180};
  float far_plane = 10.0f;
  Vec3 light_direction = Vec3(0.3, 0.2, 1.0).normalized();
  double ambient = 0.35;
};

struct RenderOutput {
  RgbImage rgb;
  DepthImage depth;   // camera-frame z in meters, far_plane where nothing is hit
  LabelImage labels;  // object index per pixel, -1 for background
};

/// Flat-shaded analytic ray caster with a z-buffer, one ray per pixel center.
RenderOutput render_stub(std::span<const SceneObject> objects, const CameraModel& camera,
                         const RenderConfig& cfg = {});
RenderOutput render_stub(const SceneSpec& scene, const RenderConfig& cfg = {});

/// World-space ray through a pixel position (continuous coordinates; pixel
/// (i, j) has its center at (i + 0.5, j + 0.5)). Direction is scaled so that
/// the ray parameter equals camera-frame depth.
void pixel_ray(const CameraModel& camera, double px, double py, Vec3& origin, Vec3& direction);

}  // namespace keypose
