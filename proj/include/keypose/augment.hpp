#pragma once

#include "keypose/image.hpp"

#include <array>
#include <cstdint>
#include <span>

namespace keypose {

/// The 256-entry viridis table, RGB in [0, 1].
const std::array<std::array<double, 3>, 256>& viridis_lut();

/// Viridis at t in [0, 1] (clamped), linearly interpolated between entries.
std::array<double, 3> viridis(double t);

/// Colors depth through viridis after normalizing [depth_min, depth_max] to [0, 1].
RgbImage depth_to_rgb(const DepthImage& depth, double depth_min, double depth_max);

struct PhotometricJitter {
  double brightness = 0.2;  // factor drawn from [1 - b, 1 + b]
  double contrast = 0.2;    // factor drawn from [1 - c, 1 + c], about the mean intensity
};

RgbImage jitter_photometric(const RgbImage& img, const PhotometricJitter& cfg, std::uint64_t seed);

struct BackgroundResult {
  RgbImage image;
  bool replaced = false;
  std::size_t pool_index = 0;
};

/// With probability p, replaces every pixel whose label is negative by a pool
/// image resized to the frame. Pixels with label >= 0 are left untouched.
BackgroundResult randomize_background(const RgbImage& img, const LabelImage& mask,
                                      std::span<const RgbImage> pool, double p,
                                      std::uint64_t seed);

}  // namespace keypose
