#pragma once

#include "keypose/geometry.hpp"
#include "keypose/image.hpp"

#include <Eigen/Core>
#include <string_view>

namespace keypose {

using Vec2 = Eigen::Vector2d;

enum class CropCenter { ImageCenter, StartObject, Midpoint };
std::string_view to_string(CropCenter c);
CropCenter parse_crop_center(std::string_view s);

inline constexpr int kModelImageSize = 224;

/// Affine map between continuous original-pixel coordinates (pixel i covers
/// [i, i + 1)) and crop pixels: crop = (orig - offset) * scale.
struct CoordinateMap {
  Vec2 offset = Vec2::Zero();
  Vec2 scale = Vec2::Ones();
  int out_size = kModelImageSize;

  Vec2 to_crop(const Vec2& orig) const { return (orig - offset).cwiseProduct(scale); }
  Vec2 to_original(const Vec2& crop) const { return crop.cwiseQuotient(scale) + offset; }
  /// Crop-normalized coordinates lie in [0, 1] over the crop.
  Vec2 to_normalized(const Vec2& orig) const { return to_crop(orig) / out_size; }
  Vec2 from_normalized(const Vec2& n) const { return to_original(n * out_size); }
};

struct CropResult {
  RgbImage image;
  CoordinateMap map;
  // Window in original pixels after clipping (valid mode) or as requested (padded).
  double x0 = 0, y0 = 0, x1 = 0, y1 = 0;
};

/// Crop center in original pixels. StartObject uses `start`, Midpoint the
/// mean of `start` and `end`; ImageCenter ignores both.
Vec2 crop_center(CropCenter mode, int width, int height, const Vec2& start, const Vec2& end);

/// Square crop_size window around `center`, resized to out_size × out_size.
/// Padded windows read zeros outside the image; valid windows are clipped to
/// the image first (aspect ratio then changes). Throws DegenerateCrop when
/// the clipped window is empty.
CropResult crop_transform(const RgbImage& img, const Vec2& center, double crop_size, bool padded,
                          int out_size = kModelImageSize);

/// Window geometry only, without resampling.
CropResult crop_window(int width, int height, const Vec2& center, double crop_size, bool padded,
                       int out_size = kModelImageSize);

/// Intrinsics of the cropped image, so projecting with the returned camera
/// equals projecting with `camera` and applying `map`.
CameraModel crop_camera(const CameraModel& camera, const CoordinateMap& map);

}  // namespace keypose
