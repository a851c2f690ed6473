#include "keypose/crop.hpp"

#include "keypose/error.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace keypose {

std::string_view to_string(CropCenter c) {
  switch (c) {
    case CropCenter::ImageCenter: return "image_center";
    case CropCenter::StartObject: return "start_object";
    case CropCenter::Midpoint: return "midpoint";
  }
  return "";
}

CropCenter parse_crop_center(std::string_view s) {
  if (s == "image_center") return CropCenter::ImageCenter;
  if (s == "start_object") return CropCenter::StartObject;
  if (s == "midpoint") return CropCenter::Midpoint;
  throw Error(ErrorKind::InvalidArgument, "unknown crop center '" + std::string(s) + "'");
}

Vec2 crop_center(CropCenter mode, int width, int height, const Vec2& start, const Vec2& end) {
  switch (mode) {
    case CropCenter::ImageCenter: return {0.5 * width, 0.5 * height};
    case CropCenter::StartObject: return start;
    case CropCenter::Midpoint: return 0.5 * (start + end);
  }
  return {0.5 * width, 0.5 * height};
}

CropResult crop_window(int width, int height, const Vec2& center, double crop_size, bool padded,
                       int out_size) {
  if (!(crop_size > 0.0) || !std::isfinite(crop_size)) {
    throw Error(ErrorKind::InvalidArgument, "crop size must be positive");
  }
  if (out_size <= 0) throw Error(ErrorKind::InvalidArgument, "output size must be positive");
  if (!center.allFinite()) throw Error(ErrorKind::InvalidArgument, "crop center is not finite");
  CropResult r;
  r.x0 = center.x() - 0.5 * crop_size;
  r.y0 = center.y() - 0.5 * crop_size;
  r.x1 = r.x0 + crop_size;
  r.y1 = r.y0 + crop_size;
  if (!padded) {
    r.x0 = std::max(r.x0, 0.0);
    r.y0 = std::max(r.y0, 0.0);
    r.x1 = std::min(r.x1, static_cast<double>(width));
    r.y1 = std::min(r.y1, static_cast<double>(height));
    if (!(r.x1 > r.x0) || !(r.y1 > r.y0)) {
      throw Error(ErrorKind::DegenerateCrop, "crop window does not intersect the image");
    }
  }
  r.map.offset = Vec2(r.x0, r.y0);
  r.map.scale = Vec2(out_size / (r.x1 - r.x0), out_size / (r.y1 - r.y0));
  r.map.out_size = out_size;
  return r;
}

CropResult crop_transform(const RgbImage& img, const Vec2& center, double crop_size, bool padded,
                          int out_size) {
  CropResult r = crop_window(img.width, img.height, center, crop_size, padded, out_size);
  r.image = RgbImage(out_size, out_size);
  const auto texel = [&](int x, int y, int ch) -> double {
    if (x < 0 || y < 0 || x >= img.width || y >= img.height) {
      if (padded) return 0.0;
      x = std::clamp(x, 0, img.width - 1);
      y = std::clamp(y, 0, img.height - 1);
    }
    return img.data[(static_cast<std::size_t>(y) * img.width + x) * 3 + ch];
  };
  for (int j = 0; j < out_size; ++j) {
    for (int i = 0; i < out_size; ++i) {
      const Vec2 src = r.map.to_original(Vec2(i + 0.5, j + 0.5));
      // Texel centers sit at half-integers.
      const double sx = src.x() - 0.5;
      const double sy = src.y() - 0.5;
      const int ix = static_cast<int>(std::floor(sx));
      const int iy = static_cast<int>(std::floor(sy));
      const double fx = sx - ix;
      const double fy = sy - iy;
      Rgb c;
      for (int ch = 0; ch < 3; ++ch) {
        const double top = texel(ix, iy, ch) * (1 - fx) + texel(ix + 1, iy, ch) * fx;
        const double bot = texel(ix, iy + 1, ch) * (1 - fx) + texel(ix + 1, iy + 1, ch) * fx;
        c[ch] = static_cast<std::uint8_t>(std::clamp(std::lround(top * (1 - fy) + bot * fy), 0L, 255L));
      }
      r.image.set(i, j, c);
    }
  }
  return r;
}

CameraModel crop_camera(const CameraModel& camera, const CoordinateMap& map) {
  return CameraModel(camera.fx() * map.scale.x(), camera.fy() * map.scale.y(),
                     (camera.cx() - map.offset.x()) * map.scale.x(),
                     (camera.cy() - map.offset.y()) * map.scale.y(), map.out_size, map.out_size,
                     camera.extrinsic());
}

}  // namespace keypose
