#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace keypose {

using Rgb = std::array<std::uint8_t, 3>;

/// 8-bit RGB raster, row-major, interleaved.
struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> data;

  RgbImage() = default;
  RgbImage(int w, int h, Rgb fill = {0, 0, 0});

  Rgb at(int x, int y) const;
  void set(int x, int y, Rgb c);
  bool operator==(const RgbImage&) const = default;
};

/// Depth raster in meters (camera-frame z).
struct DepthImage {
  int width = 0;
  int height = 0;
  std::vector<float> data;

  DepthImage() = default;
  DepthImage(int w, int h, float fill);

  float at(int x, int y) const { return data[static_cast<std::size_t>(y) * width + x]; }
  bool operator==(const DepthImage&) const = default;
};

/// Per-pixel object index, -1 for background.
struct LabelImage {
  int width = 0;
  int height = 0;
  std::vector<std::int16_t> data;

  std::int16_t at(int x, int y) const { return data[static_cast<std::size_t>(y) * width + x]; }
};

/// Bilinear resize sampling at pixel centers.
RgbImage resize_bilinear(const RgbImage& src, int width, int height);

/// PNG encode with fast compression. Depth is stored as 16-bit millimeters.
std::vector<std::uint8_t> encode_png(const RgbImage& img);
std::vector<std::uint8_t> encode_depth_png(const DepthImage& depth);

void write_png(const std::filesystem::path& path, const RgbImage& img);
void write_depth_png(const std::filesystem::path& path, const DepthImage& depth);
void write_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes);

/// Reads PNG (gray/RGB/RGBA/palette, 8 or 16 bit) or binary PPM (P6) into RGB.
RgbImage read_image(const std::filesystem::path& path);
/// Reads a 16-bit millimeter depth PNG back to meters.
DepthImage read_depth_png(const std::filesystem::path& path);

/// Lowercase hex SHA-256.
std::string sha256_hex(const void* data, std::size_t size);
inline std::string sha256_hex(const std::string& s) { return sha256_hex(s.data(), s.size()); }

}  // namespace keypose
