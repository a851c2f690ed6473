#include "keypose/image.hpp"

#include "keypose/error.hpp"

#include <openssl/evp.h>
#include <png.h>
#include <zlib.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <memory>

namespace keypose {

namespace {

void png_append(png_structp png, png_bytep data, png_size_t length) {
  auto* out = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(png));
  out->insert(out->end(), data, data + length);
}

void png_noop_flush(png_structp) {}

// libpng reports errors through longjmp; these helpers keep only trivially
// destructible locals between setjmp and the calls that may jump.
bool encode_png_raw(std::vector<std::uint8_t>* out, int width, int height, int bit_depth,
                    int color_type, const std::uint8_t* packed, std::size_t row_bytes) {
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (png == nullptr) return false;
  png_infop info = png_create_info_struct(png);
  if (info == nullptr || setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    return false;
  }
  png_set_write_fn(png, out, png_append, png_noop_flush);
  png_set_compression_level(png, 1);
  png_set_compression_strategy(png, Z_RLE);
  png_set_compression_buffer_size(png, 1 << 16);
  png_set_filter(png, 0, PNG_FILTER_UP);
  png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height),
               bit_depth, color_type, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < height; ++y) {
    png_write_row(png, packed + static_cast<std::size_t>(y) * row_bytes);
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return true;
}

std::vector<std::uint8_t> encode_png_rows(int width, int height, int bit_depth, int color_type,
                                          const std::vector<std::uint8_t>& packed,
                                          std::size_t row_bytes) {
  std::vector<std::uint8_t> out;
  if (!encode_png_raw(&out, width, height, bit_depth, color_type, packed.data(), row_bytes)) {
    throw Error(ErrorKind::IoError, "PNG encoding failed");
  }
  return out;
}

struct Gray16Header {
  png_uint_32 width = 0;
  png_uint_32 height = 0;
  int bit_depth = 0;
  int color_type = 0;
};

// Reads a 16-bit gray PNG into `samples` (big-endian pairs). Returns false on
// libpng error; header is filled once the IHDR is parsed.
bool read_gray16_raw(std::FILE* fp, Gray16Header* header, std::vector<std::uint8_t>* samples) {
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (png == nullptr) return false;
  png_infop info = png_create_info_struct(png);
  if (info == nullptr || setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    return false;
  }
  png_init_io(png, fp);
  png_read_info(png, info);
  header->width = png_get_image_width(png, info);
  header->height = png_get_image_height(png, info);
  header->bit_depth = png_get_bit_depth(png, info);
  header->color_type = png_get_color_type(png, info);
  if (header->bit_depth == 16 && header->color_type == PNG_COLOR_TYPE_GRAY) {
    samples->resize(static_cast<std::size_t>(header->width) * header->height * 2);
    for (png_uint_32 y = 0; y < header->height; ++y) {
      png_read_row(png, samples->data() + static_cast<std::size_t>(y) * header->width * 2,
                   nullptr);
    }
  }
  png_destroy_read_struct(&png, &info, nullptr);
  return true;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoError, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

RgbImage read_ppm(const std::vector<std::uint8_t>& bytes, const std::filesystem::path& path) {
  std::size_t pos = 2;
  auto next_int = [&]() {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(bytes[pos])) {
        ++pos;
      } else {
        break;
      }
    }
    int v = 0;
    bool any = false;
    while (pos < bytes.size() && bytes[pos] >= '0' && bytes[pos] <= '9') {
      v = v * 10 + (bytes[pos++] - '0');
      any = true;
    }
    if (!any) throw Error(ErrorKind::FormatError, "bad PPM header in " + path.string(), pos);
    return v;
  };
  const int w = next_int();
  const int h = next_int();
  const int maxval = next_int();
  ++pos;  // single whitespace before raster
  if (maxval != 255 || w <= 0 || h <= 0) {
    throw Error(ErrorKind::FormatError, "unsupported PPM in " + path.string());
  }
  const std::size_t n = static_cast<std::size_t>(w) * h * 3;
  if (bytes.size() < pos + n) {
    throw Error(ErrorKind::FormatError, "truncated PPM " + path.string(), bytes.size());
  }
  RgbImage img;
  img.width = w;
  img.height = h;
  img.data.assign(bytes.begin() + static_cast<std::ptrdiff_t>(pos),
                  bytes.begin() + static_cast<std::ptrdiff_t>(pos + n));
  return img;
}

}  // namespace

RgbImage::RgbImage(int w, int h, Rgb fill) : width(w), height(h) {
  data.resize(static_cast<std::size_t>(w) * h * 3);
  for (std::size_t i = 0; i < data.size(); i += 3) {
    data[i] = fill[0];
    data[i + 1] = fill[1];
    data[i + 2] = fill[2];
  }
}

Rgb RgbImage::at(int x, int y) const {
  const std::size_t i = (static_cast<std::size_t>(y) * width + x) * 3;
  return {data[i], data[i + 1], data[i + 2]};
}

void RgbImage::set(int x, int y, Rgb c) {
  const std::size_t i = (static_cast<std::size_t>(y) * width + x) * 3;
  data[i] = c[0];
  data[i + 1] = c[1];
  data[i + 2] = c[2];
}

DepthImage::DepthImage(int w, int h, float fill)
    : width(w), height(h), data(static_cast<std::size_t>(w) * h, fill) {}

RgbImage resize_bilinear(const RgbImage& src, int width, int height) {
  if (src.width <= 0 || src.height <= 0 || width <= 0 || height <= 0) {
    throw Error(ErrorKind::InvalidArgument, "cannot resize an empty image");
  }
  RgbImage dst(width, height);
  const double sx = static_cast<double>(src.width) / width;
  const double sy = static_cast<double>(src.height) / height;
  for (int y = 0; y < height; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, src.height - 1.0);
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, src.height - 1);
    const double ty = fy - y0;
    for (int x = 0; x < width; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, src.width - 1.0);
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, src.width - 1);
      const double tx = fx - x0;
      const Rgb a = src.at(x0, y0), b = src.at(x1, y0), c = src.at(x0, y1), d = src.at(x1, y1);
      Rgb out;
      for (int ch = 0; ch < 3; ++ch) {
        const double top = a[ch] + (b[ch] - a[ch]) * tx;
        const double bottom = c[ch] + (d[ch] - c[ch]) * tx;
        out[ch] = static_cast<std::uint8_t>(std::lround(top + (bottom - top) * ty));
      }
      dst.set(x, y, out);
    }
  }
  return dst;
}

std::vector<std::uint8_t> encode_png(const RgbImage& img) {
  return encode_png_rows(img.width, img.height, 8, PNG_COLOR_TYPE_RGB, img.data,
                         static_cast<std::size_t>(img.width) * 3);
}

std::vector<std::uint8_t> encode_depth_png(const DepthImage& depth) {
  std::vector<std::uint8_t> packed(depth.data.size() * 2);
  for (std::size_t i = 0; i < depth.data.size(); ++i) {
    const double mm = std::clamp(std::round(static_cast<double>(depth.data[i]) * 1000.0), 0.0,
                                 65535.0);
    const auto v = static_cast<std::uint16_t>(mm);
    packed[2 * i] = static_cast<std::uint8_t>(v >> 8);  // PNG is big-endian
    packed[2 * i + 1] = static_cast<std::uint8_t>(v & 0xFF);
  }
  return encode_png_rows(depth.width, depth.height, 16, PNG_COLOR_TYPE_GRAY, packed,
                         static_cast<std::size_t>(depth.width) * 2);
}

void write_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::IoError, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorKind::IoError, "write failed for " + path.string());
}

void write_png(const std::filesystem::path& path, const RgbImage& img) {
  write_bytes(path, encode_png(img));
}

void write_depth_png(const std::filesystem::path& path, const DepthImage& depth) {
  write_bytes(path, encode_depth_png(depth));
}

RgbImage read_image(const std::filesystem::path& path) {
  const std::vector<std::uint8_t> bytes = read_file(path);
  if (bytes.size() >= 2 && bytes[0] == 'P' && bytes[1] == '6') return read_ppm(bytes, path);

  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size())) {
    throw Error(ErrorKind::FormatError, "unsupported image " + path.string() + ": " +
                                            image.message);
  }
  image.format = PNG_FORMAT_RGB;
  RgbImage img;
  img.width = static_cast<int>(image.width);
  img.height = static_cast<int>(image.height);
  img.data.resize(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, img.data.data(), 0, nullptr)) {
    const std::string msg = image.message;
    png_image_free(&image);
    throw Error(ErrorKind::FormatError, "failed to decode " + path.string() + ": " + msg);
  }
  return img;
}

DepthImage read_depth_png(const std::filesystem::path& path) {
  std::FILE* fp = std::fopen(path.string().c_str(), "rb");
  if (fp == nullptr) throw Error(ErrorKind::IoError, "cannot open " + path.string());
  std::unique_ptr<std::FILE, int (*)(std::FILE*)> file(fp, std::fclose);
  Gray16Header header;
  std::vector<std::uint8_t> samples;
  if (!read_gray16_raw(fp, &header, &samples)) {
    throw Error(ErrorKind::FormatError, "failed to decode " + path.string());
  }
  if (header.bit_depth != 16 || header.color_type != PNG_COLOR_TYPE_GRAY) {
    throw Error(ErrorKind::FormatError, path.string() + " is not a 16-bit gray PNG");
  }
  DepthImage depth(static_cast<int>(header.width), static_cast<int>(header.height), 0.0f);
  for (std::size_t i = 0; i < depth.data.size(); ++i) {
    const int mm = (samples[2 * i] << 8) | samples[2 * i + 1];
    depth.data[i] = static_cast<float>(mm / 1000.0);
  }
  return depth;
}

std::string sha256_hex(const void* data, std::size_t size) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data, size, digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error(ErrorKind::IoError, "SHA-256 failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(kHex[digest[i] >> 4]);
    out.push_back(kHex[digest[i] & 0xF]);
  }
  return out;
}

}  // namespace keypose
