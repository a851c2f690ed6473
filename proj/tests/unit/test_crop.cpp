#include "keypose/crop.hpp"
#include "keypose/error.hpp"
#include "keypose/random.hpp"

#include <gtest/gtest.h>

using namespace keypose;

TEST(Crop, PaddedCenterMapsToCropCenter) {
  const Vec2 c = crop_center(CropCenter::ImageCenter, 1280, 720, Vec2::Zero(), Vec2::Zero());
  const CropResult r = crop_window(1280, 720, c, 700, true);
  const Vec2 m = r.map.to_crop(Vec2(640, 360));
  EXPECT_DOUBLE_EQ(m.x(), 112.0);
  EXPECT_DOUBLE_EQ(m.y(), 112.0);
  EXPECT_DOUBLE_EQ(r.y0, 10.0);
  EXPECT_DOUBLE_EQ(r.y1, 710.0);
}

TEST(Crop, FullImageIsPureResize) {
  const CropResult r = crop_window(640, 480, Vec2(320, 240), 640, false);
  EXPECT_EQ(r.map.offset, Vec2::Zero());
  EXPECT_DOUBLE_EQ(r.map.scale.x(), 224.0 / 640.0);
  EXPECT_DOUBLE_EQ(r.map.scale.y(), 224.0 / 480.0);
  EXPECT_EQ(r.map.to_normalized(Vec2(640, 480)), Vec2(1, 1));
  // Square image, padded full window: identical map.
  const CropResult sq = crop_window(448, 448, Vec2(224, 224), 448, true);
  EXPECT_EQ(sq.map.offset, Vec2::Zero());
  EXPECT_EQ(sq.map.scale, Vec2(0.5, 0.5));
}

TEST(Crop, CenterModes) {
  const Vec2 s(100, 50), e(300, 250);
  EXPECT_EQ(crop_center(CropCenter::ImageCenter, 640, 480, s, e), Vec2(320, 240));
  EXPECT_EQ(crop_center(CropCenter::StartObject, 640, 480, s, e), s);
  EXPECT_EQ(crop_center(CropCenter::Midpoint, 640, 480, s, e), Vec2(200, 150));
  for (CropCenter c : {CropCenter::ImageCenter, CropCenter::StartObject, CropCenter::Midpoint}) {
    EXPECT_EQ(parse_crop_center(to_string(c)), c);
  }
  EXPECT_THROW(parse_crop_center("corner"), Error);
}

TEST(Crop, RoundTripInteriorPoints) {
  Rng rng(61);
  const Vec2 s(150, 120), e(500, 400);
  for (CropCenter mode : {CropCenter::ImageCenter, CropCenter::StartObject, CropCenter::Midpoint}) {
    for (double size : {224.0, 700.0, 640.0}) {
      for (bool padded : {true, false}) {
        const CropResult r = crop_window(640, 480, crop_center(mode, 640, 480, s, e), size, padded);
        double worst = 0;
        for (int i = 0; i < 2000; ++i) {
          const Vec2 p(uniform(rng, r.x0, r.x1), uniform(rng, r.y0, r.y1));
          worst = std::max(worst, (r.map.from_normalized(r.map.to_normalized(p)) - p).cwiseAbs().maxCoeff());
          const Vec2 n = r.map.to_normalized(p);
          ASSERT_GE(n.minCoeff(), -1e-12);
          ASSERT_LE(n.maxCoeff(), 1 + 1e-12);
        }
        EXPECT_LT(worst, 1e-6);
      }
    }
  }
}

TEST(Crop, ValidWindowClipsAndDegenerate) {
  const CropResult r = crop_window(640, 480, Vec2(10, 10), 224, false);
  EXPECT_EQ(r.x0, 0.0);
  EXPECT_EQ(r.y0, 0.0);
  EXPECT_EQ(r.x1, 122.0);
  EXPECT_DOUBLE_EQ(r.map.scale.x(), 224.0 / 122.0);
  try {
    crop_window(640, 480, Vec2(-500, 10), 224, false);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::DegenerateCrop);
  }
  EXPECT_NO_THROW(crop_window(640, 480, Vec2(-500, 10), 224, true));
  EXPECT_THROW(crop_window(640, 480, Vec2(0, 0), 0, true), Error);
}

TEST(Crop, ImageResampling) {
  RgbImage img(64, 48, {200, 100, 50});
  // Identity geometry: out_size equals the window side.
  const CropResult same = crop_transform(img, Vec2(32, 24), 48, false, 48);
  EXPECT_EQ(same.image.width, 48);
  EXPECT_EQ(same.image.at(10, 10), (Rgb{200, 100, 50}));
  // Padded window half outside: zeros there, image content inside.
  const CropResult pad = crop_transform(img, Vec2(0, 24), 48, true, 48);
  EXPECT_EQ(pad.image.at(2, 24), (Rgb{0, 0, 0}));
  EXPECT_EQ(pad.image.at(40, 24), (Rgb{200, 100, 50}));
  // Exact pixel copy when the window is pixel aligned at unit scale.
  RgbImage ramp(16, 16);
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 16; ++x) ramp.set(x, y, {static_cast<std::uint8_t>(x * 16), static_cast<std::uint8_t>(y * 16), 7});
  const CropResult sub = crop_transform(ramp, Vec2(8, 8), 8, false, 8);
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 8; ++x) EXPECT_EQ(sub.image.at(x, y), ramp.at(x + 4, y + 4));
}

TEST(Crop, CameraConsistentWithMap) {
  const CameraModel cam = CameraModel::look_at(Vec3(1.2, 0.3, 0.8), Vec3(0.5, 0, 0), 50, 640, 480);
  const CropResult r = crop_window(640, 480, Vec2(400, 200), 300, true);
  const CameraModel cc = crop_camera(cam, r.map);
  EXPECT_EQ(cc.width(), 224);
  Rng rng(62);
  for (int i = 0; i < 200; ++i) {
    const Vec3 p(uniform(rng, 0.3, 0.7), uniform(rng, -0.2, 0.2), uniform(rng, 0, 0.2));
    const Eigen::Vector2d orig = project_pixel(p, cam);
    const Eigen::Vector2d crop = project_pixel(p, cc);
    EXPECT_LT((r.map.to_crop(orig) - crop).norm(), 1e-9);
  }
}
