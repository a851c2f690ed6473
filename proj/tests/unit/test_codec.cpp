#include "keypose/codec.hpp"
#include "keypose/error.hpp"
#include "keypose/random.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <string>

using namespace keypose;

namespace {

CameraModel tabletop_camera() {
  return CameraModel::look_at(Vec3(1.3, 0.2, 0.8), Vec3(0.5, 0.0, 0.05), 55, 640, 480);
}

TokenSequence random_valid(Rng& rng, const Grammar& g) {
  TokenSequence t;
  for (const TokenBand& b : g) {
    t.push_back(b.first + static_cast<TokenId>(uniform_index(rng, static_cast<std::uint64_t>(b.count))));
  }
  return t;
}

ErrorKind kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorKind::IoError;
}

}  // namespace

TEST(TokenText, RenderWidths) {
  EXPECT_EQ(render_token(loc_token(0)), "<loc0000>");
  EXPECT_EQ(render_token(loc_token(243)), "<loc0243>");
  EXPECT_EQ(render_token(loc_token(1023)), "<loc1023>");
  EXPECT_EQ(render_token(seg_token(0)), "<seg000>");
  EXPECT_EQ(render_token(seg_token(127)), "<seg127>");
}

TEST(TokenText, BijectiveOverVocabulary) {
  for (TokenId id = 0; id < kVocabSize; ++id) {
    const std::string s = render_token(id);
    EXPECT_EQ(parse_token(s), id);
    EXPECT_EQ(s.size(), is_loc(id) ? 9u : 8u);
  }
}

TEST(TokenText, GroupedRenderingMatchesPromptLayout) {
  const TokenSequence t{243, 423, 751, seg_token(63), seg_token(79), seg_token(112)};
  EXPECT_EQ(render_tokens(t), "<loc0243><loc0423><loc0751> <seg063><seg079><seg112>");
  EXPECT_EQ(parse_tokens(render_tokens(t)), t);
  EXPECT_EQ(parse_tokens("<loc0243> <loc0423>\n<loc0751>"), (TokenSequence{243, 423, 751}));
  EXPECT_TRUE(parse_tokens("").empty());
}

TEST(TokenText, MalformedTokens) {
  for (const char* bad : {"<loc243>", "<loc01024>", "<seg0001>", "<seg128>", "<loc1024>", "loc0001",
                          "<LOC0001>", "<loc00a1>", "<seg063"}) {
    EXPECT_EQ(kind_of([&] { parse_token(bad); }), ErrorKind::GrammarViolation) << bad;
  }
  try {
    parse_tokens("<loc0001><loc0002><oops>");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::GrammarViolation);
    EXPECT_EQ(e.position(), std::optional<std::size_t>(2));
  }
}

TEST(Quantizer, EdgesAndCenters) {
  const UniformQuantizer q{0.0, 1.0, 1024};
  EXPECT_EQ(q.encode(0.0), 0);
  EXPECT_EQ(q.encode(std::nextafter(1.0, 0.0)), 1023);
  EXPECT_EQ(q.encode(1.0), 1023);
  EXPECT_EQ(q.decode(512), 0.50048828125);
  EXPECT_EQ(kind_of([&] { q.encode(-1e-12); }), ErrorKind::OutOfRange);
  EXPECT_EQ(kind_of([&] { q.encode(1.0 + 1e-12); }), ErrorKind::OutOfRange);
  EXPECT_EQ(kind_of([&] { q.encode(std::nan("")); }), ErrorKind::OutOfRange);
  EXPECT_EQ(kind_of([&] { q.decode(1024); }), ErrorKind::OutOfRange);
}

TEST(Quantizer, ErrorBoundEveryBin) {
  for (int n : {1024, 512, 256, 128}) {
    const UniformQuantizer q{0.2, 2.0, n};
    for (int b = 0; b < n; ++b) {
      EXPECT_EQ(q.encode(q.decode(b)), b);
      // Probe both bin edges from inside.
      const double lo = 0.2 + 1.8 * b / n;
      const double hi = std::nextafter(0.2 + 1.8 * (b + 1) / n, 0.0);
      for (double x : {lo, hi}) {
        const int got = q.encode(x);
        EXPECT_LE(std::abs(q.decode(got) - x), q.half_width() * (1 + 1e-12));
      }
    }
  }
}

TEST(Angles, BinEdgeCases) {
  EXPECT_EQ(angle_bin(0.0), 64);
  EXPECT_EQ(angle_bin(-180.0), 0);
  EXPECT_EQ(angle_bin(180.0), 0);  // wraps onto -180
  EXPECT_EQ(angle_bin(std::nextafter(180.0, 0.0)), 127);
  EXPECT_EQ(angle_bin(540.0), 0);
  EXPECT_DOUBLE_EQ(angle_from_bin(64), 1.40625);
}

TEST(Depth, SharedAndSeparateBands) {
  CodecConfig cfg;
  EXPECT_EQ(depth_bin(cfg.depth_min, cfg), 0);
  EXPECT_EQ(depth_bin(std::nextafter(cfg.depth_max, 0.0), cfg), 1023);
  EXPECT_EQ(kind_of([&] { depth_bin(0.1, cfg); }), ErrorKind::OutOfRange);

  cfg.n_loc = 512;
  cfg.depth_mode = DepthMode::SeparateBand;
  EXPECT_EQ(depth_bin(0.5 * (cfg.depth_min + cfg.depth_max), cfg), 768);
  for (int b = 0; b < 512; ++b) {
    const double d = depth_from_token(512 + b, cfg);
    EXPECT_EQ(depth_bin(d, cfg), 512 + b);
  }
  cfg.n_loc = 1024;
  EXPECT_EQ(kind_of([&] { cfg.validate(); }), ErrorKind::InvalidArgument);
}

TEST(Grammar, Layout) {
  CodecConfig cfg;
  const Grammar g = trajectory_grammar(cfg);
  ASSERT_EQ(g.size(), 12u);
  for (int k = 0; k < 2; ++k) {
    for (int i = 0; i < 3; ++i) EXPECT_EQ(g[6 * k + i].kind, TokenKind::Loc);
    for (int i = 3; i < 6; ++i) EXPECT_EQ(g[6 * k + i].kind, TokenKind::Seg);
    EXPECT_EQ(g[6 * k + 4].first, seg_token(kPitchFirstBin));
    EXPECT_EQ(g[6 * k + 4].count, kPitchBinCount);
  }
}

TEST(Grammar, SegInLocSlotReportsPosition) {
  CodecConfig cfg;
  TokenSequence t{1, 2, 3, seg_token(64), seg_token(64), seg_token(64)};
  EXPECT_NO_THROW(check_grammar(t, keypose_grammar(cfg)));
  t[1] = seg_token(5);
  try {
    decode_keypose(t, nullptr, CodecConfig{.frame = Frame::Robot});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::GrammarViolation);
    EXPECT_EQ(e.position(), std::optional<std::size_t>(1));
  }
  t[1] = 2;
  t[4] = seg_token(10);  // pitch outside its canonical band
  EXPECT_EQ(kind_of([&] { check_grammar(t, keypose_grammar(cfg)); }), ErrorKind::GrammarViolation);
  const TokenSequence short_seq{1, 2, 3};
  EXPECT_EQ(kind_of([&] { check_grammar(short_seq, keypose_grammar(cfg)); }), ErrorKind::GrammarViolation);
}

TEST(Codec, ImageFrameEdgeTokens) {
  const CameraModel cam(500, 500, 320, 240, 640, 480, Pose6D::identity());
  CodecConfig cfg;
  // Point on the left image border: u == 0.
  const Pose6D left(Vec3(-320.0 / 500.0, 0, 1), Quat::Identity());
  const TokenSequence t = encode_keypose({left, Gripper::Grasp}, &cam, cfg);
  EXPECT_EQ(render_token(t[0]), "<loc0000>");
  EXPECT_EQ(render_token(t[3]), "<seg064>");
  EXPECT_EQ(render_token(t[4]), "<seg064>");
  EXPECT_EQ(render_token(t[5]), "<seg064>");
  EXPECT_EQ(kind_of([&] { encode_keypose({left, Gripper::Grasp}, nullptr, cfg); }),
            ErrorKind::InvalidArgument);
  const Pose6D outside(Vec3(2.0, 0, 1), Quat::Identity());
  EXPECT_EQ(kind_of([&] { encode_keypose({outside, Gripper::Grasp}, &cam, cfg); }), ErrorKind::OutOfRange);
}

TEST(Codec, RobotStateSharesKeyposeCodec) {
  const CodecConfig cfg{.frame = Frame::Robot};
  // x sits just above the box center; (0.5 - box_min) / 1.2 rounds below 0.5.
  const Pose6D p(Vec3(0.5001, 0.0, 0.0), Quat::Identity());
  const TokenSequence t = encode_robot_state(p, nullptr, cfg);
  EXPECT_EQ(t, encode_keypose({p, Gripper::Release}, nullptr, cfg));
  EXPECT_EQ(render_tokens(t), "<loc0512><loc0512><loc0512> <seg064><seg064><seg064>");
  const Pose6D corner(cfg.box_min, Quat::Identity());
  EXPECT_EQ(encode_robot_state(corner, nullptr, cfg)[0], 0);
}

TEST(Codec, DecodeEncodeIdentityRandomSequences) {
  const CameraModel cam = tabletop_camera();
  Rng rng(21);
  for (Frame frame : {Frame::Image, Frame::Robot}) {
    for (int n : {1024, 512, 256, 128}) {
      for (DepthMode mode : {DepthMode::SharedLoc, DepthMode::SeparateBand}) {
        if (mode == DepthMode::SeparateBand && n == 1024) continue;
        const CodecConfig cfg{.n_loc = n, .frame = frame, .depth_mode = mode};
        const Grammar g = trajectory_grammar(cfg);
        const int reps = (n == 1024) ? 100000 : 3000;
        for (int i = 0; i < reps; ++i) {
          const TokenSequence t = random_valid(rng, g);
          const Trajectory traj = decode_trajectory(t, &cam, cfg);
          ASSERT_EQ(encode_trajectory(traj, &cam, cfg), t) << render_tokens(t);
        }
      }
    }
  }
}

TEST(Codec, RobotFramePositionErrorBound) {
  Rng rng(22);
  for (int n : {1024, 512, 256, 128}) {
    const CodecConfig cfg{.n_loc = n, .frame = Frame::Robot};
    for (int i = 0; i < 2000; ++i) {
      Vec3 p;
      for (int a = 0; a < 3; ++a) p[a] = uniform(rng, cfg.box_min[a], cfg.box_max[a]);
      const Pose6D pose(p, Quat::Identity());
      const Pose6D back = decode_robot_state(encode_robot_state(pose, nullptr, cfg), nullptr, cfg);
      for (int a = 0; a < 3; ++a) {
        EXPECT_LE(std::abs(back.position()[a] - p[a]), (cfg.box_max[a] - cfg.box_min[a]) / (2.0 * n) * (1 + 1e-12));
      }
    }
  }
}

TEST(Codec, ImageFrameRecoversWorldPoseWithinBound) {
  const CameraModel cam = tabletop_camera();
  const CodecConfig cfg;
  Rng rng(23);
  const double hw = 0.5 / cfg.n_loc;
  const double dz = (cfg.depth_max - cfg.depth_min) / (2.0 * cfg.n_loc);
  for (int i = 0; i < 2000; ++i) {
    const Pose6D pose(Vec3(uniform(rng, 0.3, 0.7), uniform(rng, -0.2, 0.2), uniform(rng, 0.0, 0.2)),
                      Quat(Eigen::AngleAxisd(uniform(rng, -3, 3), Vec3::UnitZ())) *
                          Quat(Eigen::AngleAxisd(M_PI, Vec3::UnitX())));
    const ImageAction a = project(pose, cam);
    const Pose6D back = decode_robot_state(encode_robot_state(pose, &cam, cfg), &cam, cfg);
    // Per-camera bound: pixel half-bin errors scaled by depth plus the depth half-bin.
    const double z = a.depth;
    const double ex = (hw * cam.width() * (z + dz) + std::abs(a.u * cam.width() - cam.cx()) * dz) / cam.fx();
    const double ey = (hw * cam.height() * (z + dz) + std::abs(a.v * cam.height() - cam.cy()) * dz) / cam.fy();
    EXPECT_LE((back.position() - pose.position()).norm(), std::sqrt(ex * ex + ey * ey + dz * dz) + 1e-12);
    // Orientation: each Euler angle is off by at most half a bin (1.40625 deg).
    EXPECT_LE(relative_angle_deg(back.orientation(), pose.orientation()), 3 * 1.40625 + 1e-9);
  }
}
