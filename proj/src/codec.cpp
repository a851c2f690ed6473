#include "keypose/codec.hpp"

#include "keypose/error.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <numbers>

namespace keypose {

namespace {

constexpr double kRadToDeg = 180.0 / std::numbers::pi;
constexpr double kDegToRad = std::numbers::pi / 180.0;

const UniformQuantizer kAngleQuantizer{-180.0, 180.0, kAngleBins};

bool parse_digits(std::string_view s, int& out) {
  if (s.empty()) return false;
  int v = 0;
  for (char c : s) {
    if (c < '0' || c > '9') return false;
    v = v * 10 + (c - '0');
  }
  out = v;
  return true;
}

const CameraModel& require_camera(const CameraModel* camera) {
  if (camera == nullptr) {
    throw Error(ErrorKind::InvalidArgument, "image-frame codec requires a camera");
  }
  return *camera;
}

UniformQuantizer depth_quantizer(const CodecConfig& cfg) {
  return {cfg.depth_min, cfg.depth_max, cfg.n_loc};
}

void check_length(std::span<const TokenId> tokens, std::size_t expected) {
  if (tokens.size() != expected) {
    throw Error(ErrorKind::GrammarViolation,
                "expected " + std::to_string(expected) + " tokens, got " +
                    std::to_string(tokens.size()),
                std::min(tokens.size(), expected));
  }
}

// Wraps into [-180, 180).
double wrap_degrees(double deg) {
  if (deg >= -180.0 && deg < 180.0) return deg;
  double w = std::fmod(deg + 180.0, 360.0);
  if (w < 0.0) w += 360.0;
  w -= 180.0;
  return w >= 180.0 ? -180.0 : w;
}

std::array<int, 3> orientation_bins(const Quat& q) {
  const EulerXYZ e = euler_xyz_from_rotation(q.toRotationMatrix());
  const int pitch = std::clamp(angle_bin(e.pitch * kRadToDeg), kPitchFirstBin,
                               kPitchFirstBin + kPitchBinCount - 1);
  return {angle_bin(e.roll * kRadToDeg), pitch, angle_bin(e.yaw * kRadToDeg)};
}

Quat orientation_from_tokens(std::span<const TokenId> seg) {
  EulerXYZ e;
  e.roll = angle_from_bin(seg[0] - kSegBase) * kDegToRad;
  e.pitch = angle_from_bin(seg[1] - kSegBase) * kDegToRad;
  e.yaw = angle_from_bin(seg[2] - kSegBase) * kDegToRad;
  return quaternion_from_euler_xyz(e);
}

}  // namespace

std::string render_token(TokenId id) {
  char buf[16];
  if (is_loc(id)) {
    std::snprintf(buf, sizeof buf, "<loc%04d>", id);
  } else if (is_seg(id)) {
    std::snprintf(buf, sizeof buf, "<seg%03d>", id - kSegBase);
  } else {
    throw Error(ErrorKind::OutOfRange, "token id " + std::to_string(id) + " outside vocabulary");
  }
  return buf;
}

std::string render_tokens(std::span<const TokenId> tokens) {
  std::string out;
  out.reserve(tokens.size() * 10);
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i > 0 && i % 3 == 0) out.push_back(' ');
    out += render_token(tokens[i]);
  }
  return out;
}

TokenId parse_token(std::string_view text) {
  int value = 0;
  if (text.size() == 9 && text.starts_with("<loc") && text.back() == '>' &&
      parse_digits(text.substr(4, 4), value) && value < kLocTokenCount) {
    return loc_token(value);
  }
  if (text.size() == 8 && text.starts_with("<seg") && text.back() == '>' &&
      parse_digits(text.substr(4, 3), value) && value < kSegTokenCount) {
    return seg_token(value);
  }
  throw Error(ErrorKind::GrammarViolation, "malformed token '" + std::string(text) + "'", 0);
}

TokenSequence parse_tokens(std::string_view text) {
  TokenSequence out;
  std::size_t i = 0;
  while (i < text.size()) {
    if (std::isspace(static_cast<unsigned char>(text[i]))) {
      ++i;
      continue;
    }
    const std::size_t close = text.find('>', i);
    const std::size_t next_open = text.find('<', i + 1);
    if (text[i] != '<' || close == std::string_view::npos ||
        (next_open != std::string_view::npos && next_open < close)) {
      throw Error(ErrorKind::GrammarViolation,
                  "malformed token text at character " + std::to_string(i), out.size());
    }
    try {
      out.push_back(parse_token(text.substr(i, close - i + 1)));
    } catch (const Error& e) {
      throw Error(ErrorKind::GrammarViolation, e.what(), out.size());
    }
    i = close + 1;
  }
  return out;
}

std::string_view to_string(Frame f) { return f == Frame::Image ? "image" : "robot"; }

std::string_view to_string(DepthMode m) {
  return m == DepthMode::SharedLoc ? "shared_loc" : "separate_band";
}

Frame parse_frame(std::string_view s) {
  if (s == "image") return Frame::Image;
  if (s == "robot") return Frame::Robot;
  throw Error(ErrorKind::InvalidArgument, "unknown frame '" + std::string(s) + "'");
}

DepthMode parse_depth_mode(std::string_view s) {
  if (s == "shared_loc") return DepthMode::SharedLoc;
  if (s == "separate_band") return DepthMode::SeparateBand;
  throw Error(ErrorKind::InvalidArgument, "unknown depth mode '" + std::string(s) + "'");
}

int UniformQuantizer::encode(double x) const {
  if (!(x >= lo && x <= hi)) {
    throw Error(ErrorKind::OutOfRange, "value " + std::to_string(x) + " outside [" +
                                           std::to_string(lo) + ", " + std::to_string(hi) + "]");
  }
  if (x == hi) return bins - 1;
  const double t = (x - lo) / (hi - lo);
  return std::min(static_cast<int>(std::floor(t * bins)), bins - 1);
}

double UniformQuantizer::decode(int index) const {
  if (index < 0 || index >= bins) {
    throw Error(ErrorKind::OutOfRange, "bin " + std::to_string(index) + " outside [0, " +
                                           std::to_string(bins) + ")");
  }
  return lo + (hi - lo) * (index + 0.5) / bins;
}

void CodecConfig::validate() const {
  if (n_loc != 1024 && n_loc != 512 && n_loc != 256 && n_loc != 128) {
    throw Error(ErrorKind::InvalidArgument, "n_loc must be one of 1024, 512, 256, 128");
  }
  if (depth_mode == DepthMode::SeparateBand && 2 * n_loc > kLocTokenCount) {
    throw Error(ErrorKind::InvalidArgument, "separate depth band needs n_loc <= 512");
  }
  if (!(depth_min < depth_max) || !(depth_min >= 0.0)) {
    throw Error(ErrorKind::InvalidArgument, "depth range must satisfy 0 <= d_min < d_max");
  }
  if (!((box_max - box_min).minCoeff() > 0.0)) {
    throw Error(ErrorKind::InvalidArgument, "robot-frame box must have positive volume");
  }
}

Grammar keypose_grammar(const CodecConfig& cfg) {
  cfg.validate();
  const TokenBand pos{loc_token(0), cfg.n_loc, TokenKind::Loc};
  TokenBand third = pos;
  if (cfg.frame == Frame::Image && cfg.depth_mode == DepthMode::SeparateBand) {
    third.first = loc_token(cfg.n_loc);
  }
  const TokenBand angle{seg_token(0), kSegTokenCount, TokenKind::Seg};
  const TokenBand pitch{seg_token(kPitchFirstBin), kPitchBinCount, TokenKind::Seg};
  return {pos, pos, third, angle, pitch, angle};
}

Grammar trajectory_grammar(const CodecConfig& cfg) {
  Grammar g = keypose_grammar(cfg);
  const Grammar second = g;
  g.insert(g.end(), second.begin(), second.end());
  return g;
}

void check_grammar(std::span<const TokenId> tokens, const Grammar& grammar) {
  const std::size_t n = std::min(tokens.size(), grammar.size());
  for (std::size_t i = 0; i < n; ++i) {
    if (!grammar[i].contains(tokens[i])) {
      const std::string text = (is_loc(tokens[i]) || is_seg(tokens[i]))
                                   ? render_token(tokens[i])
                                   : "id " + std::to_string(tokens[i]);
      throw Error(ErrorKind::GrammarViolation,
                  "token " + text + " not valid at position " + std::to_string(i), i);
    }
  }
  check_length(tokens, grammar.size());
}

int angle_bin(double degrees) {
  if (!std::isfinite(degrees)) throw Error(ErrorKind::OutOfRange, "non-finite angle");
  return kAngleQuantizer.encode(wrap_degrees(degrees));
}

double angle_from_bin(int bin) { return kAngleQuantizer.decode(bin); }

TokenId depth_bin(double depth, const CodecConfig& cfg) {
  const int bin = depth_quantizer(cfg).encode(depth);
  return cfg.depth_mode == DepthMode::SeparateBand ? loc_token(cfg.n_loc + bin)
                                                   : loc_token(bin);
}

double depth_from_token(TokenId token, const CodecConfig& cfg) {
  const int offset = cfg.depth_mode == DepthMode::SeparateBand ? cfg.n_loc : 0;
  return depth_quantizer(cfg).decode(token - offset);
}

TokenSequence encode_robot_state(const Pose6D& pose, const CameraModel* camera,
                                 const CodecConfig& cfg) {
  cfg.validate();
  const UniformQuantizer unit{0.0, 1.0, cfg.n_loc};
  TokenSequence out;
  out.reserve(kTokensPerKeypose);
  Quat orientation;
  if (cfg.frame == Frame::Image) {
    const ImageAction a = project(pose, require_camera(camera));
    out.push_back(loc_token(unit.encode(a.u)));
    out.push_back(loc_token(unit.encode(a.v)));
    out.push_back(depth_bin(a.depth, cfg));
    orientation = a.orientation;
  } else {
    for (int axis = 0; axis < 3; ++axis) {
      const UniformQuantizer q{cfg.box_min[axis], cfg.box_max[axis], cfg.n_loc};
      out.push_back(loc_token(q.encode(pose.position()[axis])));
    }
    orientation = pose.orientation();
  }
  for (int bin : orientation_bins(orientation)) out.push_back(seg_token(bin));
  return out;
}

Pose6D decode_robot_state(std::span<const TokenId> tokens, const CameraModel* camera,
                          const CodecConfig& cfg) {
  check_grammar(tokens, keypose_grammar(cfg));
  const UniformQuantizer unit{0.0, 1.0, cfg.n_loc};
  const Quat orientation = orientation_from_tokens(tokens.subspan(3, 3));
  if (cfg.frame == Frame::Image) {
    ImageAction a;
    a.u = unit.decode(tokens[0]);
    a.v = unit.decode(tokens[1]);
    a.depth = depth_from_token(tokens[2], cfg);
    a.orientation = orientation;
    return unproject(a, require_camera(camera));
  }
  Vec3 p;
  for (int axis = 0; axis < 3; ++axis) {
    const UniformQuantizer q{cfg.box_min[axis], cfg.box_max[axis], cfg.n_loc};
    p[axis] = q.decode(tokens[axis]);
  }
  return {p, orientation};
}

TokenSequence encode_keypose(const Keypose& kp, const CameraModel* camera,
                             const CodecConfig& cfg) {
  return encode_robot_state(kp.pose, camera, cfg);
}

Keypose decode_keypose(std::span<const TokenId> tokens, const CameraModel* camera,
                       const CodecConfig& cfg, Gripper gripper) {
  return {decode_robot_state(tokens, camera, cfg), gripper};
}

TokenSequence encode_trajectory(const Trajectory& traj, const CameraModel* camera,
                                const CodecConfig& cfg) {
  TokenSequence out = encode_keypose(traj.grasp(), camera, cfg);
  const TokenSequence second = encode_keypose(traj.release(), camera, cfg);
  out.insert(out.end(), second.begin(), second.end());
  return out;
}

Trajectory decode_trajectory(std::span<const TokenId> tokens, const CameraModel* camera,
                             const CodecConfig& cfg) {
  check_grammar(tokens, trajectory_grammar(cfg));
  return {decode_robot_state(tokens.first(kTokensPerKeypose), camera, cfg),
          decode_robot_state(tokens.subspan(kTokensPerKeypose), camera, cfg)};
}

}  // namespace keypose
