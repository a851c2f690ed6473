#pragma once

#include "keypose/geometry.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace keypose {

// Token vocabulary: the 1024 localization tokens occupy ids [0, 1024), the 128
// segmentation tokens occupy ids [1024, 1152).
using TokenId = std::int32_t;
using TokenSequence = std::vector<TokenId>;

inline constexpr int kLocTokenCount = 1024;
inline constexpr int kSegTokenCount = 128;
inline constexpr int kVocabSize = kLocTokenCount + kSegTokenCount;
inline constexpr TokenId kSegBase = kLocTokenCount;
inline constexpr int kTokensPerKeypose = 6;
inline constexpr int kTokensPerTrajectory = 2 * kTokensPerKeypose;

enum class TokenKind { Loc, Seg };

constexpr TokenId loc_token(int index) { return index; }
constexpr TokenId seg_token(int index) { return kSegBase + index; }
constexpr bool is_loc(TokenId id) { return id >= 0 && id < kLocTokenCount; }
constexpr bool is_seg(TokenId id) { return id >= kSegBase && id < kVocabSize; }

/// `<locNNNN>` / `<segNNN>`.
std::string render_token(TokenId id);
/// Groups of three tokens separated by a single space, e.g.
/// `<loc0243><loc0423><loc0751> <seg063><seg079><seg112>`.
std::string render_tokens(std::span<const TokenId> tokens);
/// Throws GrammarViolation (position = char offset) on malformed text.
TokenId parse_token(std::string_view text);
/// Whitespace between tokens is ignored. Throws GrammarViolation whose
/// position is the index of the offending token.
TokenSequence parse_tokens(std::string_view text);

enum class Frame { Image, Robot };
enum class DepthMode { SharedLoc, SeparateBand };

std::string_view to_string(Frame f);
std::string_view to_string(DepthMode m);
Frame parse_frame(std::string_view s);
DepthMode parse_depth_mode(std::string_view s);

/// Uniform binning of [lo, hi] into `bins` cells. x == hi maps to the last bin;
/// anything else outside [lo, hi) throws OutOfRange.
struct UniformQuantizer {
  double lo = 0.0;
  double hi = 1.0;
  int bins = 1;

  int encode(double x) const;
  double decode(int index) const;  // bin center
  double half_width() const { return (hi - lo) / (2.0 * bins); }
};

struct CodecConfig {
  int n_loc = 1024;
  Frame frame = Frame::Image;
  DepthMode depth_mode = DepthMode::SharedLoc;
  double depth_min = 0.2;
  double depth_max = 2.0;
  // Robot-frame position box: 1.2 m cube around the workspace origin (0.5, 0, 0).
  Vec3 box_min{-0.1, -0.6, -0.6};
  Vec3 box_max{1.1, 0.6, 0.6};

  /// Throws InvalidArgument when the layout or ranges are inconsistent.
  void validate() const;
};

inline constexpr int kAngleBins = kSegTokenCount;
// Pitch lies in [-90, 90]; only these seg bins are canonical for it.
inline constexpr int kPitchFirstBin = 32;
inline constexpr int kPitchBinCount = 64;

/// Contiguous range of valid token ids for one decoding step.
struct TokenBand {
  TokenId first = 0;
  int count = 0;
  TokenKind kind = TokenKind::Loc;

  bool contains(TokenId id) const { return id >= first && id < first + count; }
};

using Grammar = std::vector<TokenBand>;

Grammar keypose_grammar(const CodecConfig& cfg);
Grammar trajectory_grammar(const CodecConfig& cfg);

/// Throws GrammarViolation at the first token outside its step's band (or at
/// the first missing/extra position when lengths differ).
void check_grammar(std::span<const TokenId> tokens, const Grammar& grammar);

/// Angle quantizer over [-180, 180) degrees with 128 bins.
int angle_bin(double degrees);
double angle_from_bin(int bin);

TokenId depth_bin(double depth, const CodecConfig& cfg);
double depth_from_token(TokenId token, const CodecConfig& cfg);

/// Image frame requires `camera`; robot frame ignores it.
TokenSequence encode_keypose(const Keypose& kp, const CameraModel* camera, const CodecConfig& cfg);
Keypose decode_keypose(std::span<const TokenId> tokens, const CameraModel* camera,
                       const CodecConfig& cfg, Gripper gripper = Gripper::Grasp);

TokenSequence encode_robot_state(const Pose6D& pose, const CameraModel* camera,
                                 const CodecConfig& cfg);
Pose6D decode_robot_state(std::span<const TokenId> tokens, const CameraModel* camera,
                          const CodecConfig& cfg);

TokenSequence encode_trajectory(const Trajectory& traj, const CameraModel* camera,
                                const CodecConfig& cfg);
Trajectory decode_trajectory(std::span<const TokenId> tokens, const CameraModel* camera,
                             const CodecConfig& cfg);

}  // namespace keypose
