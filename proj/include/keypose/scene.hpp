#pragma once

#include "keypose/codec.hpp"
#include "keypose/geometry.hpp"
#include "keypose/image.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace keypose {

enum class Shape { Cube, Block, Sphere };
enum class SizeClass { Large, Small };
enum class Color { Gray, Red, Blue, Green, Brown, Purple, Cyan, Yellow };

inline constexpr std::array<Shape, 3> kShapes{Shape::Cube, Shape::Block, Shape::Sphere};
inline constexpr std::array<SizeClass, 2> kSizes{SizeClass::Large, SizeClass::Small};
inline constexpr std::array<Color, 8> kColors{Color::Gray,  Color::Red,    Color::Blue,
                                              Color::Green, Color::Brown,  Color::Purple,
                                              Color::Cyan,  Color::Yellow};

std::string_view to_string(Shape s);
std::string_view to_string(SizeClass s);
std::string_view to_string(Color c);
Rgb palette(Color c);

/// CLEVR-style primitive. A block is a 2:1:1 cuboid whose long side (local x)
/// equals the nominal diameter.
struct AssetSpec {
  Shape shape = Shape::Cube;
  SizeClass size = SizeClass::Large;
  Color color = Color::Gray;

  double diameter() const { return size == SizeClass::Large ? 0.07 : 0.035; }
  Vec3 half_extents() const;
  /// Radius of the circle circumscribing the horizontal footprint.
  double footprint_radius() const;

  /// "<size> <color> <shape>", e.g. "large yellow sphere".
  std::string name() const;
  auto operator<=>(const AssetSpec&) const = default;
};

/// Inverse of AssetSpec::name(); nullopt when the text is not a CLEVR name.
std::optional<AssetSpec> parse_asset_name(std::string_view name);

struct SceneObject {
  AssetSpec asset;
  Vec3 position;  // center, meters, world frame
  double yaw = 0.0;  // radians about world z

  Pose6D pose() const;
};

enum class SceneMode { Easy, Hard };
std::string_view to_string(SceneMode m);
SceneMode parse_scene_mode(std::string_view s);

struct CameraBand {
  double view_cone_deg = 10.0;  // max deviation from the nominal viewing direction
  double fov_min_deg = 50.0;
  double fov_max_deg = 55.0;
  double distance_min = 0.85;
  double distance_max = 1.0;
  double target_jitter = 0.02;  // look-at point jitter, meters
};

struct SceneConfig {
  int width = 640;
  int height = 480;
  int min_objects = 2;
  int max_objects = 4;
  Vec3 workspace_center{0.5, 0.0, 0.0};
  double workspace_half_x = 0.15;
  double workspace_half_y = 0.22;
  double min_object_gap = 0.01;  // extra clearance beyond touching footprints
  // Nominal camera direction from the workspace center (camera across the
  // table facing the robot).
  double camera_azimuth_deg = 0.0;
  double camera_elevation_deg = 50.0;
  CameraBand easy{};
  CameraBand hard{35.0, 40.0, 70.0, 0.7, 1.3, 0.08};
  int max_attempts = 100;
  double release_clearance = 0.005;
  CodecConfig image_codec{};
  CodecConfig robot_codec{.frame = Frame::Robot};

  void validate() const;
};

struct SceneSpec {
  std::uint64_t seed = 0;
  SceneMode mode = SceneMode::Easy;
  std::vector<SceneObject> objects;
  CameraModel camera;
  Pose6D robot_state;
  std::size_t source = 0;
  std::size_t target = 1;
  int attempts = 1;
};

/// Rejection-samples a scene deterministically from `seed`. Every scene keeps
/// its trajectory and robot state encodable in both frames; hard scenes also
/// pass the visibility test. Throws PlacementFailure after max_attempts.
SceneSpec sample_scene(const SceneConfig& cfg, SceneMode mode, std::uint64_t seed);

/// Both task objects fully inside the frame, within the depth range and not
/// occluded at their center ray.
bool passes_visibility_test(const SceneSpec& scene, const CodecConfig& image_codec);

/// Top-down grasp at the source center (gripper z along world -z, closing axis
/// along the shortest horizontal extent), release with the source translated
/// onto the target's top face plus clearance.
Trajectory compute_trajectory(const SceneSpec& scene, double release_clearance = 0.005);

/// Top-down gripper orientation with the closing axis (gripper x) at `yaw`.
Quat top_down_orientation(double yaw);

const std::vector<std::string>& default_instruction_templates();

/// Fills a uniformly chosen template's {src}/{dst} with object names.
std::string instruction_text(const SceneSpec& scene, const std::vector<std::string>& templates,
                             std::uint64_t seed);

struct ParsedInstruction {
  std::string source;
  std::string target;
  std::string relation;
};

/// Matches `text` against the templates; nullopt when none matches.
std::optional<ParsedInstruction> parse_instruction(std::string_view text,
                                                   const std::vector<std::string>& templates);

}  // namespace keypose
