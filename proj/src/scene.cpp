#include "keypose/scene.hpp"

#include "keypose/error.hpp"
#include "keypose/random.hpp"
#include "keypose/render.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <regex>

namespace keypose {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kDegToRad = kPi / 180.0;

const CameraBand& band_for(const SceneConfig& cfg, SceneMode mode) {
  return mode == SceneMode::Easy ? cfg.easy : cfg.hard;
}

// Wraps to (-pi/2, pi/2]: a parallel gripper is symmetric under a half turn.
double wrap_half_turn(double yaw) {
  double w = std::fmod(yaw, kPi);
  if (w <= -kPi / 2) w += kPi;
  if (w > kPi / 2) w -= kPi;
  return w;
}

CameraModel sample_camera(const SceneConfig& cfg, const CameraBand& band, Rng& rng) {
  const double az = cfg.camera_azimuth_deg * kDegToRad;
  const double el = cfg.camera_elevation_deg * kDegToRad;
  const Vec3 nominal(std::cos(el) * std::cos(az), std::cos(el) * std::sin(az), std::sin(el));
  const Vec3 e1 = nominal.unitOrthogonal();
  const Vec3 e2 = nominal.cross(e1);
  // Uniform over the spherical cap for small cones.
  const double theta = band.view_cone_deg * kDegToRad * std::sqrt(uniform01(rng));
  const double phi = uniform(rng, 0.0, 2.0 * kPi);
  const Vec3 dir = std::cos(theta) * nominal +
                   std::sin(theta) * (std::cos(phi) * e1 + std::sin(phi) * e2);
  const Vec3 target = cfg.workspace_center + Vec3(uniform(rng, -1.0, 1.0) * band.target_jitter,
                                                  uniform(rng, -1.0, 1.0) * band.target_jitter,
                                                  0.0);
  const double distance = uniform(rng, band.distance_min, band.distance_max);
  const double fov = uniform(rng, band.fov_min_deg, band.fov_max_deg);
  return CameraModel::look_at(target + distance * dir, target, fov, cfg.width, cfg.height);
}

bool encodable(const SceneSpec& scene, const Trajectory& traj, const SceneConfig& cfg) {
  try {
    encode_trajectory(traj, &scene.camera, cfg.image_codec);
    encode_trajectory(traj, nullptr, cfg.robot_codec);
    encode_robot_state(scene.robot_state, &scene.camera, cfg.image_codec);
    encode_robot_state(scene.robot_state, nullptr, cfg.robot_codec);
  } catch (const Error&) {
    return false;
  }
  return true;
}

std::string regex_escape(std::string_view s) {
  static const std::string special = R"(\^$.|?*+()[]{})";
  std::string out;
  for (char c : s) {
    if (special.find(c) != std::string::npos) out.push_back('\\');
    out.push_back(c);
  }
  return out;
}

}  // namespace

std::string_view to_string(Shape s) {
  switch (s) {
    case Shape::Cube: return "cube";
    case Shape::Block: return "block";
    case Shape::Sphere: return "sphere";
  }
  return "";
}

std::string_view to_string(SizeClass s) { return s == SizeClass::Large ? "large" : "small"; }

std::string_view to_string(Color c) {
  switch (c) {
    case Color::Gray: return "gray";
    case Color::Red: return "red";
    case Color::Blue: return "blue";
    case Color::Green: return "green";
    case Color::Brown: return "brown";
    case Color::Purple: return "purple";
    case Color::Cyan: return "cyan";
    case Color::Yellow: return "yellow";
  }
  return "";
}

Rgb palette(Color c) {
  switch (c) {
    case Color::Gray: return {87, 87, 87};
    case Color::Red: return {173, 35, 35};
    case Color::Blue: return {42, 75, 215};
    case Color::Green: return {29, 105, 20};
    case Color::Brown: return {129, 74, 25};
    case Color::Purple: return {129, 38, 192};
    case Color::Cyan: return {41, 208, 208};
    case Color::Yellow: return {255, 238, 51};
  }
  return {0, 0, 0};
}

Vec3 AssetSpec::half_extents() const {
  const double r = 0.5 * diameter();
  return shape == Shape::Block ? Vec3(r, 0.5 * r, 0.5 * r) : Vec3(r, r, r);
}

double AssetSpec::footprint_radius() const {
  if (shape == Shape::Sphere) return 0.5 * diameter();
  const Vec3 h = half_extents();
  return std::hypot(h.x(), h.y());
}

std::string AssetSpec::name() const {
  return std::string(to_string(size)) + " " + std::string(to_string(color)) + " " +
         std::string(to_string(shape));
}

std::optional<AssetSpec> parse_asset_name(std::string_view name) {
  for (SizeClass s : kSizes) {
    for (Color c : kColors) {
      for (Shape sh : kShapes) {
        const AssetSpec a{sh, s, c};
        if (a.name() == name) return a;
      }
    }
  }
  return std::nullopt;
}

Pose6D SceneObject::pose() const {
  return {position, Quat(Eigen::AngleAxisd(yaw, Vec3::UnitZ()))};
}

std::string_view to_string(SceneMode m) { return m == SceneMode::Easy ? "easy" : "hard"; }

SceneMode parse_scene_mode(std::string_view s) {
  if (s == "easy") return SceneMode::Easy;
  if (s == "hard") return SceneMode::Hard;
  throw Error(ErrorKind::InvalidArgument, "unknown scene mode '" + std::string(s) + "'");
}

void SceneConfig::validate() const {
  if (width <= 0 || height <= 0) throw Error(ErrorKind::InvalidArgument, "bad image size");
  if (min_objects < 2 || max_objects < min_objects || max_objects > 16) {
    throw Error(ErrorKind::InvalidArgument, "object count must satisfy 2 <= min <= max <= 16");
  }
  if (max_attempts < 1) throw Error(ErrorKind::InvalidArgument, "max_attempts must be >= 1");
  for (const CameraBand* b : {&easy, &hard}) {
    if (!(b->fov_min_deg > 0.0 && b->fov_min_deg <= b->fov_max_deg && b->fov_max_deg < 180.0) ||
        !(b->distance_min > 0.0 && b->distance_min <= b->distance_max) ||
        !(b->view_cone_deg >= 0.0)) {
      throw Error(ErrorKind::InvalidArgument, "invalid camera band");
    }
  }
  image_codec.validate();
  robot_codec.validate();
  if (image_codec.frame != Frame::Image || robot_codec.frame != Frame::Robot) {
    throw Error(ErrorKind::InvalidArgument, "codec frames must be image and robot");
  }
}

Quat top_down_orientation(double yaw) {
  return Quat(Eigen::AngleAxisd(yaw, Vec3::UnitZ())) * Quat(Eigen::AngleAxisd(kPi, Vec3::UnitX()));
}

Trajectory compute_trajectory(const SceneSpec& scene, double release_clearance) {
  if (scene.source >= scene.objects.size() || scene.target >= scene.objects.size() ||
      scene.source == scene.target) {
    throw Error(ErrorKind::InvalidArgument, "invalid task object indices");
  }
  const SceneObject& src = scene.objects[scene.source];
  const SceneObject& dst = scene.objects[scene.target];
  double yaw = 0.0;
  switch (src.asset.shape) {
    case Shape::Sphere: yaw = 0.0; break;
    case Shape::Cube: yaw = wrap_half_turn(src.yaw); break;
    // Close across the local y axis, the short horizontal side.
    case Shape::Block: yaw = wrap_half_turn(src.yaw + kPi / 2); break;
  }
  const Quat grip = top_down_orientation(yaw);
  const Vec3 release_pos(dst.position.x(), dst.position.y(),
                         dst.position.z() + dst.asset.half_extents().z() +
                             src.asset.half_extents().z() + release_clearance);
  return {Pose6D(src.position, grip), Pose6D(release_pos, grip)};
}

bool passes_visibility_test(const SceneSpec& scene, const CodecConfig& image_codec) {
  const CameraModel& cam = scene.camera;
  for (std::size_t idx : {scene.source, scene.target}) {
    const SceneObject& obj = scene.objects[idx];
    const Vec3 half = obj.asset.half_extents();
    const Quat q(Eigen::AngleAxisd(obj.yaw, Vec3::UnitZ()));
    for (int c = 0; c < 8; ++c) {
      const Vec3 corner((c & 1 ? 1 : -1) * half.x(), (c & 2 ? 1 : -1) * half.y(),
                        (c & 4 ? 1 : -1) * half.z());
      const Vec3 p = cam.extrinsic().transform_point(obj.position + q * corner);
      if (p.z() <= kMinDepth) return false;
      const double px = cam.fx() * p.x() / p.z() + cam.cx();
      const double py = cam.fy() * p.y() / p.z() + cam.cy();
      if (px < 0.0 || px > cam.width() || py < 0.0 || py > cam.height()) return false;
    }
    const Vec3 center_cam = cam.extrinsic().transform_point(obj.position);
    if (center_cam.z() < image_codec.depth_min || center_cam.z() > image_codec.depth_max) {
      return false;
    }
    // The ray toward the object's center must hit this object first.
    const Eigen::Vector2d pix = project_pixel(obj.position, cam);
    Vec3 origin, dir;
    pixel_ray(cam, pix.x(), pix.y(), origin, dir);
    const auto own = intersect_ray(obj, origin, dir);
    if (!own) return false;
    for (std::size_t k = 0; k < scene.objects.size(); ++k) {
      if (k == idx) continue;
      const auto other = intersect_ray(scene.objects[k], origin, dir);
      if (other && other->t < own->t) return false;
    }
  }
  return true;
}

SceneSpec sample_scene(const SceneConfig& cfg, SceneMode mode, std::uint64_t seed) {
  cfg.validate();
  Rng rng(seed);
  const CameraBand& band = band_for(cfg, mode);
  constexpr std::size_t kAssetCount = kShapes.size() * kSizes.size() * kColors.size();

  for (int attempt = 1; attempt <= cfg.max_attempts; ++attempt) {
    const int n = cfg.min_objects +
                  static_cast<int>(uniform_index(rng, cfg.max_objects - cfg.min_objects + 1));
    // Distinct assets keep instructions unambiguous.
    std::array<std::size_t, kAssetCount> pool{};
    for (std::size_t i = 0; i < pool.size(); ++i) pool[i] = i;
    std::vector<SceneObject> objects;
    bool overlap = false;
    for (int k = 0; k < n; ++k) {
      const std::size_t pick = k + uniform_index(rng, pool.size() - k);
      std::swap(pool[k], pool[pick]);
      const std::size_t a = pool[k];
      SceneObject obj;
      obj.asset = AssetSpec{kShapes[a % 3], kSizes[(a / 3) % 2], kColors[a / 6]};
      obj.yaw = uniform(rng, -kPi, kPi);
      obj.position = cfg.workspace_center +
                     Vec3(uniform(rng, -cfg.workspace_half_x, cfg.workspace_half_x),
                          uniform(rng, -cfg.workspace_half_y, cfg.workspace_half_y),
                          obj.asset.half_extents().z());
      for (const auto& other : objects) {
        const double dist = (obj.position - other.position).head<2>().norm();
        if (dist <= obj.asset.footprint_radius() + other.asset.footprint_radius() +
                        cfg.min_object_gap) {
          overlap = true;
        }
      }
      objects.push_back(obj);
    }
    const std::size_t source = uniform_index(rng, n);
    std::size_t target = uniform_index(rng, n - 1);
    if (target >= source) ++target;

    CameraModel camera = sample_camera(cfg, band, rng);
    const Vec3 state_pos = cfg.workspace_center + Vec3(uniform(rng, -0.1, 0.1),
                                                       uniform(rng, -0.15, 0.15),
                                                       uniform(rng, 0.15, 0.3));
    const Pose6D robot_state(state_pos, top_down_orientation(uniform(rng, -kPi / 2, kPi / 2)));
    if (overlap) continue;

    SceneSpec scene{seed, mode, std::move(objects), camera, robot_state, source, target, attempt};
    const Trajectory traj = compute_trajectory(scene, cfg.release_clearance);
    if (!encodable(scene, traj, cfg)) continue;
    if (mode == SceneMode::Hard && !passes_visibility_test(scene, cfg.image_codec)) continue;
    return scene;
  }
  throw Error(ErrorKind::PlacementFailure,
              "no valid placement after " + std::to_string(cfg.max_attempts) + " attempts");
}

const std::vector<std::string>& default_instruction_templates() {
  static const std::vector<std::string> templates{
      "move {src} onto {dst}",
      "put the {src} on the {dst}",
      "place the {src} on top of the {dst}",
      "pick up the {src} and put it on the {dst}",
      "stack the {src} onto the {dst}",
  };
  return templates;
}

std::string instruction_text(const SceneSpec& scene, const std::vector<std::string>& templates,
                             std::uint64_t seed) {
  if (templates.empty()) throw Error(ErrorKind::InvalidArgument, "no instruction templates");
  Rng rng(seed);
  std::string text = templates[uniform_index(rng, templates.size())];
  const auto fill = [&text](std::string_view key, const std::string& value) {
    for (std::size_t pos = text.find(key); pos != std::string::npos;
         pos = text.find(key, pos + value.size())) {
      text.replace(pos, key.size(), value);
    }
  };
  fill("{src}", scene.objects.at(scene.source).asset.name());
  fill("{dst}", scene.objects.at(scene.target).asset.name());
  return text;
}

std::optional<ParsedInstruction> parse_instruction(std::string_view text,
                                                   const std::vector<std::string>& templates) {
  for (const std::string& tmpl : templates) {
    const std::size_t s = tmpl.find("{src}");
    const std::size_t d = tmpl.find("{dst}");
    if (s == std::string::npos || d == std::string::npos) continue;
    const bool src_first = s < d;
    const std::size_t first = std::min(s, d);
    const std::size_t second = std::max(s, d);
    const std::string pattern = "^" + regex_escape(tmpl.substr(0, first)) + "(.+?)" +
                                regex_escape(tmpl.substr(first + 5, second - first - 5)) +
                                "(.+?)" + regex_escape(tmpl.substr(second + 5)) + "$";
    std::smatch m;
    const std::string subject(text);
    if (std::regex_match(subject, m, std::regex(pattern))) {
      return ParsedInstruction{src_first ? m[1].str() : m[2].str(),
                               src_first ? m[2].str() : m[1].str(), "onto"};
    }
  }
  return std::nullopt;
}

}  // namespace keypose
