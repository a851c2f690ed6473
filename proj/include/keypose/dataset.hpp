#pragma once

#include "keypose/augment.hpp"
#include "keypose/codec.hpp"
#include "keypose/geometry.hpp"
#include "keypose/scene.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace keypose {

using Json = nlohmann::json;

inline constexpr int kRecordSchema = 1;

struct ObjectRecord {
  std::string name;  // "<size> <color> <shape>"
  Vec3 position;
  double yaw = 0.0;
};

/// Token strings of one trajectory/state in both frames.
struct FrameTokens {
  std::string image;
  std::string robot;
};

/// One line of records.jsonl. Real-world data enters through the same schema,
/// so everything not needed for prompting or evaluation is optional.
struct DatasetRecord {
  std::string scene_id;
  std::optional<std::string> mode;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> rgb_path;  // relative to the dataset root
  std::optional<std::string> rgb_sha256;
  std::optional<std::string> depth_path;
  std::optional<std::string> depth_sha256;
  std::optional<CameraModel> camera;
  std::optional<Pose6D> robot_state;
  std::string instruction;
  std::vector<ObjectRecord> objects;
  std::optional<std::pair<std::size_t, std::size_t>> task;  // (source, target) object indices
  std::optional<Trajectory> trajectory;
  std::vector<ImageAction> image_actions;  // grasp, release
  std::optional<FrameTokens> tokens;
  std::optional<FrameTokens> robot_state_tokens;
};

Json pose_to_json(const Pose6D& p);
Pose6D pose_from_json(const Json& j);
Json camera_to_json(const CameraModel& c);
CameraModel camera_from_json(const Json& j);

Json codec_to_json(const CodecConfig& c);
/// Missing keys keep the values already in `base`.
CodecConfig codec_from_json(const Json& j, CodecConfig base = {});

Json record_to_json(const DatasetRecord& r);
/// Throws MissingField / FormatError.
DatasetRecord record_from_json(const Json& j);

/// One compact JSON line (no trailing newline).
std::string record_to_line(const DatasetRecord& r);
std::vector<DatasetRecord> read_records(const std::filesystem::path& jsonl);

struct DatasetConfig {
  std::size_t count = 10;
  std::uint64_t seed = 0;
  SceneMode mode = SceneMode::Easy;
  SceneConfig scene{};
  bool write_depth = true;
  bool photometric = true;
  PhotometricJitter jitter{};
  double background_p = 0.2;
  std::optional<std::filesystem::path> background_dir;
  std::vector<std::string> templates = default_instruction_templates();
  unsigned threads = 0;  // 0: hardware concurrency

  Json to_json() const;
  static DatasetConfig from_json(const Json& j);
};

/// Builds the record for one scene (tokens, projections, instruction) without
/// touching images.
DatasetRecord make_record(const SceneSpec& scene, const std::string& scene_id,
                          const DatasetConfig& cfg);

std::string scene_id_for(std::size_t index);

struct GenerationResult {
  std::filesystem::path records_path;
  std::filesystem::path manifest_path;
  std::string config_sha256;
  std::string records_sha256;
  std::size_t count = 0;
};

/// Writes images/, records.jsonl and manifest.json under `out_dir`. Every scene
/// draws from derive_seed(cfg.seed, index); a PlacementFailure names the scene.
/// `provenance` is echoed into the manifest.
GenerationResult generate_dataset(const DatasetConfig& cfg, const std::filesystem::path& out_dir,
                                  const Json& provenance = nullptr);

std::vector<RgbImage> load_background_pool(const std::filesystem::path& dir, int width,
                                           int height);

/// Per-keypose world position error bound for an image-frame decode.
double image_position_bound(const Pose6D& pose, const CameraModel& cam, const CodecConfig& cfg);
/// Bound on the relative rotation angle after quantizing the three angles.
double orientation_bound_deg();

struct ValidationReport {
  bool ok = true;
  std::vector<std::string> issues;
};

/// Checks that stored tokens decode and unproject back to the stored
/// trajectory within quantization bounds, that reprojection reproduces the
/// stored image actions exactly, and that re-encoding reproduces the tokens.
ValidationReport validate_record(const DatasetRecord& r, const CodecConfig& image_codec,
                                 const CodecConfig& robot_codec);

}  // namespace keypose
