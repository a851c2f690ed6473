#pragma once

#include <nlohmann/json.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace keypose::cli {

using Json = nlohmann::json;

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;

struct CodecOptions {
  std::string frame = "image";
  int n_loc = 1024;
  std::string depth_mode = "shared_loc";
  double depth_min = 0.2;
  double depth_max = 2.0;
};

struct GenDatasetOptions {
  std::string out;
  std::size_t count = 10;
  std::uint64_t seed = 0;
  std::string mode = "easy";
  int width = 640;
  int height = 480;
  bool no_depth = false;
  bool no_photometric = false;
  std::string background_dir;
  double background_p = 0.2;
  unsigned threads = 0;
  bool validate = false;
  CodecOptions codec;
};

struct EncodeOptions {
  std::string in = "-";
  std::string out = "-";
  bool decode = false;
  CodecOptions codec;
};

struct DecodeLogitsOptions {
  std::string dump;
  std::string out = "-";
  std::string strategy = "beam-nms";
  int n = 3;
  int window_loc = 100;
  int window_seg = 12;
  double temperature = 1.0;
  std::uint64_t seed = 0;
  std::string camera;
  std::string episode_id;
  CodecOptions codec;
};

struct EvalOptions {
  std::string predictions;
  std::string ground_truth;
  std::string out = "-";
  std::string csv;
  double map_degrees_per_cm = 10.0;
  double l1_degrees_per_cm = 1.0;
  std::vector<double> thresholds{0.5, 1.0, 2.0, 5.0, 10.0, 20.0, 50.0};
  bool allow_missing = false;
};

struct CropOptions {
  std::string image;
  std::string out;
  std::string center = "image_center";
  std::string size = "full";
  bool valid = false;
  std::vector<double> start;
  std::vector<double> end;
  std::string records;
  std::string scene_id;
  std::vector<double> points;  // flattened x, y pairs in original pixels
};

struct PairSampleOptions {
  std::string records;
  std::string out_dir;
  std::string jsonl;
  std::size_t k = 10;
  std::uint64_t seed = 0;
  std::string kind = "imitation";
  std::string frame = "image";
};

Json to_json(const CodecOptions& o);
Json to_json(const GenDatasetOptions& o);
Json to_json(const EncodeOptions& o);
Json to_json(const DecodeLogitsOptions& o);
Json to_json(const EvalOptions& o);
Json to_json(const CropOptions& o);
Json to_json(const PairSampleOptions& o);

/// Each command throws keypose::Error on failure; the caller maps kinds to
/// exit codes.
void cmd_gen_dataset(const GenDatasetOptions& o);
void cmd_encode(const EncodeOptions& o);
void cmd_decode_logits(const DecodeLogitsOptions& o);
void cmd_eval(const EvalOptions& o);
void cmd_crop(const CropOptions& o);
void cmd_pair_sample(const PairSampleOptions& o);

}  // namespace keypose::cli
