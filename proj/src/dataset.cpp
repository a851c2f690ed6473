#include "keypose/dataset.hpp"

#include "keypose/error.hpp"
#include "keypose/random.hpp"
#include "keypose/render.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <mutex>
#include <set>
#include <thread>

namespace keypose {

namespace fs = std::filesystem;

namespace {

// Stream ids under a scene seed.
constexpr std::uint64_t kInstructionStream = 1;
constexpr std::uint64_t kJitterStream = 2;
constexpr std::uint64_t kBackgroundStream = 3;

const Json& require(const Json& j, const char* key) {
  if (!j.is_object()) throw Error(ErrorKind::FormatError, std::string("expected an object holding '") + key + "'");
  const auto it = j.find(key);
  if (it == j.end() || it->is_null()) {
    throw Error(ErrorKind::MissingField, std::string("missing field '") + key + "'");
  }
  return *it;
}

const Json* optional_field(const Json& j, const char* key) {
  const auto it = j.find(key);
  return (it == j.end() || it->is_null()) ? nullptr : &*it;
}

Json vec_to_json(const Vec3& v) { return Json::array({v.x(), v.y(), v.z()}); }

Vec3 vec_from_json(const Json& j) {
  if (!j.is_array() || j.size() != 3) throw Error(ErrorKind::FormatError, "expected 3 numbers");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

Json quat_to_json(const Quat& q) { return Json::array({q.w(), q.x(), q.y(), q.z()}); }

Quat quat_from_json(const Json& j) {
  if (!j.is_array() || j.size() != 4) throw Error(ErrorKind::FormatError, "expected 4 numbers (w, x, y, z)");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>()};
}

Json tokens_to_json(const FrameTokens& t) { return {{"image", t.image}, {"robot", t.robot}}; }

FrameTokens tokens_from_json(const Json& j) {
  return {require(j, "image").get<std::string>(), require(j, "robot").get<std::string>()};
}

Json band_to_json(const CameraBand& b) {
  return {{"view_cone_deg", b.view_cone_deg}, {"fov_min_deg", b.fov_min_deg},
          {"fov_max_deg", b.fov_max_deg},     {"distance_min", b.distance_min},
          {"distance_max", b.distance_max},   {"target_jitter", b.target_jitter}};
}

template <class T>
void read_into(const Json& j, const char* key, T& out) {
  if (const Json* v = optional_field(j, key)) out = v->get<T>();
}

void reject_unknown(const Json& j, std::initializer_list<const char*> keys, const char* where) {
  if (!j.is_object()) throw Error(ErrorKind::InvalidArgument, std::string(where) + " must be an object");
  const std::set<std::string> known(keys.begin(), keys.end());
  for (const auto& [k, v] : j.items()) {
    if (!known.count(k)) {
      throw Error(ErrorKind::InvalidArgument, "unknown key '" + k + "' in " + where);
    }
  }
}

CameraBand band_from_json(const Json& j, CameraBand b) {
  reject_unknown(j, {"view_cone_deg", "fov_min_deg", "fov_max_deg", "distance_min", "distance_max", "target_jitter"},
                 "camera band");
  read_into(j, "view_cone_deg", b.view_cone_deg);
  read_into(j, "fov_min_deg", b.fov_min_deg);
  read_into(j, "fov_max_deg", b.fov_max_deg);
  read_into(j, "distance_min", b.distance_min);
  read_into(j, "distance_max", b.distance_max);
  read_into(j, "target_jitter", b.target_jitter);
  return b;
}

Json scene_config_to_json(const SceneConfig& c) {
  return {{"width", c.width},
          {"height", c.height},
          {"min_objects", c.min_objects},
          {"max_objects", c.max_objects},
          {"workspace_center", vec_to_json(c.workspace_center)},
          {"workspace_half_x", c.workspace_half_x},
          {"workspace_half_y", c.workspace_half_y},
          {"min_object_gap", c.min_object_gap},
          {"camera_azimuth_deg", c.camera_azimuth_deg},
          {"camera_elevation_deg", c.camera_elevation_deg},
          {"easy", band_to_json(c.easy)},
          {"hard", band_to_json(c.hard)},
          {"max_attempts", c.max_attempts},
          {"release_clearance", c.release_clearance},
          {"image_codec", codec_to_json(c.image_codec)},
          {"robot_codec", codec_to_json(c.robot_codec)}};
}

SceneConfig scene_config_from_json(const Json& j, SceneConfig c) {
  reject_unknown(j,
                 {"width", "height", "min_objects", "max_objects", "workspace_center", "workspace_half_x",
                  "workspace_half_y", "min_object_gap", "camera_azimuth_deg", "camera_elevation_deg", "easy",
                  "hard", "max_attempts", "release_clearance", "image_codec", "robot_codec"},
                 "scene config");
  read_into(j, "width", c.width);
  read_into(j, "height", c.height);
  read_into(j, "min_objects", c.min_objects);
  read_into(j, "max_objects", c.max_objects);
  if (const Json* v = optional_field(j, "workspace_center")) c.workspace_center = vec_from_json(*v);
  read_into(j, "workspace_half_x", c.workspace_half_x);
  read_into(j, "workspace_half_y", c.workspace_half_y);
  read_into(j, "min_object_gap", c.min_object_gap);
  read_into(j, "camera_azimuth_deg", c.camera_azimuth_deg);
  read_into(j, "camera_elevation_deg", c.camera_elevation_deg);
  if (const Json* v = optional_field(j, "easy")) c.easy = band_from_json(*v, c.easy);
  if (const Json* v = optional_field(j, "hard")) c.hard = band_from_json(*v, c.hard);
  read_into(j, "max_attempts", c.max_attempts);
  read_into(j, "release_clearance", c.release_clearance);
  if (const Json* v = optional_field(j, "image_codec")) c.image_codec = codec_from_json(*v, c.image_codec);
  if (const Json* v = optional_field(j, "robot_codec")) c.robot_codec = codec_from_json(*v, c.robot_codec);
  return c;
}

struct SceneOutput {
  std::string line;
  std::exception_ptr error;
};

bool same_action(const ImageAction& a, const ImageAction& b) {
  return a.u == b.u && a.v == b.v && a.depth == b.depth &&
         a.orientation.coeffs() == b.orientation.coeffs();
}

}  // namespace

Json pose_to_json(const Pose6D& p) {
  return {{"position", vec_to_json(p.position())}, {"orientation", quat_to_json(p.orientation())}};
}

Pose6D pose_from_json(const Json& j) {
  return {vec_from_json(require(j, "position")), quat_from_json(require(j, "orientation"))};
}

Json camera_to_json(const CameraModel& c) {
  return {{"fx", c.fx()},       {"fy", c.fy()},         {"cx", c.cx()},
          {"cy", c.cy()},       {"width", c.width()},   {"height", c.height()},
          {"extrinsic", pose_to_json(c.extrinsic())}};
}

CameraModel camera_from_json(const Json& j) {
  return CameraModel(require(j, "fx").get<double>(), require(j, "fy").get<double>(),
                     require(j, "cx").get<double>(), require(j, "cy").get<double>(),
                     require(j, "width").get<int>(), require(j, "height").get<int>(),
                     pose_from_json(require(j, "extrinsic")));
}

Json codec_to_json(const CodecConfig& c) {
  return {{"n_loc", c.n_loc},
          {"frame", std::string(to_string(c.frame))},
          {"depth_mode", std::string(to_string(c.depth_mode))},
          {"depth_min", c.depth_min},
          {"depth_max", c.depth_max},
          {"box_min", vec_to_json(c.box_min)},
          {"box_max", vec_to_json(c.box_max)}};
}

CodecConfig codec_from_json(const Json& j, CodecConfig c) {
  reject_unknown(j, {"n_loc", "frame", "depth_mode", "depth_min", "depth_max", "box_min", "box_max"}, "codec config");
  read_into(j, "n_loc", c.n_loc);
  if (const Json* v = optional_field(j, "frame")) c.frame = parse_frame(v->get<std::string>());
  if (const Json* v = optional_field(j, "depth_mode")) c.depth_mode = parse_depth_mode(v->get<std::string>());
  read_into(j, "depth_min", c.depth_min);
  read_into(j, "depth_max", c.depth_max);
  if (const Json* v = optional_field(j, "box_min")) c.box_min = vec_from_json(*v);
  if (const Json* v = optional_field(j, "box_max")) c.box_max = vec_from_json(*v);
  c.validate();
  return c;
}

Json record_to_json(const DatasetRecord& r) {
  Json j;
  j["schema"] = kRecordSchema;
  j["scene_id"] = r.scene_id;
  if (r.mode) j["mode"] = *r.mode;
  if (r.seed) j["seed"] = *r.seed;
  if (r.rgb_path) {
    j["rgb"] = {{"path", *r.rgb_path}};
    if (r.rgb_sha256) j["rgb"]["sha256"] = *r.rgb_sha256;
  }
  if (r.depth_path) {
    j["depth"] = {{"path", *r.depth_path}, {"unit", "mm"}};
    if (r.depth_sha256) j["depth"]["sha256"] = *r.depth_sha256;
  }
  if (r.camera) j["camera"] = camera_to_json(*r.camera);
  if (r.robot_state) j["robot_state"] = pose_to_json(*r.robot_state);
  j["instruction"] = r.instruction;
  if (!r.objects.empty()) {
    Json objs = Json::array();
    for (const auto& o : r.objects) {
      objs.push_back({{"name", o.name}, {"position", vec_to_json(o.position)}, {"yaw", o.yaw}});
    }
    j["objects"] = std::move(objs);
  }
  if (r.task) j["task"] = {{"source", r.task->first}, {"target", r.task->second}};
  if (r.trajectory) {
    j["trajectory"] = {{"grasp", pose_to_json(r.trajectory->grasp().pose)},
                       {"release", pose_to_json(r.trajectory->release().pose)}};
  }
  if (!r.image_actions.empty()) {
    Json acts = Json::array();
    for (const auto& a : r.image_actions) {
      acts.push_back({{"u", a.u}, {"v", a.v}, {"depth", a.depth},
                      {"orientation", quat_to_json(a.orientation)}});
    }
    j["image_actions"] = std::move(acts);
  }
  if (r.tokens) j["tokens"] = tokens_to_json(*r.tokens);
  if (r.robot_state_tokens) j["robot_state_tokens"] = tokens_to_json(*r.robot_state_tokens);
  return j;
}

DatasetRecord record_from_json(const Json& j) {
  try {
    if (require(j, "schema").get<int>() != kRecordSchema) {
      throw Error(ErrorKind::FormatError, "unsupported record schema " + require(j, "schema").dump());
    }
    DatasetRecord r;
    r.scene_id = require(j, "scene_id").get<std::string>();
    if (const Json* v = optional_field(j, "mode")) r.mode = v->get<std::string>();
    if (const Json* v = optional_field(j, "seed")) r.seed = v->get<std::uint64_t>();
    if (const Json* v = optional_field(j, "rgb")) {
      r.rgb_path = require(*v, "path").get<std::string>();
      if (const Json* h = optional_field(*v, "sha256")) r.rgb_sha256 = h->get<std::string>();
    }
    if (const Json* v = optional_field(j, "depth")) {
      r.depth_path = require(*v, "path").get<std::string>();
      if (const Json* h = optional_field(*v, "sha256")) r.depth_sha256 = h->get<std::string>();
    }
    if (const Json* v = optional_field(j, "camera")) r.camera = camera_from_json(*v);
    if (const Json* v = optional_field(j, "robot_state")) r.robot_state = pose_from_json(*v);
    if (const Json* v = optional_field(j, "instruction")) r.instruction = v->get<std::string>();
    if (const Json* v = optional_field(j, "objects")) {
      for (const Json& o : *v) {
        r.objects.push_back({require(o, "name").get<std::string>(), vec_from_json(require(o, "position")),
                             require(o, "yaw").get<double>()});
      }
    }
    if (const Json* v = optional_field(j, "task")) {
      r.task = std::make_pair(require(*v, "source").get<std::size_t>(), require(*v, "target").get<std::size_t>());
    }
    if (const Json* v = optional_field(j, "trajectory")) {
      r.trajectory = Trajectory(pose_from_json(require(*v, "grasp")), pose_from_json(require(*v, "release")));
    }
    if (const Json* v = optional_field(j, "image_actions")) {
      for (const Json& a : *v) {
        ImageAction act;
        act.u = require(a, "u").get<double>();
        act.v = require(a, "v").get<double>();
        act.depth = require(a, "depth").get<double>();
        act.orientation = quat_from_json(require(a, "orientation"));
        act.in_frame = act.u >= 0.0 && act.u <= 1.0 && act.v >= 0.0 && act.v <= 1.0;
        r.image_actions.push_back(act);
      }
    }
    if (const Json* v = optional_field(j, "tokens")) r.tokens = tokens_from_json(*v);
    if (const Json* v = optional_field(j, "robot_state_tokens")) r.robot_state_tokens = tokens_from_json(*v);
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::FormatError, std::string("malformed record: ") + e.what());
  }
}

std::string record_to_line(const DatasetRecord& r) { return record_to_json(r).dump(); }

std::vector<DatasetRecord> read_records(const fs::path& jsonl) {
  std::ifstream in(jsonl);
  if (!in) throw Error(ErrorKind::IoError, "cannot open " + jsonl.string());
  std::vector<DatasetRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(record_from_json(Json::parse(line)));
    } catch (const nlohmann::json::parse_error& e) {
      throw Error(ErrorKind::FormatError, jsonl.string() + ":" + std::to_string(line_no) + ": " + e.what(), line_no);
    } catch (const Error& e) {
      throw Error(e.kind(), jsonl.string() + ":" + std::to_string(line_no) + ": " + e.what(), line_no);
    }
  }
  return out;
}

Json DatasetConfig::to_json() const {
  return {{"count", count},
          {"seed", seed},
          {"mode", std::string(keypose::to_string(mode))},
          {"scene", scene_config_to_json(scene)},
          {"write_depth", write_depth},
          {"photometric", photometric},
          {"jitter", {{"brightness", jitter.brightness}, {"contrast", jitter.contrast}}},
          {"background_p", background_p},
          {"background_dir", background_dir ? Json(background_dir->generic_string()) : Json(nullptr)},
          {"templates", templates}};
}

DatasetConfig DatasetConfig::from_json(const Json& j) {
  try {
    reject_unknown(j,
                   {"count", "seed", "mode", "scene", "write_depth", "photometric", "jitter", "background_p",
                    "background_dir", "templates", "threads"},
                   "dataset config");
    DatasetConfig c;
    read_into(j, "count", c.count);
    read_into(j, "seed", c.seed);
    if (const Json* v = optional_field(j, "mode")) c.mode = parse_scene_mode(v->get<std::string>());
    if (const Json* v = optional_field(j, "scene")) c.scene = scene_config_from_json(*v, c.scene);
    read_into(j, "write_depth", c.write_depth);
    read_into(j, "photometric", c.photometric);
    if (const Json* v = optional_field(j, "jitter")) {
      reject_unknown(*v, {"brightness", "contrast"}, "jitter");
      read_into(*v, "brightness", c.jitter.brightness);
      read_into(*v, "contrast", c.jitter.contrast);
    }
    read_into(j, "background_p", c.background_p);
    if (const Json* v = optional_field(j, "background_dir")) c.background_dir = v->get<std::string>();
    read_into(j, "templates", c.templates);
    read_into(j, "threads", c.threads);
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::InvalidArgument, std::string("bad dataset config: ") + e.what());
  }
}

std::string scene_id_for(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%06zu", index);
  return buf;
}

DatasetRecord make_record(const SceneSpec& scene, const std::string& scene_id, const DatasetConfig& cfg) {
  const SceneConfig& sc = cfg.scene;
  const Trajectory traj = compute_trajectory(scene, sc.release_clearance);
  DatasetRecord r;
  r.scene_id = scene_id;
  r.mode = std::string(to_string(scene.mode));
  r.seed = scene.seed;
  r.camera = scene.camera;
  r.robot_state = scene.robot_state;
  r.instruction = instruction_text(scene, cfg.templates, derive_seed(scene.seed, kInstructionStream));
  for (const auto& o : scene.objects) r.objects.push_back({o.asset.name(), o.position, o.yaw});
  r.task = std::make_pair(scene.source, scene.target);
  r.trajectory = traj;
  for (const Keypose& kp : traj.keyposes()) r.image_actions.push_back(project(kp.pose, scene.camera));
  r.tokens = FrameTokens{render_tokens(encode_trajectory(traj, &scene.camera, sc.image_codec)),
                         render_tokens(encode_trajectory(traj, nullptr, sc.robot_codec))};
  r.robot_state_tokens =
      FrameTokens{render_tokens(encode_robot_state(scene.robot_state, &scene.camera, sc.image_codec)),
                  render_tokens(encode_robot_state(scene.robot_state, nullptr, sc.robot_codec))};
  return r;
}

std::vector<RgbImage> load_background_pool(const fs::path& dir, int width, int height) {
  if (!fs::is_directory(dir)) throw Error(ErrorKind::IoError, "background directory not found: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    std::string ext = entry.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (ext == ".png" || ext == ".ppm") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<RgbImage> pool;
  for (const auto& f : files) {
    RgbImage img = read_image(f);
    pool.push_back(img.width == width && img.height == height ? std::move(img)
                                                              : resize_bilinear(img, width, height));
  }
  return pool;
}

GenerationResult generate_dataset(const DatasetConfig& cfg, const fs::path& out_dir, const Json& provenance) {
  cfg.scene.validate();
  if (cfg.templates.empty()) throw Error(ErrorKind::InvalidArgument, "no instruction templates");
  std::vector<RgbImage> pool;
  if (cfg.background_dir) pool = load_background_pool(*cfg.background_dir, cfg.scene.width, cfg.scene.height);
  if (cfg.background_dir && pool.empty() && cfg.background_p > 0.0) {
    throw Error(ErrorKind::EmptyPool, "no images in " + cfg.background_dir->string());
  }

  std::error_code ec;
  fs::create_directories(out_dir / "images", ec);
  if (ec) throw Error(ErrorKind::IoError, "cannot create " + (out_dir / "images").string() + ": " + ec.message());

  const Json config_json = cfg.to_json();
  std::vector<SceneOutput> outputs(cfg.count);

  const auto work = [&](std::size_t i) {
    const std::string id = scene_id_for(i);
    const std::uint64_t scene_seed = derive_seed(cfg.seed, i);
    SceneSpec scene = [&] {
      try {
        return sample_scene(cfg.scene, cfg.mode, scene_seed);
      } catch (const Error& e) {
        throw Error(e.kind(), "scene " + id + ": " + e.what(), i);
      }
    }();
    DatasetRecord r = make_record(scene, id, cfg);

    RenderOutput raster = render_stub(scene);
    RgbImage rgb = cfg.photometric
                       ? jitter_photometric(raster.rgb, cfg.jitter, derive_seed(scene_seed, kJitterStream))
                       : std::move(raster.rgb);
    if (!pool.empty()) {
      rgb = randomize_background(rgb, raster.labels, pool, cfg.background_p,
                                 derive_seed(scene_seed, kBackgroundStream))
                .image;
    }
    const std::vector<std::uint8_t> rgb_png = encode_png(rgb);
    r.rgb_path = "images/" + id + "_rgb.png";
    r.rgb_sha256 = sha256_hex(rgb_png.data(), rgb_png.size());
    write_bytes(out_dir / *r.rgb_path, rgb_png);
    if (cfg.write_depth) {
      const std::vector<std::uint8_t> depth_png = encode_depth_png(raster.depth);
      r.depth_path = "images/" + id + "_depth.png";
      r.depth_sha256 = sha256_hex(depth_png.data(), depth_png.size());
      write_bytes(out_dir / *r.depth_path, depth_png);
    }
    outputs[i].line = record_to_line(r);
  };

  unsigned threads = cfg.threads ? cfg.threads : std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(cfg.count, 1)));
  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (std::size_t i = next++; i < cfg.count; i = next++) {
      try {
        work(i);
      } catch (...) {
        outputs[i].error = std::current_exception();
      }
    }
  };
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool_threads;
    for (unsigned t = 0; t < threads; ++t) pool_threads.emplace_back(worker);
  }
  // Report the lowest failing scene so errors do not depend on scheduling.
  for (const auto& o : outputs) {
    if (o.error) std::rethrow_exception(o.error);
  }

  GenerationResult res;
  res.count = cfg.count;
  res.records_path = out_dir / "records.jsonl";
  res.manifest_path = out_dir / "manifest.json";
  std::string records;
  for (const auto& o : outputs) {
    records += o.line;
    records += '\n';
  }
  write_bytes(res.records_path, std::vector<std::uint8_t>(records.begin(), records.end()));
  res.records_sha256 = sha256_hex(records);
  const std::string config_text = config_json.dump();
  res.config_sha256 = sha256_hex(config_text);

  Json manifest{{"schema", kRecordSchema},
                {"count", cfg.count},
                {"seed", cfg.seed},
                {"config", config_json},
                {"config_sha256", res.config_sha256},
                {"records", "records.jsonl"},
                {"records_sha256", res.records_sha256}};
  if (!provenance.is_null()) manifest["provenance"] = provenance;
  const std::string manifest_text = manifest.dump(2) + "\n";
  write_bytes(res.manifest_path, std::vector<std::uint8_t>(manifest_text.begin(), manifest_text.end()));
  return res;
}

double image_position_bound(const Pose6D& pose, const CameraModel& cam, const CodecConfig& cfg) {
  const Vec3 p = cam.extrinsic().transform_point(pose.position());
  const double half_unit = UniformQuantizer{0.0, 1.0, cfg.n_loc}.half_width();
  const double dx = half_unit * cam.width();
  const double dy = half_unit * cam.height();
  const double dz = UniformQuantizer{cfg.depth_min, cfg.depth_max, cfg.n_loc}.half_width();
  const double px = cam.fx() * p.x() / p.z() + cam.cx();
  const double py = cam.fy() * p.y() / p.z() + cam.cy();
  // X' - X = (x' - x) z' / fx + (x - cx)(z' - z) / fx, likewise for Y.
  const double ex = (dx * (p.z() + dz) + std::abs(px - cam.cx()) * dz) / cam.fx();
  const double ey = (dy * (p.z() + dz) + std::abs(py - cam.cy()) * dz) / cam.fy();
  return std::sqrt(ex * ex + ey * ey + dz * dz);
}

double orientation_bound_deg() { return 3.0 * 180.0 / kAngleBins; }

ValidationReport validate_record(const DatasetRecord& r, const CodecConfig& image_codec,
                                 const CodecConfig& robot_codec) {
  ValidationReport rep;
  const auto fail = [&rep](std::string msg) {
    rep.ok = false;
    rep.issues.push_back(std::move(msg));
  };
  if (!r.trajectory || !r.camera || !r.tokens) {
    fail("record lacks trajectory, camera or tokens");
    return rep;
  }
  const Trajectory& gt = *r.trajectory;
  const CameraModel& cam = *r.camera;
  constexpr double kSlack = 1e-9;
  const double angle_bound = orientation_bound_deg() + kSlack;

  const auto check_image = [&](const Pose6D& truth, const Pose6D& decoded, const std::string& what) {
    const double err = (decoded.position() - truth.position()).norm();
    const double bound = image_position_bound(truth, cam, image_codec) + kSlack;
    if (!(err <= bound)) fail(what + ": image-frame position error " + std::to_string(err) + " > " + std::to_string(bound));
    const double ang = relative_angle_deg(truth.orientation(), decoded.orientation());
    if (!(ang <= angle_bound)) fail(what + ": image-frame angle error " + std::to_string(ang));
  };
  const auto check_robot = [&](const Pose6D& truth, const Pose6D& decoded, const std::string& what) {
    for (int axis = 0; axis < 3; ++axis) {
      const double half =
          UniformQuantizer{robot_codec.box_min[axis], robot_codec.box_max[axis], robot_codec.n_loc}.half_width();
      const double err = std::abs(decoded.position()[axis] - truth.position()[axis]);
      if (!(err <= half + kSlack)) fail(what + ": robot-frame axis " + std::to_string(axis) + " error " + std::to_string(err));
    }
    const double ang = relative_angle_deg(truth.orientation(), decoded.orientation());
    if (!(ang <= angle_bound)) fail(what + ": robot-frame angle error " + std::to_string(ang));
  };

  try {
    const TokenSequence img_tokens = parse_tokens(r.tokens->image);
    const TokenSequence rob_tokens = parse_tokens(r.tokens->robot);
    const Trajectory di = decode_trajectory(img_tokens, &cam, image_codec);
    const Trajectory dr = decode_trajectory(rob_tokens, nullptr, robot_codec);
    const char* names[2] = {"grasp", "release"};
    for (int k = 0; k < 2; ++k) {
      check_image(gt.keyposes()[k].pose, di.keyposes()[k].pose, names[k]);
      check_robot(gt.keyposes()[k].pose, dr.keyposes()[k].pose, names[k]);
    }
    if (r.image_actions.size() != 2) {
      fail("expected 2 image actions, found " + std::to_string(r.image_actions.size()));
    } else {
      for (int k = 0; k < 2; ++k) {
        if (!same_action(project(gt.keyposes()[k].pose, cam), r.image_actions[k])) {
          fail(std::string(names[k]) + ": reprojection differs from stored image action");
        }
      }
    }
    if (render_tokens(encode_trajectory(gt, &cam, image_codec)) != r.tokens->image) {
      fail("image-frame tokens do not re-encode identically");
    }
    if (render_tokens(encode_trajectory(gt, nullptr, robot_codec)) != r.tokens->robot) {
      fail("robot-frame tokens do not re-encode identically");
    }
    if (r.robot_state && r.robot_state_tokens) {
      const Pose6D& s = *r.robot_state;
      check_image(s, decode_robot_state(parse_tokens(r.robot_state_tokens->image), &cam, image_codec), "robot state");
      check_robot(s, decode_robot_state(parse_tokens(r.robot_state_tokens->robot), nullptr, robot_codec), "robot state");
      if (render_tokens(encode_robot_state(s, &cam, image_codec)) != r.robot_state_tokens->image ||
          render_tokens(encode_robot_state(s, nullptr, robot_codec)) != r.robot_state_tokens->robot) {
        fail("robot state tokens do not re-encode identically");
      }
    }
  } catch (const Error& e) {
    fail(std::string(to_string(e.kind())) + ": " + e.what());
  }
  return rep;
}

}  // namespace keypose
