#include "commands.hpp"

#include "keypose/codec.hpp"
#include "keypose/crop.hpp"
#include "keypose/dataset.hpp"
#include "keypose/decoder.hpp"
#include "keypose/error.hpp"
#include "keypose/image.hpp"
#include "keypose/imitation.hpp"
#include "keypose/logit_dump.hpp"
#include "keypose/metrics.hpp"
#include "keypose/random.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>
#include <sstream>

namespace keypose::cli {

namespace fs = std::filesystem;

namespace {

constexpr const char* kToolVersion = "0.1.0";

Json provenance(const std::string& command, const Json& config) {
  return {{"tool", "keypose"},
          {"version", kToolVersion},
          {"command", command},
          {"config", config},
          {"config_sha256", sha256_hex(config.dump())}};
}

void write_text(const std::string& path, const std::string& text) {
  if (path == "-") {
    std::cout << text << std::flush;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::IoError, "cannot write " + path);
  out << text;
  if (!out) throw Error(ErrorKind::IoError, "write failed for " + path);
}

// Full config next to a file output; on stdout it goes to stderr instead.
void write_provenance(const std::string& out, const Json& prov) {
  if (out == "-") {
    std::cerr << prov.dump() << "\n";
  } else {
    write_text(out + ".provenance.json", prov.dump(2) + "\n");
  }
}

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream file;
  std::istream* in = &std::cin;
  if (path != "-") {
    file.open(path);
    if (!file) throw Error(ErrorKind::IoError, "cannot open " + path);
    in = &file;
  }
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(*in, line)) lines.push_back(line);
  return lines;
}

/// Non-blank lines parsed as JSON; `fn(json, line_number)`.
template <class Fn>
void for_each_json_line(const std::string& path, Fn&& fn) {
  const auto lines = read_lines(path);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (lines[i].find_first_not_of(" \t\r") == std::string::npos) continue;
    Json j;
    try {
      j = Json::parse(lines[i]);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::FormatError, path + ":" + std::to_string(i + 1) + ": " + e.what(), i + 1);
    }
    try {
      fn(j, i + 1);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::FormatError, path + ":" + std::to_string(i + 1) + ": " + e.what(), i + 1);
    } catch (const Error& e) {
      throw Error(e.kind(), path + ":" + std::to_string(i + 1) + ": " + e.what(), i + 1);
    }
  }
}

CodecConfig make_codec(const CodecOptions& o) {
  CodecConfig c;
  c.frame = parse_frame(o.frame);
  c.n_loc = o.n_loc;
  c.depth_mode = parse_depth_mode(o.depth_mode);
  c.depth_min = o.depth_min;
  c.depth_max = o.depth_max;
  c.validate();
  return c;
}

Json trajectory_to_json(const Trajectory& t) {
  return {{"grasp", pose_to_json(t.grasp().pose)}, {"release", pose_to_json(t.release().pose)}};
}

Trajectory trajectory_from_json(const Json& j) {
  if (!j.contains("grasp") || !j.contains("release")) {
    throw Error(ErrorKind::MissingField, "trajectory needs 'grasp' and 'release'");
  }
  return {pose_from_json(j.at("grasp")), pose_from_json(j.at("release"))};
}

const Json& field(const Json& j, const char* key) {
  const auto it = j.find(key);
  if (it == j.end() || it->is_null()) throw Error(ErrorKind::MissingField, std::string("missing field '") + key + "'");
  return *it;
}

std::optional<std::string> line_id(const Json& j) {
  for (const char* key : {"episode_id", "scene_id", "id"}) {
    const auto it = j.find(key);
    if (it != j.end() && it->is_string()) return it->get<std::string>();
  }
  return std::nullopt;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

Json to_json(const CodecOptions& o) {
  return {{"frame", o.frame}, {"n_loc", o.n_loc}, {"depth_mode", o.depth_mode},
          {"depth_min", o.depth_min}, {"depth_max", o.depth_max}};
}

Json to_json(const GenDatasetOptions& o) {
  Json codec = to_json(o.codec);
  codec.erase("frame");
  return {{"count", o.count}, {"seed", o.seed}, {"mode", o.mode}, {"width", o.width}, {"height", o.height},
          {"no_depth", o.no_depth}, {"no_photometric", o.no_photometric}, {"background_dir", o.background_dir},
          {"background_p", o.background_p}, {"validate", o.validate}, {"codec", codec}};
}

Json to_json(const EncodeOptions& o) {
  return {{"in", o.in}, {"decode", o.decode}, {"codec", to_json(o.codec)}};
}

Json to_json(const DecodeLogitsOptions& o) {
  return {{"dump", o.dump}, {"strategy", o.strategy}, {"n", o.n}, {"window_loc", o.window_loc},
          {"window_seg", o.window_seg}, {"temperature", o.temperature}, {"seed", o.seed},
          {"camera", o.camera}, {"episode_id", o.episode_id}, {"codec", to_json(o.codec)}};
}

Json to_json(const EvalOptions& o) {
  return {{"predictions", o.predictions}, {"ground_truth", o.ground_truth},
          {"map_degrees_per_cm", o.map_degrees_per_cm}, {"l1_degrees_per_cm", o.l1_degrees_per_cm},
          {"thresholds", o.thresholds}, {"allow_missing", o.allow_missing}};
}

Json to_json(const CropOptions& o) {
  return {{"image", o.image}, {"center", o.center}, {"size", o.size}, {"padded", !o.valid},
          {"start", o.start}, {"end", o.end}, {"records", o.records}, {"scene_id", o.scene_id},
          {"points", o.points}};
}

Json to_json(const PairSampleOptions& o) {
  return {{"records", o.records}, {"k", o.k}, {"seed", o.seed}, {"kind", o.kind}, {"frame", o.frame}};
}

void cmd_gen_dataset(const GenDatasetOptions& o) {
  DatasetConfig cfg;
  cfg.count = o.count;
  cfg.seed = o.seed;
  cfg.mode = parse_scene_mode(o.mode);
  cfg.scene.width = o.width;
  cfg.scene.height = o.height;
  CodecOptions image_opts = o.codec;
  image_opts.frame = "image";
  cfg.scene.image_codec = make_codec(image_opts);
  cfg.scene.robot_codec.n_loc = o.codec.n_loc;
  cfg.write_depth = !o.no_depth;
  cfg.photometric = !o.no_photometric;
  cfg.background_p = o.background_p;
  if (!o.background_dir.empty()) cfg.background_dir = o.background_dir;
  cfg.threads = o.threads;
  cfg.scene.validate();

  const Json prov = provenance("gen-dataset", to_json(o));
  const GenerationResult res = generate_dataset(cfg, o.out, prov);

  Json summary{{"records", res.count},
               {"records_sha256", res.records_sha256},
               {"config_sha256", res.config_sha256},
               {"manifest", res.manifest_path.string()}};
  if (o.validate) {
    std::size_t bad = 0;
    std::string first;
    for (const DatasetRecord& r : read_records(res.records_path)) {
      const ValidationReport rep = validate_record(r, cfg.scene.image_codec, cfg.scene.robot_codec);
      if (!rep.ok) {
        if (bad++ == 0) first = r.scene_id + ": " + rep.issues.front();
      }
    }
    summary["invalid_records"] = bad;
    if (bad > 0) {
      throw Error(ErrorKind::FormatError, std::to_string(bad) + " records failed validation, first " + first);
    }
  }
  std::cout << summary.dump() << "\n";
}

void cmd_encode(const EncodeOptions& o) {
  const CodecConfig codec = make_codec(o.codec);
  const Json prov = provenance("encode", to_json(o));
  const std::string hash = prov["config_sha256"];
  std::string out;
  for_each_json_line(o.in, [&](const Json& j, std::size_t line) {
    std::optional<CameraModel> cam;
    if (j.contains("camera") && !j["camera"].is_null()) cam = camera_from_json(j["camera"]);
    if (codec.frame == Frame::Image && !cam) {
      throw Error(ErrorKind::MissingField, "image frame needs a 'camera'");
    }
    const CameraModel* cam_ptr = cam ? &*cam : nullptr;
    Json res{{"line", line}, {"frame", std::string(to_string(codec.frame))}, {"config_sha256", hash}};
    if (auto id = line_id(j)) res["id"] = *id;
    if (o.decode) {
      const Json& t = field(j, "tokens");
      const std::string text = t.is_object() ? field(t, std::string(to_string(codec.frame)).c_str()).get<std::string>()
                                             : t.get<std::string>();
      res["trajectory"] = trajectory_to_json(decode_trajectory(parse_tokens(text), cam_ptr, codec));
    } else {
      const Trajectory traj = trajectory_from_json(field(j, "trajectory"));
      res["tokens"] = render_tokens(encode_trajectory(traj, cam_ptr, codec));
      if (j.contains("robot_state") && !j["robot_state"].is_null()) {
        res["robot_state_tokens"] =
            render_tokens(encode_robot_state(pose_from_json(j["robot_state"]), cam_ptr, codec));
      }
    }
    out += res.dump() + "\n";
  });
  write_text(o.out, out);
  write_provenance(o.out, prov);
}

void cmd_decode_logits(const DecodeLogitsOptions& o) {
  const CodecConfig codec = make_codec(o.codec);
  const Grammar grammar = trajectory_grammar(codec);
  const LogitDump dump = read_logit_dump(o.dump);
  const ReplayScorer scorer(dump);
  scorer.require_steps(grammar);

  std::optional<CameraModel> cam;
  if (!o.camera.empty()) {
    std::ifstream in(o.camera);
    if (!in) throw Error(ErrorKind::IoError, "cannot open " + o.camera);
    Json j;
    try {
      j = Json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::FormatError, o.camera + ": " + e.what());
    }
    cam = camera_from_json(j.contains("camera") ? j["camera"] : j);
  }

  std::vector<Beam> beams;
  if (o.n < 1) throw Error(ErrorKind::InvalidArgument, "--n must be >= 1");
  if (o.strategy == "greedy") {
    beams.push_back(decode_greedy(scorer, grammar));
  } else if (o.strategy == "sample") {
    beams = decode_sampling(scorer, grammar, o.temperature, o.seed, o.n);
  } else if (o.strategy == "beam") {
    beams = decode_beam(scorer, grammar, o.n);
  } else if (o.strategy == "beam-nms") {
    beams = decode_beam_nms(scorer, grammar, o.n, o.window_loc, o.window_seg);
  } else {
    throw Error(ErrorKind::InvalidArgument, "unknown strategy '" + o.strategy + "'");
  }

  const Json prov = provenance("decode-logits", to_json(o));
  const std::string hash = prov["config_sha256"];
  std::string out;
  for (std::size_t i = 0; i < beams.size(); ++i) {
    Json res{{"beam", i},
             {"tokens", render_tokens(beams[i].tokens)},
             {"log_prob", beams[i].log_prob},
             {"confidence", beams[i].log_prob},
             {"config_sha256", hash}};
    if (!o.episode_id.empty()) res["episode_id"] = o.episode_id;
    if (codec.frame == Frame::Robot || cam) {
      res["trajectory"] = trajectory_to_json(decode_trajectory(beams[i].tokens, cam ? &*cam : nullptr, codec));
    } else {
      res["trajectory"] = nullptr;
    }
    out += res.dump() + "\n";
  }
  write_text(o.out, out);
  write_provenance(o.out, prov);
}

void cmd_eval(const EvalOptions& o) {
  if (!(o.map_degrees_per_cm > 0.0) || !(o.l1_degrees_per_cm > 0.0)) {
    throw Error(ErrorKind::InvalidArgument, "unit exchange rates must be positive");
  }
  if (o.thresholds.empty()) throw Error(ErrorKind::InvalidArgument, "need at least one threshold");

  std::vector<EpisodeRecord> episodes;
  std::map<std::string, std::size_t> by_id;
  for_each_json_line(o.ground_truth, [&](const Json& j, std::size_t) {
    const auto id = line_id(j);
    if (!id) throw Error(ErrorKind::MissingField, "ground truth line needs 'episode_id' or 'scene_id'");
    if (by_id.count(*id)) throw Error(ErrorKind::FormatError, "duplicate episode id " + *id);
    by_id[*id] = episodes.size();
    episodes.push_back({*id, trajectory_from_json(field(j, "trajectory")), {}});
  });

  std::vector<std::string> unmatched;
  for_each_json_line(o.predictions, [&](const Json& j, std::size_t) {
    const auto id = line_id(j);
    if (!id) throw Error(ErrorKind::MissingField, "prediction line needs 'episode_id'");
    const Json& conf = j.contains("confidence") ? field(j, "confidence") : field(j, "log_prob");
    const double c = conf.get<double>();
    if (!std::isfinite(c)) throw Error(ErrorKind::FormatError, "non-finite confidence");
    const auto it = by_id.find(*id);
    if (it == by_id.end()) {
      unmatched.push_back(*id);
      return;
    }
    episodes[it->second].predictions.push_back({trajectory_from_json(field(j, "trajectory")), c});
  });
  if (!o.allow_missing) {
    for (const auto& e : episodes) {
      if (e.predictions.empty()) unmatched.push_back(e.episode_id);
    }
  }
  if (!unmatched.empty()) {
    std::string ids;
    for (const auto& id : unmatched) ids += (ids.empty() ? "" : ", ") + id;
    throw Error(ErrorKind::UnmatchedEpisode, "unmatched episode ids: " + ids);
  }
  if (episodes.empty()) throw Error(ErrorKind::FormatError, "no ground-truth episodes");

  const MapResult m = compute_map(episodes, UnitExchange{o.map_degrees_per_cm}, o.thresholds);
  const UnitExchange l1_units{o.l1_degrees_per_cm};
  const L1Summary l1 = summarize_l1(episodes, l1_units);

  Json per = Json::array();
  std::string csv = "threshold_cm,recall,precision,confidence_cut\n";
  for (const APResult& r : m.per_threshold) {
    Json pts = Json::array();
    for (const PRPoint& p : r.curve.points) {
      pts.push_back({{"recall", p.recall}, {"precision", p.precision}, {"confidence_cut", p.confidence_cut}});
      csv += fmt(r.curve.threshold_cm) + "," + fmt(p.recall) + "," + fmt(p.precision) + "," +
             fmt(p.confidence_cut) + "\n";
    }
    per.push_back({{"threshold_cm", r.curve.threshold_cm}, {"ap", r.ap}, {"pr_points", pts}});
  }

  std::vector<double> confidences, errors;
  for (const auto& e : episodes) {
    for (const auto& p : e.predictions) {
      confidences.push_back(p.confidence);
      errors.push_back(traj_l1(p.trajectory, e.ground_truth, l1_units));
    }
  }
  Json report{{"per_threshold", per},
              {"map", m.map},
              {"l1", {{"mean_top1", l1.mean_top1},
                      {"mean_best_of_k", l1.mean_best_of_k},
                      {"episodes", l1.episodes},
                      {"degrees_per_cm", o.l1_degrees_per_cm}}},
              {"map_degrees_per_cm", o.map_degrees_per_cm},
              {"episodes", episodes.size()},
              {"predictions", confidences.size()}};
  try {
    report["spearman"] = spearman(confidences, errors);
  } catch (const Error& e) {
    report["spearman"] = nullptr;
    report["spearman_note"] = e.what();
  }
  report["provenance"] = provenance("eval", to_json(o));
  write_text(o.out, report.dump(2) + "\n");
  if (!o.csv.empty()) write_text(o.csv, csv);
}

void cmd_crop(const CropOptions& o) {
  const RgbImage img = read_image(o.image);
  const CropCenter mode = parse_crop_center(o.center);
  double size = 0.0;
  if (o.size == "full") {
    size = std::max(img.width, img.height);
  } else {
    try {
      std::size_t used = 0;
      size = std::stod(o.size, &used);
      if (used != o.size.size()) throw std::invalid_argument(o.size);
    } catch (const std::exception&) {
      throw Error(ErrorKind::InvalidArgument, "--size must be a number or 'full'");
    }
  }
  Vec2 start(0.5 * img.width, 0.5 * img.height);
  Vec2 end = start;
  bool have_points = false;
  if (!o.records.empty()) {
    if (o.scene_id.empty()) throw Error(ErrorKind::InvalidArgument, "--records needs --scene-id");
    bool found = false;
    for (const DatasetRecord& r : read_records(o.records)) {
      if (r.scene_id != o.scene_id) continue;
      if (r.image_actions.size() != 2 || !r.camera) {
        throw Error(ErrorKind::MissingField, "record " + r.scene_id + " lacks image actions or camera");
      }
      const double w = r.camera->width(), h = r.camera->height();
      start = Vec2(r.image_actions[0].u * w, r.image_actions[0].v * h);
      end = Vec2(r.image_actions[1].u * w, r.image_actions[1].v * h);
      found = true;
      break;
    }
    if (!found) throw Error(ErrorKind::MissingField, "no record with scene id " + o.scene_id);
    have_points = true;
  }
  if (!o.start.empty()) {
    start = Vec2(o.start.at(0), o.start.at(1));
    have_points = true;
  }
  if (!o.end.empty()) end = Vec2(o.end.at(0), o.end.at(1));
  if (mode != CropCenter::ImageCenter && !have_points) {
    throw Error(ErrorKind::InvalidArgument, "center mode " + o.center + " needs --start or --records");
  }
  if (mode == CropCenter::Midpoint && o.end.empty() && o.records.empty()) {
    throw Error(ErrorKind::InvalidArgument, "midpoint needs --end or --records");
  }
  if (o.points.size() % 2 != 0) throw Error(ErrorKind::InvalidArgument, "--point takes x y pairs");

  const Vec2 center = crop_center(mode, img.width, img.height, start, end);
  const CropResult res = crop_transform(img, center, size, !o.valid);
  const std::vector<std::uint8_t> png = encode_png(res.image);
  write_bytes(o.out, png);

  Json pts = Json::array();
  for (std::size_t i = 0; i + 1 < o.points.size(); i += 2) {
    const Vec2 p(o.points[i], o.points[i + 1]);
    const Vec2 c = res.map.to_crop(p);
    const Vec2 n = res.map.to_normalized(p);
    pts.push_back({{"original", {p.x(), p.y()}}, {"crop", {c.x(), c.y()}}, {"normalized", {n.x(), n.y()}}});
  }
  Json side{{"map", {{"offset", {res.map.offset.x(), res.map.offset.y()}},
                     {"scale", {res.map.scale.x(), res.map.scale.y()}},
                     {"out_size", res.map.out_size}}},
            {"window", {res.x0, res.y0, res.x1, res.y1}},
            {"center", {center.x(), center.y()}},
            {"crop_size", size},
            {"points", pts},
            {"output_sha256", sha256_hex(png.data(), png.size())},
            {"provenance", provenance("crop", to_json(o))}};
  write_text(o.out + ".json", side.dump(2) + "\n");
}

void cmd_pair_sample(const PairSampleOptions& o) {
  const Frame frame = parse_frame(o.frame);
  const std::vector<DatasetRecord> records = read_records(o.records);
  const Json prov = provenance("pair-sample", to_json(o));
  const std::string hash = prov["config_sha256"];

  std::vector<std::pair<Prompt, Json>> prompts;
  Json summary;
  if (o.kind == "imitation") {
    const TaskIndex index = build_task_index(records);
    const auto ids = sample_pairs(index, o.k, o.seed);
    for (const PairSample& s : materialize_pairs(ids, records)) {
      Prompt p = assemble_imitation_prompt(s, frame);
      Json j = prompt_to_json(p, "imitation", s.query.scene_id, s.demo.scene_id);
      prompts.emplace_back(std::move(p), std::move(j));
    }
    summary = {{"samples", prompts.size()},
               {"tasks", index.buckets.size()},
               {"total_pairs", index.pair_count()},
               {"unparseable", index.unparseable.size()}};
  } else if (o.kind == "language") {
    if (o.k > records.size()) {
      throw Error(ErrorKind::InsufficientPairs,
                  "requested " + std::to_string(o.k) + " samples from " + std::to_string(records.size()) + " records");
    }
    std::vector<std::size_t> order(records.size());
    std::iota(order.begin(), order.end(), 0);
    Rng rng(o.seed);
    for (std::size_t i = 0; i < o.k; ++i) std::swap(order[i], order[i + uniform_index(rng, order.size() - i)]);
    for (std::size_t i = 0; i < o.k; ++i) {
      const DatasetRecord& r = records[order[i]];
      Prompt p = assemble_language_prompt(r, frame);
      Json j = prompt_to_json(p, "language", r.scene_id, std::nullopt);
      prompts.emplace_back(std::move(p), std::move(j));
    }
    summary = {{"samples", prompts.size()}, {"records", records.size()}};
  } else {
    throw Error(ErrorKind::InvalidArgument, "unknown prompt kind '" + o.kind + "'");
  }

  if (!o.out_dir.empty()) {
    std::error_code ec;
    fs::create_directories(o.out_dir, ec);
    if (ec) throw Error(ErrorKind::IoError, "cannot create " + o.out_dir + ": " + ec.message());
    for (std::size_t i = 0; i < prompts.size(); ++i) {
      char name[32];
      std::snprintf(name, sizeof name, "sample_%06zu.txt", i);
      write_text((fs::path(o.out_dir) / name).string(), prompts[i].first.text);
    }
    write_text((fs::path(o.out_dir) / "provenance.json").string(), prov.dump(2) + "\n");
  }
  if (!o.jsonl.empty()) {
    std::string out;
    for (auto& [p, j] : prompts) {
      j["config_sha256"] = hash;
      out += j.dump() + "\n";
    }
    write_text(o.jsonl, out);
    write_provenance(o.jsonl, prov);
  }
  summary["config_sha256"] = hash;
  (o.jsonl == "-" ? std::cerr : std::cout) << summary.dump() << "\n";
}

}  // namespace keypose::cli
