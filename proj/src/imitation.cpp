#include "keypose/imitation.hpp"

#include "keypose/error.hpp"
#include "keypose/random.hpp"

#include <algorithm>
#include <unordered_map>

namespace keypose {

namespace {

constexpr std::string_view kDemoImg = "<demo_img:";
constexpr std::string_view kLiveImg = "<live_img:";

const std::string& image_path(const DatasetRecord& r) {
  if (!r.rgb_path || r.rgb_path->empty()) {
    throw Error(ErrorKind::MissingField, "record " + r.scene_id + " has no image path");
  }
  if (r.rgb_path->find_first_of(">\n") != std::string::npos) {
    throw Error(ErrorKind::FormatError, "image path of " + r.scene_id + " contains '>' or a newline");
  }
  return *r.rgb_path;
}

const std::string& frame_tokens(const std::optional<FrameTokens>& t, Frame frame, const DatasetRecord& r,
                                const char* what) {
  if (!t) throw Error(ErrorKind::MissingField, "record " + r.scene_id + " has no " + what);
  const std::string& s = frame == Frame::Image ? t->image : t->robot;
  if (s.empty()) throw Error(ErrorKind::MissingField, "record " + r.scene_id + " has empty " + what);
  return s;
}

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  while (!text.empty()) {
    const std::size_t nl = text.find('\n');
    lines.push_back(text.substr(0, nl));
    if (nl == std::string_view::npos) break;
    text.remove_prefix(nl + 1);
  }
  return lines;
}

std::string parse_sentinel(std::string_view line, std::string_view prefix, std::size_t line_no) {
  if (line.size() < prefix.size() + 1 || line.substr(0, prefix.size()) != prefix || line.back() != '>') {
    throw Error(ErrorKind::FormatError,
                "line " + std::to_string(line_no) + ": expected " + std::string(prefix) + "PATH>", line_no);
  }
  return std::string(line.substr(prefix.size(), line.size() - prefix.size() - 1));
}

TokenSequence parse_token_line(std::string_view line, std::size_t expected, std::size_t line_no) {
  TokenSequence t;
  try {
    t = parse_tokens(line);
  } catch (const Error& e) {
    throw Error(ErrorKind::FormatError, "line " + std::to_string(line_no) + ": " + e.what(), line_no);
  }
  if (t.size() != expected) {
    throw Error(ErrorKind::FormatError,
                "line " + std::to_string(line_no) + ": expected " + std::to_string(expected) + " tokens, found " +
                    std::to_string(t.size()),
                line_no);
  }
  return t;
}

}  // namespace

std::string TaskKey::to_string() const {
  if (!structured()) return "text:" + text;
  return source->name() + " " + relation + " " + target->name();
}

std::optional<TaskKey> task_key_for(std::string_view instruction, const std::vector<std::string>& templates) {
  if (instruction.find_first_not_of(" \t\r\n") == std::string_view::npos) return std::nullopt;
  if (const auto parsed = parse_instruction(instruction, templates)) {
    const auto src = parse_asset_name(parsed->source);
    const auto dst = parse_asset_name(parsed->target);
    if (src && dst) return TaskKey{src, dst, parsed->relation, ""};
  }
  return TaskKey{std::nullopt, std::nullopt, "", std::string(instruction)};
}

std::size_t TaskIndex::pair_count() const {
  std::size_t n = 0;
  for (const auto& [key, ids] : buckets) n += ids.size() * (ids.size() - 1);
  return n;
}

TaskIndex build_task_index(std::span<const DatasetRecord> records, const std::vector<std::string>& templates) {
  TaskIndex index;
  std::unordered_map<std::string, bool> seen;
  for (const DatasetRecord& r : records) {
    if (!seen.emplace(r.scene_id, true).second) {
      throw Error(ErrorKind::InvalidArgument, "duplicate scene id " + r.scene_id);
    }
    if (auto key = task_key_for(r.instruction, templates)) {
      index.buckets[*key].push_back(r.scene_id);
    } else {
      index.unparseable.push_back(r.scene_id);
    }
  }
  return index;
}

std::vector<PairIds> sample_pairs(const TaskIndex& index, std::size_t k, std::uint64_t seed) {
  const std::size_t total = index.pair_count();
  if (k > total) {
    throw Error(ErrorKind::InsufficientPairs,
                "requested " + std::to_string(k) + " pairs but only " + std::to_string(total) + " exist");
  }
  // Flat numbering of all ordered pairs, bucket by bucket.
  std::vector<std::pair<std::size_t, const std::vector<std::string>*>> offsets;
  std::size_t acc = 0;
  for (const auto& [key, ids] : index.buckets) {
    if (ids.size() < 2) continue;
    offsets.emplace_back(acc, &ids);
    acc += ids.size() * (ids.size() - 1);
  }
  const auto pair_at = [&](std::size_t flat) {
    const auto it = std::prev(std::upper_bound(offsets.begin(), offsets.end(), flat,
                                               [](std::size_t f, const auto& o) { return f < o.first; }));
    const auto& ids = *it->second;
    const std::size_t r = flat - it->first;
    const std::size_t m = ids.size();
    const std::size_t demo = r / (m - 1);
    std::size_t query = r % (m - 1);
    if (query >= demo) ++query;
    return PairIds{ids[demo], ids[query]};
  };

  // Partial Fisher-Yates over the virtual array [0, total).
  Rng rng(seed);
  std::unordered_map<std::size_t, std::size_t> swapped;
  const auto value = [&](std::size_t i) {
    const auto it = swapped.find(i);
    return it == swapped.end() ? i : it->second;
  };
  std::vector<PairIds> out;
  out.reserve(k);
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + uniform_index(rng, total - i);
    const std::size_t vi = value(i);
    const std::size_t vj = value(j);
    swapped[j] = vi;
    swapped[i] = vj;
    out.push_back(pair_at(vj));
  }
  return out;
}

std::vector<PairSample> materialize_pairs(std::span<const PairIds> pairs, std::span<const DatasetRecord> records) {
  std::unordered_map<std::string, const DatasetRecord*> by_id;
  for (const auto& r : records) by_id.emplace(r.scene_id, &r);
  const auto find = [&](const std::string& id) -> const DatasetRecord& {
    const auto it = by_id.find(id);
    if (it == by_id.end()) throw Error(ErrorKind::MissingField, "no record with scene id " + id);
    return *it->second;
  };
  std::vector<PairSample> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) out.push_back({find(p.demo), find(p.query)});
  return out;
}

Prompt assemble_imitation_prompt(const PairSample& pair, Frame frame) {
  if (pair.demo.scene_id == pair.query.scene_id) {
    throw Error(ErrorKind::InvalidPair, "scene " + pair.demo.scene_id + " cannot be both demo and query");
  }
  const std::string& demo_traj = frame_tokens(pair.demo.tokens, frame, pair.demo, "trajectory tokens");
  const std::string& query_traj = frame_tokens(pair.query.tokens, frame, pair.query, "trajectory tokens");
  Prompt p;
  p.text = std::string(kDemoImg) + image_path(pair.demo) + ">\n" +
           frame_tokens(pair.demo.robot_state_tokens, frame, pair.demo, "robot state tokens") + "\n" + demo_traj +
           "\n" + std::string(kLiveImg) + image_path(pair.query) + ">\n" +
           frame_tokens(pair.query.robot_state_tokens, frame, pair.query, "robot state tokens") + "\n";
  p.target = parse_tokens(query_traj);
  p.target_text = render_tokens(p.target);
  return p;
}

Prompt assemble_language_prompt(const DatasetRecord& record, Frame frame) {
  if (record.instruction.find_first_not_of(" \t\r\n") == std::string::npos) {
    throw Error(ErrorKind::MissingField, "record " + record.scene_id + " has no instruction");
  }
  if (record.instruction.find('\n') != std::string::npos) {
    throw Error(ErrorKind::FormatError, "instruction of " + record.scene_id + " spans several lines");
  }
  Prompt p;
  p.text = std::string(kLiveImg) + image_path(record) + ">\n" +
           frame_tokens(record.robot_state_tokens, frame, record, "robot state tokens") + "\n" +
           record.instruction + "\n";
  p.target = parse_tokens(frame_tokens(record.tokens, frame, record, "trajectory tokens"));
  p.target_text = render_tokens(p.target);
  return p;
}

ParsedImitationPrompt parse_imitation_prompt(std::string_view text) {
  const auto lines = split_lines(text);
  if (lines.size() != 5) {
    throw Error(ErrorKind::FormatError, "imitation prompt needs 5 lines, found " + std::to_string(lines.size()));
  }
  ParsedImitationPrompt p;
  p.demo_image = parse_sentinel(lines[0], kDemoImg, 0);
  p.demo_state = parse_token_line(lines[1], kTokensPerKeypose, 1);
  p.demo_trajectory = parse_token_line(lines[2], kTokensPerTrajectory, 2);
  p.live_image = parse_sentinel(lines[3], kLiveImg, 3);
  p.live_state = parse_token_line(lines[4], kTokensPerKeypose, 4);
  return p;
}

ParsedLanguagePrompt parse_language_prompt(std::string_view text) {
  const auto lines = split_lines(text);
  if (lines.size() != 3) {
    throw Error(ErrorKind::FormatError, "language prompt needs 3 lines, found " + std::to_string(lines.size()));
  }
  ParsedLanguagePrompt p;
  p.live_image = parse_sentinel(lines[0], kLiveImg, 0);
  p.live_state = parse_token_line(lines[1], kTokensPerKeypose, 1);
  p.instruction = std::string(lines[2]);
  return p;
}

Json prompt_to_json(const Prompt& p, const std::string& kind, const std::string& query_id,
                    const std::optional<std::string>& demo_id) {
  Json j{{"kind", kind}, {"query_id", query_id}, {"prompt", p.text}, {"target", p.target_text}};
  j["demo_id"] = demo_id ? Json(*demo_id) : Json(nullptr);
  return j;
}

}  // namespace keypose
