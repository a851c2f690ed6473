#pragma once

#include "keypose/codec.hpp"
#include "keypose/dataset.hpp"
#include "keypose/scene.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace keypose {

/// Task identity. CLEVR instructions give a structured key; anything else
/// falls back to the exact instruction text.
struct TaskKey {
  std::optional<AssetSpec> source;
  std::optional<AssetSpec> target;
  std::string relation;
  std::string text;  // set only for the fallback form

  bool structured() const { return source.has_value(); }
  std::string to_string() const;
  auto operator<=>(const TaskKey&) const = default;
};

/// nullopt for an empty instruction.
std::optional<TaskKey> task_key_for(std::string_view instruction,
                                    const std::vector<std::string>& templates);

struct TaskIndex {
  std::map<TaskKey, std::vector<std::string>> buckets;  // scene ids in record order
  std::vector<std::string> unparseable;                 // scene ids that were skipped

  std::size_t pair_count() const;
};

TaskIndex build_task_index(std::span<const DatasetRecord> records,
                           const std::vector<std::string>& templates = default_instruction_templates());

struct PairIds {
  std::string demo;
  std::string query;
  auto operator<=>(const PairIds&) const = default;
};

/// k ordered same-task pairs drawn uniformly without replacement. Throws
/// InsufficientPairs when k exceeds the number of such pairs.
std::vector<PairIds> sample_pairs(const TaskIndex& index, std::size_t k, std::uint64_t seed);

struct PairSample {
  DatasetRecord demo;
  DatasetRecord query;
};

/// Resolves ids against `records`; throws MissingField for unknown ids.
std::vector<PairSample> materialize_pairs(std::span<const PairIds> pairs,
                                          std::span<const DatasetRecord> records);

struct Prompt {
  std::string text;
  TokenSequence target;
  std::string target_text;
};

/// Lines: <demo_img:PATH>, demo state, demo trajectory, <live_img:PATH>, live
/// state. Tokens come from the records in the requested frame. Throws
/// InvalidPair when demo and query are the same scene, MissingField when a
/// record lacks an image path or tokens.
Prompt assemble_imitation_prompt(const PairSample& pair, Frame frame = Frame::Image);

/// Lines: <live_img:PATH>, state, instruction.
Prompt assemble_language_prompt(const DatasetRecord& record, Frame frame = Frame::Image);

struct ParsedImitationPrompt {
  std::string demo_image;
  TokenSequence demo_state;
  TokenSequence demo_trajectory;
  std::string live_image;
  TokenSequence live_state;
};

struct ParsedLanguagePrompt {
  std::string live_image;
  TokenSequence live_state;
  std::string instruction;
};

/// Throw FormatError (position = line index) on layout violations.
ParsedImitationPrompt parse_imitation_prompt(std::string_view text);
ParsedLanguagePrompt parse_language_prompt(std::string_view text);

Json prompt_to_json(const Prompt& p, const std::string& kind, const std::string& query_id,
                    const std::optional<std::string>& demo_id);

}  // namespace keypose
