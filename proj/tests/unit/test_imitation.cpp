#include "keypose/error.hpp"
#include "keypose/imitation.hpp"
#include "keypose/random.hpp"

#include <gtest/gtest.h>

#include <set>

using namespace keypose;

namespace {

const std::string kFigDemoTraj =
    "<loc0243><loc0423><loc0751> <seg063><seg079><seg112> <loc0403><loc0241><loc0732> <seg063><seg079><seg112>";

std::string random_tokens(Rng& rng, std::size_t n) {
  const Grammar g = trajectory_grammar(CodecConfig{});
  TokenSequence t;
  for (std::size_t i = 0; i < n; ++i) {
    const TokenBand& b = g[i % g.size()];
    t.push_back(b.first + static_cast<TokenId>(uniform_index(rng, static_cast<std::uint64_t>(b.count))));
  }
  return render_tokens(t);
}

DatasetRecord make(const std::string& id, const std::string& instruction, Rng& rng) {
  DatasetRecord r;
  r.scene_id = id;
  r.rgb_path = "images/" + id + "_rgb.png";
  r.instruction = instruction;
  r.tokens = FrameTokens{random_tokens(rng, 12), random_tokens(rng, 12)};
  r.robot_state_tokens = FrameTokens{random_tokens(rng, 6), random_tokens(rng, 6)};
  return r;
}

std::string instr(const std::string& src, const std::string& dst) { return "move " + src + " onto " + dst; }

}  // namespace

TEST(TaskKeys, StructuredAndFallback) {
  const auto& t = default_instruction_templates();
  const auto a = task_key_for("move large yellow sphere onto large yellow cube", t);
  const auto b = task_key_for("put the large yellow sphere on the large yellow cube", t);
  ASSERT_TRUE(a && b);
  EXPECT_TRUE(a->structured());
  // Different phrasings of one task share a key.
  EXPECT_EQ(*a, *b);
  EXPECT_EQ(a->to_string(), "large yellow sphere onto large yellow cube");
  const auto c = task_key_for("fold the towel", t);
  ASSERT_TRUE(c);
  EXPECT_FALSE(c->structured());
  EXPECT_EQ(c->to_string(), "text:fold the towel");
  EXPECT_FALSE(task_key_for("  ", t).has_value());
}

TEST(TaskIndexTest, BucketsAndCounting) {
  Rng rng(81);
  std::vector<DatasetRecord> recs{make("a", instr("small red cube", "large blue sphere"), rng),
                                  make("b", instr("small red cube", "large blue sphere"), rng),
                                  make("c", instr("small red cube", "large gray sphere"), rng),
                                  make("d", "", rng)};
  const TaskIndex idx = build_task_index(recs);
  EXPECT_EQ(idx.buckets.size(), 2u);
  EXPECT_EQ(idx.unparseable, std::vector<std::string>{"d"});
  EXPECT_EQ(idx.pair_count(), 2u);
  recs.push_back(make("a", "x", rng));
  EXPECT_THROW(build_task_index(recs), Error);
}

TEST(TaskIndexTest, SyntheticThousandRecords) {
  Rng rng(82);
  std::vector<DatasetRecord> recs;
  std::size_t parseable = 0;
  const std::vector<std::string> names{"large red cube", "small blue sphere", "large cyan block", "small gray cube"};
  for (int i = 0; i < 1000; ++i) {
    std::string text;
    switch (uniform_index(rng, 4)) {
      case 0: text = ""; break;
      case 1: text = "free text task " + std::to_string(uniform_index(rng, 5)); break;
      default: text = instr(names[uniform_index(rng, 4)], names[uniform_index(rng, 4)]);
    }
    parseable += !text.empty();
    recs.push_back(make("s" + std::to_string(i), text, rng));
  }
  const TaskIndex idx = build_task_index(recs);
  std::size_t total = 0;
  for (const auto& [key, ids] : idx.buckets) total += ids.size();
  EXPECT_EQ(total, parseable);
  EXPECT_EQ(idx.unparseable.size(), 1000 - parseable);
}

TEST(Pairs, BucketOfTwo) {
  Rng rng(83);
  const std::vector<DatasetRecord> recs{make("a", instr("small red cube", "large blue sphere"), rng),
                                        make("b", instr("small red cube", "large blue sphere"), rng)};
  const TaskIndex idx = build_task_index(recs);
  const auto pairs = sample_pairs(idx, 2, 1);
  const std::set<PairIds> got(pairs.begin(), pairs.end());
  EXPECT_EQ(got, (std::set<PairIds>{{"a", "b"}, {"b", "a"}}));
  try {
    sample_pairs(idx, 3, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::InsufficientPairs);
  }
}

TEST(Pairs, ExhaustiveEveryPairOnce) {
  Rng rng(84);
  std::vector<DatasetRecord> recs;
  for (int i = 0; i < 9; ++i) recs.push_back(make("x" + std::to_string(i), instr("small red cube", "large blue sphere"), rng));
  for (int i = 0; i < 4; ++i) recs.push_back(make("y" + std::to_string(i), instr("large red cube", "large blue sphere"), rng));
  recs.push_back(make("z", instr("small cyan block", "large blue sphere"), rng));
  const TaskIndex idx = build_task_index(recs);
  ASSERT_EQ(idx.pair_count(), 9u * 8 + 4 * 3);
  const auto pairs = sample_pairs(idx, idx.pair_count(), 7);
  const std::set<PairIds> distinct(pairs.begin(), pairs.end());
  EXPECT_EQ(distinct.size(), pairs.size());
  for (const PairIds& p : distinct) {
    EXPECT_NE(p.demo, p.query);
    EXPECT_EQ(p.demo[0], p.query[0]);  // same bucket
  }
}

TEST(Pairs, SeedDeterminism) {
  Rng rng(85);
  std::vector<DatasetRecord> recs;
  for (int i = 0; i < 30; ++i) recs.push_back(make("r" + std::to_string(i), instr("small red cube", "large blue sphere"), rng));
  const TaskIndex idx = build_task_index(recs);
  EXPECT_EQ(sample_pairs(idx, 50, 3), sample_pairs(idx, 50, 3));
  EXPECT_NE(sample_pairs(idx, 50, 3), sample_pairs(idx, 50, 4));
}

TEST(Prompt, FigureLayout) {
  Rng rng(86);
  DatasetRecord demo = make("demo", instr("large yellow sphere", "large yellow cube"), rng);
  DatasetRecord live = make("live", instr("large yellow sphere", "large yellow cube"), rng);
  demo.tokens->image = kFigDemoTraj;
  const Prompt p = assemble_imitation_prompt({demo, live});
  const std::size_t state = p.text.find(demo.robot_state_tokens->image);
  const std::size_t traj = p.text.find(kFigDemoTraj);
  const std::size_t live_img = p.text.find("<live_img:images/live_rgb.png>");
  ASSERT_NE(state, std::string::npos);
  ASSERT_NE(traj, std::string::npos);
  ASSERT_NE(live_img, std::string::npos);
  EXPECT_LT(state, traj);
  EXPECT_LT(traj, live_img);
  EXPECT_EQ(p.text.rfind("<demo_img:images/demo_rgb.png>", 0), 0u);
  EXPECT_EQ(p.target_text, live.tokens->image);
  // The query's trajectory never leaks into the prompt.
  EXPECT_EQ(p.text.find(live.tokens->image), std::string::npos);
}

TEST(Prompt, SameSceneAndMissingFields) {
  Rng rng(87);
  const DatasetRecord a = make("a", "x", rng);
  try {
    assemble_imitation_prompt({a, a});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::InvalidPair);
  }
  DatasetRecord b = make("b", "x", rng);
  b.robot_state_tokens.reset();
  try {
    assemble_imitation_prompt({a, b});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::MissingField);
  }
  DatasetRecord c = make("c", "x", rng);
  c.rgb_path.reset();
  EXPECT_THROW(assemble_imitation_prompt({c, a}), Error);
}

TEST(Prompt, ParseRoundTripBothFrames) {
  Rng rng(88);
  for (int i = 0; i < 300; ++i) {
    const DatasetRecord d = make("d" + std::to_string(i), "x", rng);
    const DatasetRecord q = make("q" + std::to_string(i), "x", rng);
    for (Frame f : {Frame::Image, Frame::Robot}) {
      const Prompt p = assemble_imitation_prompt({d, q}, f);
      const ParsedImitationPrompt parsed = parse_imitation_prompt(p.text);
      const FrameTokens& dt = *d.tokens;
      const FrameTokens& ds = *d.robot_state_tokens;
      const FrameTokens& qs = *q.robot_state_tokens;
      const bool img = f == Frame::Image;
      EXPECT_EQ(render_tokens(parsed.demo_trajectory), img ? dt.image : dt.robot);
      EXPECT_EQ(render_tokens(parsed.demo_state), img ? ds.image : ds.robot);
      EXPECT_EQ(render_tokens(parsed.live_state), img ? qs.image : qs.robot);
      EXPECT_EQ(parsed.demo_image, *d.rgb_path);
      EXPECT_EQ(parsed.live_image, *q.rgb_path);
      EXPECT_EQ(render_tokens(p.target), img ? q.tokens->image : q.tokens->robot);
    }
  }
}

TEST(Prompt, DistinctPairsGiveDistinctPrompts) {
  Rng rng(89);
  std::vector<DatasetRecord> recs;
  for (int i = 0; i < 12; ++i) recs.push_back(make("r" + std::to_string(i), instr("small red cube", "large blue sphere"), rng));
  const TaskIndex idx = build_task_index(recs);
  const auto ids = sample_pairs(idx, idx.pair_count(), 1);
  std::set<std::string> texts;
  for (const PairSample& s : materialize_pairs(ids, recs)) texts.insert(assemble_imitation_prompt(s).text);
  EXPECT_EQ(texts.size(), ids.size());
  const std::vector<PairIds> bad{{"r0", "nope"}};
  EXPECT_THROW(materialize_pairs(bad, recs), Error);
}

TEST(Prompt, ParseRejectsMalformed) {
  Rng rng(90);
  const Prompt p = assemble_imitation_prompt({make("a", "x", rng), make("b", "x", rng)});
  try {
    parse_imitation_prompt(p.text.substr(0, p.text.find("<live_img")));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::FormatError);
  }
  std::string broken = p.text;
  broken.replace(broken.find("<demo_img:"), 10, "<demo_im:");
  try {
    parse_imitation_prompt(broken);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.position(), std::optional<std::size_t>(0));
  }
}

TEST(LanguagePrompt, LayoutRoundTripAndMissingInstruction) {
  Rng rng(91);
  const DatasetRecord r = make("r", "move large yellow sphere onto large yellow cube", rng);
  const Prompt p = assemble_language_prompt(r);
  EXPECT_EQ(p.text, "<live_img:images/r_rgb.png>\n" + r.robot_state_tokens->image + "\n" + r.instruction + "\n");
  const ParsedLanguagePrompt parsed = parse_language_prompt(p.text);
  EXPECT_EQ(parsed.instruction, r.instruction);
  EXPECT_EQ(render_tokens(parsed.live_state), r.robot_state_tokens->image);
  EXPECT_EQ(p.target_text, r.tokens->image);
  DatasetRecord blank = r;
  blank.instruction = "";
  try {
    assemble_language_prompt(blank);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::MissingField);
  }
}
