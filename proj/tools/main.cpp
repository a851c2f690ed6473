#include "commands.hpp"

#include "keypose/error.hpp"

#include <CLI11.hpp>

#include <functional>
#include <iostream>

namespace {

using namespace keypose::cli;

void add_codec_options(CLI::App* sub, CodecOptions& o, bool with_frame = true) {
  if (with_frame) {
    sub->add_option("--frame", o.frame, "Token frame")->check(CLI::IsMember({"image", "robot"}))->capture_default_str();
  }
  sub->add_option("--n-loc", o.n_loc, "Position bins")->check(CLI::IsMember({128, 256, 512, 1024}))->capture_default_str();
  sub->add_option("--depth-mode", o.depth_mode, "Depth token layout")
      ->check(CLI::IsMember({"shared_loc", "separate_band"}))
      ->capture_default_str();
  sub->add_option("--depth-min", o.depth_min, "Depth range start, meters")->capture_default_str();
  sub->add_option("--depth-max", o.depth_max, "Depth range end, meters")->capture_default_str();
}

int exit_code_for(keypose::ErrorKind kind) {
  return kind == keypose::ErrorKind::InvalidArgument ? kExitUsage : kExitData;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Keypose action tokenization, decoding, evaluation and dataset toolkit", "keypose"};
  app.require_subcommand(1);
  app.set_config("--config", "", "TOML/INI file with option values; flags on the command line win");
  app.set_version_flag("--version", "0.1.0");

  std::function<void()> run;

  GenDatasetOptions gen;
  auto* g = app.add_subcommand("gen-dataset", "Generate a synthetic pick-and-place dataset");
  g->add_option("--out", gen.out, "Output directory")->required();
  g->add_option("--count,-n", gen.count, "Number of scenes")->capture_default_str();
  g->add_option("--seed", gen.seed, "Base seed")->envname("KEYPOSE_SEED")->capture_default_str();
  g->add_option("--mode", gen.mode, "Randomization band")->check(CLI::IsMember({"easy", "hard"}))->capture_default_str();
  g->add_option("--width", gen.width, "Image width")->check(CLI::PositiveNumber)->capture_default_str();
  g->add_option("--height", gen.height, "Image height")->check(CLI::PositiveNumber)->capture_default_str();
  g->add_flag("--no-depth", gen.no_depth, "Skip depth images");
  g->add_flag("--no-photometric", gen.no_photometric, "Skip brightness/contrast jitter");
  g->add_option("--background-dir", gen.background_dir, "Directory of background images");
  g->add_option("--background-p", gen.background_p, "Background replacement probability")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  g->add_option("--threads", gen.threads, "Worker threads (0: all cores)")->capture_default_str();
  g->add_flag("--validate", gen.validate, "Re-read and validate every record");
  add_codec_options(g, gen.codec, false);
  g->callback([&] { run = [&] { cmd_gen_dataset(gen); }; });

  EncodeOptions enc;
  auto* e = app.add_subcommand("encode", "Encode trajectories to tokens (or decode with --decode)");
  e->add_option("--in", enc.in, "JSONL input, '-' for stdin")->capture_default_str();
  e->add_option("--out", enc.out, "JSONL output, '-' for stdout")->capture_default_str();
  e->add_flag("--decode", enc.decode, "Decode 'tokens' back to trajectories");
  add_codec_options(e, enc.codec);
  e->callback([&] { run = [&] { cmd_encode(enc); }; });

  DecodeLogitsOptions dec;
  auto* d = app.add_subcommand("decode-logits", "Decode an LGTD logit dump");
  d->add_option("dump", dec.dump, "LGTD file")->required()->check(CLI::ExistingFile);
  d->add_option("--out", dec.out, "JSONL output, '-' for stdout")->capture_default_str();
  d->add_option("--strategy", dec.strategy, "Decoding strategy")
      ->check(CLI::IsMember({"greedy", "sample", "beam", "beam-nms"}))
      ->capture_default_str();
  d->add_option("--n,-k", dec.n, "Beams or samples")->check(CLI::PositiveNumber)->capture_default_str();
  d->add_option("--window-loc", dec.window_loc, "NMS half-window on loc steps")->check(CLI::NonNegativeNumber)->capture_default_str();
  d->add_option("--window-seg", dec.window_seg, "NMS half-window on seg steps")->check(CLI::NonNegativeNumber)->capture_default_str();
  d->add_option("--temperature", dec.temperature, "Sampling temperature")->check(CLI::PositiveNumber)->capture_default_str();
  d->add_option("--seed", dec.seed, "Sampling seed")->envname("KEYPOSE_SEED")->capture_default_str();
  d->add_option("--camera", dec.camera, "JSON camera (or a record holding one) for image-frame decoding")
      ->check(CLI::ExistingFile);
  d->add_option("--episode-id", dec.episode_id, "Episode id copied into every output line");
  add_codec_options(d, dec.codec);
  d->callback([&] { run = [&] { cmd_decode_logits(dec); }; });

  EvalOptions ev;
  auto* v = app.add_subcommand("eval", "Trajectory L1, mAP and Spearman report");
  v->add_option("--predictions", ev.predictions, "Predictions JSONL")->required()->check(CLI::ExistingFile);
  v->add_option("--ground-truth", ev.ground_truth, "Ground truth JSONL (dataset records work)")
      ->required()
      ->check(CLI::ExistingFile);
  v->add_option("--out", ev.out, "Report JSON, '-' for stdout")->capture_default_str();
  v->add_option("--csv", ev.csv, "PR points CSV");
  v->add_option("--map-degrees-per-cm", ev.map_degrees_per_cm, "Unit exchange for mAP")->capture_default_str();
  v->add_option("--l1-degrees-per-cm", ev.l1_degrees_per_cm, "Unit exchange for L1 and Spearman")->capture_default_str();
  v->add_option("--thresholds", ev.thresholds, "AP thresholds in cm")->capture_default_str();
  v->add_flag("--allow-missing", ev.allow_missing, "Accept ground-truth episodes without predictions");
  v->callback([&] { run = [&] { cmd_eval(ev); }; });

  CropOptions cr;
  auto* c = app.add_subcommand("crop", "Crop and resize an image to the model resolution");
  c->add_option("--image", cr.image, "Input image (PNG or PPM)")->required()->check(CLI::ExistingFile);
  c->add_option("--out", cr.out, "Output PNG; the map goes to <out>.json")->required();
  c->add_option("--center", cr.center, "Crop center")
      ->check(CLI::IsMember({"image_center", "start_object", "midpoint"}))
      ->capture_default_str();
  c->add_option("--size", cr.size, "Window side in pixels or 'full'")->capture_default_str();
  c->add_flag("--valid", cr.valid, "Clip the window to the image instead of zero padding");
  c->add_option("--start", cr.start, "Start object pixel x y")->expected(2);
  c->add_option("--end", cr.end, "End object pixel x y")->expected(2);
  c->add_option("--records", cr.records, "Dataset records to take start/end from")->check(CLI::ExistingFile);
  c->add_option("--scene-id", cr.scene_id, "Scene id within --records");
  c->add_option("--point", cr.points, "Original pixel x y to map (repeatable)")->expected(2)->allow_extra_args(false);
  c->callback([&] { run = [&] { cmd_crop(cr); }; });

  PairSampleOptions ps;
  auto* p = app.add_subcommand("pair-sample", "Sample prompts from dataset records");
  p->add_option("--records", ps.records, "records.jsonl")->required()->check(CLI::ExistingFile);
  p->add_option("--out-dir", ps.out_dir, "Directory for one text file per prompt");
  p->add_option("--jsonl", ps.jsonl, "JSONL output, '-' for stdout");
  p->add_option("-k,--count", ps.k, "Number of samples")->capture_default_str();
  p->add_option("--seed", ps.seed, "Sampling seed")->envname("KEYPOSE_SEED")->capture_default_str();
  p->add_option("--kind", ps.kind, "Prompt kind")->check(CLI::IsMember({"imitation", "language"}))->capture_default_str();
  p->add_option("--frame", ps.frame, "Token frame")->check(CLI::IsMember({"image", "robot"}))->capture_default_str();
  p->callback([&] { run = [&] { cmd_pair_sample(ps); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    run();
  } catch (const keypose::Error& err) {
    std::cerr << "error [" << keypose::to_string(err.kind()) << "]: " << err.what() << "\n";
    return exit_code_for(err.kind());
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kExitData;
  }
  return kExitOk;
}
