#include "stvun/cli.hpp"

#include "stvun/dataio.hpp"
#include "stvun/flow_interp.hpp"
#include "stvun/metrics.hpp"
#include "stvun/model.hpp"
#include "stvun/training.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>

namespace fs = std::filesystem;

namespace stvun::cli {

namespace {

fs::path env_path(const char* var, const std::string& leaf) {
  const char* v = std::getenv(var);
  return (v && *v) ? fs::path(v) / leaf : fs::path(leaf);
}

// Model flags shared by training commands; unset flags leave the file value.
struct ModelFlags {
  std::optional<int> scale, blocks, channels, window, stride;
  std::optional<double> sigma;
  std::optional<std::string> estimator;

  void add_to(CLI::App* app) {
    app->add_option("--scale", scale, "Spatial factor r (2 or 4)");
    app->add_option("--blocks", blocks, "Dense blocks B");
    app->add_option("--channels", channels, "Base feature width");
    app->add_option("--window", window, "Input frames per window (odd)");
    app->add_option("--stride", stride, "Input frame stride s in the HR clip");
    app->add_option("--sigma", sigma, "Gaussian blur sigma of the degradation");
    app->add_option("--flow", estimator, "Flow estimator: pyramid-lite or zero");
  }

  void apply(ModelConfig& c) const {
    if (scale) c.scale_r = *scale;
    if (blocks) c.num_blocks = *blocks;
    if (channels) c.base_channels = *channels;
    if (window) c.window_size = *window;
    if (stride) c.stride_s = *stride;
    if (sigma) c.blur_sigma = *sigma;
    if (estimator) c.flow_estimator = *estimator;
  }
};

struct Globals {
  std::string config;
  std::uint64_t seed = 0;
  bool verbose = false;
};

ModelConfig resolve_config(const Globals& g, const ModelFlags& flags, ModelConfig base = {}) {
  if (!g.config.empty()) base = load_config_file(g.config, base);
  flags.apply(base);
  return base;
}

void log_config(const ModelConfig& c, std::uint64_t seed) {
  spdlog::info("seed = {}", seed);
  for (const auto& [k, v] : config_fields(c)) spdlog::info("config {} = {}", k, v);
}

std::string schedule_text(const train::TrainSchedule& s) {
  return fmt::format(
      "phase = {}\ntotal_iters = {}\nbatch_size = {}\npatch_size = {}\nlr_init = {}\nlr_decay_factor = {}\n"
      "lr_decay_every = {}\nclip_norm = {}\ncheckpoint_every = {}\n",
      train::phase_name(s.phase), s.total_iters, s.batch_size, s.patch_size, s.lr_init, s.lr_decay_factor,
      s.lr_decay_every, s.clip_norm, s.checkpoint_every);
}

void write_run_config(const fs::path& dir, const std::string& command, std::uint64_t seed, const ModelConfig& c,
                      const std::string& extra = {}) {
  fs::create_directories(dir);
  std::ofstream out(dir / "run_config.txt");
  if (!out) throw IOError(dir / "run_config.txt", "cannot write run config");
  out << "command = " << command << "\nseed = " << seed << "\n" << format_config(c) << extra;
}

data::DatasetIndex resolve_index(const fs::path& data, int stride_s) {
  if (fs::is_regular_file(data)) return data::read_manifest(data);
  if (fs::is_regular_file(data / "manifest.tsv")) return data::read_manifest(data / "manifest.tsv");
  return data::scan_frame_root(data, stride_s);
}

// Maps library exceptions to exit codes; `io_code` applies to IOError.
template <typename F>
int guarded(F&& body, int io_code, int mismatch_code = kCheckpointMismatch) {
  try {
    return body();
  } catch (const CheckpointMismatch& e) {
    spdlog::error("{}", e.what());
    return mismatch_code;
  } catch (const IOError& e) {
    spdlog::error("{}", e.what());
    return io_code;
  } catch (const ConfigError& e) {
    spdlog::error("{}", e.what());
    return kValidation;
  } catch (const DataError& e) {
    spdlog::error("{}", e.what());
    return kValidation;
  } catch (const PatchError& e) {
    spdlog::error("{}", e.what());
    return kValidation;
  } catch (const SizeError& e) {
    spdlog::error("{}", e.what());
    return kValidation;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kFailure;
  }
}

// ---------------------------------------------------------------------------

struct PrepareArgs {
  std::string hr_root, out;
  int scale = 4;
  double sigma = 1.5;
  int stride = 2;
  int offset = 0;
};

int cmd_prepare(const Globals& g, const PrepareArgs& a) {
  ModelConfig c;
  c.scale_r = a.scale;
  c.blur_sigma = a.sigma;
  c.stride_s = a.stride;
  c.subsample_offset = a.offset;
  const auto vc = validate_config(c);
  const fs::path out = a.out.empty() ? cache_path("prepared") : fs::path(a.out);
  log_config(vc, g.seed);

  auto index = data::scan_frame_root(a.hr_root, a.stride);
  data::DatasetIndex kept;
  kept.stride_s = a.stride;
  const auto params = data::degrade_params(vc);
  for (auto entry : index.clips) {
    auto clip = data::read_frames(entry.hr_dir);
    const auto h = clip.frames.front().height(), w = clip.frames.front().width();
    if (h % a.scale != 0 || w % a.scale != 0) {
      spdlog::warn("skipping clip '{}': {}x{} is not divisible by {}", entry.name, w, h, a.scale);
      continue;
    }
    Clip lr;
    for (const auto& f : clip.frames) lr.frames.push_back(Frame{data::degrade_tensor(f.pixels, params), f.time});
    entry.hr_dir = fs::absolute(entry.hr_dir);
    entry.lr_dir = fs::absolute(out / "lr" / entry.name);
    data::write_frames(lr, entry.lr_dir);
    kept.clips.push_back(entry);
    spdlog::info("prepared clip '{}' ({} frames)", entry.name, entry.frame_count);
  }
  if (kept.clips.empty()) throw IOError(a.hr_root, "no clip could be prepared");
  data::write_manifest(kept, out / "manifest.tsv");
  data::write_degradation_sidecar(out / "degradation.json", params, a.stride, g.seed);
  write_run_config(out, "prepare", g.seed, vc);
  std::cout << fmt::format("prepared {} clip(s) into {}\n", kept.clips.size(), out.string());
  return kOk;
}

// ---------------------------------------------------------------------------

struct TrainArgs {
  std::string data, out, resume, init;
  std::string preset = "desk";
  std::optional<std::int64_t> iters;
  std::optional<int> batch, patch;
  std::optional<double> lr;
  std::optional<std::int64_t> checkpoint_every;
  bool dry_run = false;
  bool no_augment = false;
};

int cmd_train(const Globals& g, const ModelFlags& flags, const TrainArgs& a, train::Phase phase) {
  const auto vc = validate_config(resolve_config(g, flags));
  if (a.preset != "desk" && a.preset != "paper") throw DataError("unknown preset '" + a.preset + "'");
  auto schedule = a.preset == "paper" ? train::paper_schedule(phase) : train::desk_schedule(phase);
  if (a.iters) schedule.total_iters = *a.iters;
  if (a.batch) schedule.batch_size = *a.batch;
  if (a.patch) schedule.patch_size = *a.patch;
  if (a.lr) schedule.lr_init = *a.lr;
  if (a.checkpoint_every) schedule.checkpoint_every = *a.checkpoint_every;
  train::check_schedule(schedule, vc);

  log_config(vc, g.seed);
  const auto sched = schedule_text(schedule);
  std::cout << "preset = " << a.preset << "\n" << sched << std::flush;

  if (a.data.empty()) throw DataError("--data is required");
  auto index = resolve_index(a.data, vc->stride_s);
  data::check_index(index, vc);
  if (a.dry_run) return kOk;
  const auto dataset = data::load_dataset(index);

  const fs::path out = a.out.empty() ? scratch_path(train::phase_name(phase)) : fs::path(a.out);
  write_run_config(out, train::phase_name(phase), g.seed, vc, "preset = " + a.preset + "\n" + sched);

  auto rng = seed_all(g.seed);
  auto net = make_network(vc, rng);
  if (!a.init.empty()) {
    const auto meta = load_checkpoint(a.init, net);
    spdlog::info("initialized from {} ({} iteration {})", a.init, meta.phase, meta.iteration);
  } else if (phase == train::Phase::Joint && a.resume.empty()) {
    spdlog::warn("joint training without --init starts from random spatial weights");
  }
  train::TrainOptions options;
  options.out_dir = out;
  options.log_name = train::phase_name(phase) + "_loss.csv";
  options.augment = !a.no_augment;
  options.on_report = [&](const train::LossReport& r) {
    if (r.iteration % 100 == 0 || r.iteration == schedule.total_iters) {
      spdlog::info("iter {} l_m {:.5f} l_s {:.5f} l_f {:.5f} total {:.5f} lr {:.3g}", r.iteration, r.l_m, r.l_s,
                   r.l_f, r.total, r.lr);
    }
  };
  train::Trainer trainer(net, vc, schedule, dataset, rng.fork(), options);
  if (!a.resume.empty()) {
    trainer.resume(a.resume);
    spdlog::info("resumed at iteration {}", trainer.iteration());
  }
  trainer.run();
  std::cout << fmt::format("{} finished at iteration {}; checkpoint {}\n", train::phase_name(phase),
                           trainer.iteration(), (out / (train::phase_name(phase) + "_final.ckpt")).string());
  return kOk;
}

// ---------------------------------------------------------------------------

StvunNet load_network(const fs::path& ckpt, const ModelConfig& config) {
  auto rng = seed_all(0);
  auto net = make_network(validate_config(config), rng);
  load_checkpoint(ckpt, net);
  return net;
}

void dump_scores(const WindowResult& result, std::int64_t center, const fs::path& dir) {
  fs::create_directories(dir);
  for (std::size_t b = 0; b < result.scores.size(); ++b) {
    const auto& s = result.scores[b];  // [T, 1, H, W]
    for (std::int64_t t = 0; t < s.size(0); ++t) {
      write_score_heatmap(s[t][0], dir / fmt::format("window{:06d}_block{}_frame{}.png", center, b + 1, t));
    }
  }
}

void dump_flows(const WindowResult& result, std::int64_t center, const fs::path& dir) {
  if (!result.flow_forward) return;
  fs::create_directories(dir);
  flow::write_flow_file(*result.flow_forward, dir / fmt::format("window{:06d}_forward.flo", center));
  flow::write_flow_file(*result.flow_backward, dir / fmt::format("window{:06d}_backward.flo", center));
}

struct UpsampleArgs {
  std::string in, out, ckpt, scores_dir, flows_dir;
  int n_intermediate = 1;
};

int cmd_upsample(const Globals& g, const ModelFlags& flags, const UpsampleArgs& a, bool scores_only) {
  if (a.n_intermediate < 0) throw DataError("--n-intermediate must be >= 0");
  const auto config = resolve_config(g, flags, read_checkpoint_config(a.ckpt));
  auto net = load_network(a.ckpt, config);
  log_config(net->config(), g.seed);
  const auto lr = data::read_frames(a.in);
  const auto t_ins = scores_only ? std::vector<TimeIndex>{} : uniform_t_ins(a.n_intermediate);

  WindowObserver observer;
  if (!a.scores_dir.empty() || !a.flows_dir.empty()) {
    observer = [&](std::int64_t center, const WindowResult& r) {
      if (!a.scores_dir.empty()) dump_scores(r, center, a.scores_dir);
      if (!a.flows_dir.empty()) dump_flows(r, center, a.flows_dir);
    };
  }
  const auto hr = upsample_video(net, lr, t_ins, observer);
  if (!scores_only) {
    data::write_frames(hr, a.out);
    write_run_config(a.out, "upsample", g.seed, net->config(),
                     fmt::format("n_intermediate = {}\nckpt = {}\n", a.n_intermediate, a.ckpt));
    std::cout << fmt::format("wrote {} frames ({}x{}) from {} inputs to {}\n", hr.size(),
                             hr.frames.front().width(), hr.frames.front().height(), lr.size(), a.out);
  } else {
    std::cout << fmt::format("wrote confidence heatmaps for {} windows to {}\n", lr.size(), a.scores_dir);
  }
  return kOk;
}

// ---------------------------------------------------------------------------

struct EvalArgs {
  std::string ckpt, testset, out;
  std::string ablate = "none";
  bool baseline = false;
  bool luma = false;
  int crop = 0;
};

std::string slug(const std::string& label) {
  std::string s;
  for (char ch : label) s += std::isalnum(static_cast<unsigned char>(ch)) ? static_cast<char>(std::tolower(ch)) : '_';
  return s;
}

int cmd_evaluate(const Globals& g, const EvalArgs& a) {
  auto config = read_checkpoint_config(a.ckpt);
  std::string label = "STVUN";
  if (a.ablate == "no-efst") {
    config.ablation.disable_efst = true;
    label = "STVUN w/o EFST";
  } else if (a.ablate == "no-D") {
    config.ablation.use_efst_instead_of_D = true;
    label = "STVUN w/o D";
  } else if (a.ablate != "none") {
    throw DataError("--ablate must be none, no-efst or no-D");
  }
  if (!g.config.empty()) config = load_config_file(g.config, config);
  const auto vc = validate_config(config);
  log_config(vc, g.seed);

  StvunNet net = nullptr;
  try {
    net = load_network(a.ckpt, vc);
  } catch (const CheckpointMismatch& e) {
    if (a.ablate == "none") throw;
    spdlog::error("ablation '{}' is incompatible with {}", a.ablate, a.ckpt);
    spdlog::error("{}", e.what());
    return kAblationMismatch;
  }

  auto index = resolve_index(a.testset, vc->stride_s);
  if (index.clips.empty()) throw DataError("test set has no clips");
  const auto dataset = data::load_dataset(index);
  eval::MetricOptions mo{a.luma, a.crop};

  std::vector<eval::EvalReport> reports;
  auto model_report = eval::evaluate_protocol(eval::network_model(net), dataset, vc, {TimeIndex(1, 2)}, mo);
  model_report.label = label;
  model_report.params = net->count_parameters().total();
  reports.push_back(model_report);
  if (a.baseline) {
    auto b = eval::evaluate_protocol(eval::bilinear_baseline(vc->scale_r), dataset, vc, {TimeIndex(1, 2)}, mo);
    b.label = "Bilinear";
    reports.push_back(b);
  }

  const fs::path out = a.out.empty() ? scratch_path("evaluate") : fs::path(a.out);
  fs::create_directories(out);
  for (const auto& r : reports) {
    eval::write_frame_csv(r, out / (slug(r.label) + "_frames.csv"));
    eval::write_clip_json(r, out / (slug(r.label) + "_clips.json"));
  }
  const auto table = eval::render_table(reports);
  {
    std::ofstream t(out / "table.txt");
    if (!t) throw IOError(out / "table.txt", "cannot write table");
    t << table;
  }
  write_run_config(out, "evaluate", g.seed, vc, "ablate = " + a.ablate + "\nckpt = " + a.ckpt + "\n");
  std::cout << table;
  return kOk;
}

// ---------------------------------------------------------------------------

struct SynthArgs {
  std::string out;
  int clips = 2;
  std::int64_t frames = 24;
  std::int64_t height = 128;
  std::int64_t width = 128;
};

int cmd_synth(const Globals& g, const SynthArgs& a) {
  if (a.clips < 1 || a.frames < 1) throw DataError("--clips and --frames must be positive");
  for (int k = 0; k < a.clips; ++k) {
    const auto clip = data::synthesize_clip(a.frames, a.height, a.width, g.seed + static_cast<std::uint64_t>(k));
    data::write_frames(clip, fs::path(a.out) / fmt::format("clip{:03d}", k));
  }
  std::cout << fmt::format("wrote {} synthetic clip(s) of {} frames to {}\n", a.clips, a.frames, a.out);
  return kOk;
}

}  // namespace

// ---------------------------------------------------------------------------

fs::path scratch_path(const std::string& leaf) { return env_path("STVUN_SCRATCH_DIR", leaf); }
fs::path cache_path(const std::string& leaf) { return env_path("STVUN_CACHE_DIR", leaf); }

void write_score_heatmap(const torch::Tensor& map, const fs::path& path) {
  if (map.dim() != 2) throw ShapeError("heatmap expects a [H, W] map");
  auto bytes = (map.detach().to(torch::kFloat32).clamp(0.0, 1.0) * 255.0).round().to(torch::kUInt8).contiguous();
  cv::Mat gray(static_cast<int>(bytes.size(0)), static_cast<int>(bytes.size(1)), CV_8UC1, bytes.data_ptr());
  cv::Mat color;
  cv::applyColorMap(gray, color, cv::COLORMAP_JET);
  if (!path.parent_path().empty()) fs::create_directories(path.parent_path());
  if (!cv::imwrite(path.string(), color)) throw IOError(path, "cannot write heatmap");
}

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"Joint space-time video upsampling"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config, "Config file (key = value); flags override it")->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "Seed for every stochastic step");
  app.add_flag("-v,--verbose", g.verbose, "Debug logging");

  PrepareArgs pa;
  auto* prepare = app.add_subcommand("prepare", "Degrade an HR frame tree into an LR mirror with a manifest");
  prepare->add_option("--hr-root", pa.hr_root, "Directory of HR clip directories")->required();
  prepare->add_option("--out", pa.out, "Output directory (default $STVUN_CACHE_DIR/prepared)");
  prepare->add_option("--scale", pa.scale, "Spatial factor r");
  prepare->add_option("--sigma", pa.sigma, "Gaussian blur sigma");
  prepare->add_option("--stride", pa.stride, "Input frame stride");
  prepare->add_option("--offset", pa.offset, "Subsampling phase");

  ModelFlags train_flags;
  TrainArgs ta;
  auto* pretrain = app.add_subcommand("pretrain", "Spatial (VSR) pretraining");
  auto* train = app.add_subcommand("train", "Joint space-time training");
  for (auto* sub : {pretrain, train}) {
    sub->add_option("--data", ta.data, "Prepared dataset (manifest or directory)");
    sub->add_option("--out", ta.out, "Run directory (default $STVUN_SCRATCH_DIR/<phase>)");
    sub->add_option("--resume", ta.resume, "Continue from a checkpoint of the same phase");
    sub->add_option("--preset", ta.preset, "desk or paper")->check(CLI::IsMember({"desk", "paper"}));
    sub->add_option("--iters", ta.iters, "Override total iterations");
    sub->add_option("--batch", ta.batch, "Override batch size");
    sub->add_option("--patch", ta.patch, "Override HR patch size");
    sub->add_option("--lr", ta.lr, "Override initial learning rate");
    sub->add_option("--checkpoint-every", ta.checkpoint_every, "Iterations between checkpoints");
    sub->add_flag("--dry-run", ta.dry_run, "Validate and print the schedule without training");
    sub->add_flag("--no-augment", ta.no_augment, "Disable flips, rotations and time reversal");
    train_flags.add_to(sub);
  }
  train->add_option("--init", ta.init, "Pretrained checkpoint to start from");

  ModelFlags infer_flags;
  UpsampleArgs ua;
  auto* upsample = app.add_subcommand("upsample", "Upsample an LR frame directory in space and time");
  upsample->add_option("--in", ua.in, "LR frame directory")->required();
  upsample->add_option("--out", ua.out, "Output frame directory")->required();
  upsample->add_option("--ckpt", ua.ckpt, "Checkpoint")->required();
  upsample->add_option("--n-intermediate,-N", ua.n_intermediate, "Frames synthesized per input gap");
  upsample->add_option("--dump-scores", ua.scores_dir, "Directory for confidence-score heatmaps");
  upsample->add_option("--dump-flows", ua.flows_dir, "Directory for .flo flow fields");
  infer_flags.add_to(upsample);

  UpsampleArgs da;
  auto* dump = app.add_subcommand("dump-scores", "Write confidence-score heatmaps for every window");
  dump->add_option("--in", da.in, "LR frame directory")->required();
  dump->add_option("--ckpt", da.ckpt, "Checkpoint")->required();
  dump->add_option("--out", da.scores_dir, "Heatmap directory")->required();

  EvalArgs ea;
  auto* evaluate = app.add_subcommand("evaluate", "Odd/even protocol on an HR test set");
  evaluate->add_option("--ckpt", ea.ckpt, "Checkpoint")->required();
  evaluate->add_option("--testset", ea.testset, "HR clip root or manifest")->required();
  evaluate->add_option("--out", ea.out, "Report directory (default $STVUN_SCRATCH_DIR/evaluate)");
  evaluate->add_option("--ablate", ea.ablate, "none, no-efst or no-D")
      ->check(CLI::IsMember({"none", "no-efst", "no-D"}));
  evaluate->add_flag("--baseline", ea.baseline, "Also score the bilinear baseline");
  evaluate->add_flag("--luma", ea.luma, "Score the Y channel only");
  evaluate->add_option("--crop", ea.crop, "Border pixels excluded from scoring");

  SynthArgs sa;
  auto* synth = app.add_subcommand("synth", "Write a procedural HR corpus");
  synth->add_option("--out", sa.out, "Output root")->required();
  synth->add_option("--clips", sa.clips, "Clip count");
  synth->add_option("--frames", sa.frames, "Frames per clip");
  synth->add_option("--height", sa.height, "Frame height");
  synth->add_option("--width", sa.width, "Frame width");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kFailure;
  }
  spdlog::set_level(g.verbose ? spdlog::level::debug : spdlog::level::info);

  if (*prepare) return guarded([&] { return cmd_prepare(g, pa); }, kIOFailure);
  if (*pretrain) return guarded([&] { return cmd_train(g, train_flags, ta, train::Phase::Pretrain); }, kValidation);
  if (*train) return guarded([&] { return cmd_train(g, train_flags, ta, train::Phase::Joint); }, kValidation);
  if (*upsample) return guarded([&] { return cmd_upsample(g, infer_flags, ua, false); }, kFailure);
  if (*dump) return guarded([&] { return cmd_upsample(g, ModelFlags{}, da, true); }, kFailure);
  if (*evaluate) return guarded([&] { return cmd_evaluate(g, ea); }, kFailure);
  if (*synth) return guarded([&] { return cmd_synth(g, sa); }, kIOFailure);
  return kFailure;
}

int run_cli(const std::vector<std::string>& args) {
  std::vector<const char*> argv{"stvun"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return run_cli(static_cast<int>(argv.size()), argv.data());
}

}  // namespace stvun::cli
