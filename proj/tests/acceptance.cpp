// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero if any selected criterion fails.
//
//   stvun_acceptance                 all criteria
//   stvun_acceptance --only overfit  a single criterion
//   stvun_acceptance --skip overfit  everything else

#include "stvun/dataio.hpp"
#include "stvun/decoder.hpp"
#include "stvun/efst.hpp"
#include "stvun/encoder.hpp"
#include "stvun/flow_interp.hpp"
#include "stvun/metrics.hpp"
#include "stvun/model.hpp"
#include "stvun/training.hpp"
#include "oracles.hpp"
#include "support.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>

using namespace stvun;
using support::f64;
namespace fs = std::filesystem;

namespace {

// Tolerances.
constexpr double kEndpointBudgetSeconds = 1.0;
constexpr double kWarpHalfPixelTol = 1e-6;
constexpr double kEfstOracleTol = 1e-6;
constexpr double kGradRelTol = 1e-4;
constexpr double kGradBudgetSeconds = 300.0;
constexpr double kLossTotalTol = 1e-9;
constexpr double kPsnrTol = 1e-9;
constexpr double kSsimTol = 1e-6;
constexpr double kCenterMarginDb = 3.0;
constexpr double kIntermediateMarginDb = 2.0;

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail += (detail.empty() ? "" : "; ") + what;
    }
  }
};

struct Criterion {
  std::string id;
  std::string title;
  std::function<Outcome()> run;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

EfstBlock make_efst(int C, int T, std::uint64_t seed) {
  EfstBlock blk(C, T);
  auto gen = Rng(seed).torch_generator();
  blk->reset_parameters(gen);
  return blk;
}

void randomize(torch::nn::Module& m, std::uint64_t seed, double scale) {
  torch::manual_seed(seed);
  torch::NoGradGuard g;
  for (auto& p : m.parameters()) p.copy_(torch::randn_like(p) * scale);
}

// ---------------------------------------------------------------------------

Outcome flow_endpoints() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  torch::manual_seed(1);
  for (int k = 0; k < 100; ++k) {
    auto f34 = torch::randn({1, 2, 6, 7}) * 5, f43 = torch::randn({1, 2, 6, 7}) * 5;
    const auto at0 = flow::scale_flows(f34, f43, TimeIndex(0));
    const auto at1 = flow::scale_flows(f34, f43, TimeIndex(1));
    const bool ok = torch::equal(at0.to_first, torch::zeros_like(f34)) && torch::equal(at0.to_second, f34) &&
                    torch::equal(at1.to_first, f43) && torch::equal(at1.to_second, torch::zeros_like(f43));
    if (!ok) {
      o.require(false, fmt::format("pair {} not exact", k));
      break;
    }
  }
  const double dt = seconds_since(t0);
  o.require(dt < kEndpointBudgetSeconds, fmt::format("took {:.3f} s", dt));
  if (o.pass) o.detail = fmt::format("100 pairs exact, {:.3f} s", dt);
  return o;
}

Outcome flow_midpoint() {
  Outcome o;
  auto constant = [](float x, float y) {
    auto f = torch::zeros({1, 2, 5, 5});
    f.select(1, 0).fill_(x);
    f.select(1, 1).fill_(y);
    return f;
  };
  const auto mid = flow::scale_flows(constant(4, 0), constant(-4, 0), TimeIndex(1, 2));
  o.require(torch::equal(mid.to_first, constant(-2, 0)), "f_T->3 != (-2, 0)");
  o.require(torch::equal(mid.to_second, constant(2, 0)), "f_T->4 != (2, 0)");
  if (o.pass) o.detail = "(-2,0) / (2,0) exact";
  return o;
}

Outcome warp_identities() {
  Outcome o;
  using torch::indexing::Slice;
  torch::manual_seed(2);
  auto src = torch::rand({3, 9, 11});
  o.require(torch::equal(flow::backward_warp(src, torch::zeros({2, 9, 11})), src), "zero flow not bit-exact");

  // Output (y, x) reads source (y - 1, x + 2).
  auto shift = torch::zeros({2, 9, 11});
  shift[0].fill_(2.0);
  shift[1].fill_(-1.0);
  auto moved = flow::backward_warp(src, shift);
  o.require(torch::equal(moved.index({Slice(), Slice(1, 9), Slice(0, 9)}), src.index({Slice(), Slice(0, 8), Slice(2, 11)})),
            "integer shift differs from index oracle");

  auto srcd = torch::rand({3, 9, 11}, f64());
  auto half = torch::zeros({2, 9, 11}, f64());
  half[0].fill_(0.5);
  half[1].fill_(0.5);
  auto h = flow::backward_warp(srcd, half);
  double worst = 0.0;
  auto S = srcd.accessor<double, 3>();
  auto Hh = h.accessor<double, 3>();
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < 8; ++y)
      for (int x = 0; x < 10; ++x) {
        const double ref = 0.25 * (S[c][y][x] + S[c][y][x + 1] + S[c][y + 1][x] + S[c][y + 1][x + 1]);
        worst = std::max(worst, std::abs(Hh[c][y][x] - ref));
      }
  o.require(worst < kWarpHalfPixelTol, fmt::format("half-pixel error {:.3g}", worst));
  if (o.pass) o.detail = fmt::format("half-pixel max error {:.2g}", worst);
  return o;
}

Outcome efst_invariants() {
  Outcome o;
  torch::NoGradGuard g;
  // Scores on encoder features of the default architecture.
  Rng rng(3);
  const auto cfg = validate_config(ModelConfig{});
  auto enc = init_encoder(cfg, rng);
  auto blk = make_efst(64, 7, 4);
  torch::manual_seed(5);
  double lo = 1.0, hi = 0.0;
  for (double gain : {1.0, 4.0, 16.0}) {
    for (auto& f : enc->forward(torch::rand({7, 3, 16, 16}) * gain)) {
      auto s = blk->forward(f.unsqueeze(0)).scores;
      lo = std::min(lo, s.min().item<double>());
      hi = std::max(hi, s.max().item<double>());
    }
  }
  for (double gain : {1.0, 10.0, 100.0}) {
    auto s = blk->forward(torch::randn({2, 7, 64, 8, 8}) * gain).scores;
    lo = std::min(lo, s.min().item<double>());
    hi = std::max(hi, s.max().item<double>());
  }
  o.require(lo > 0.0 && hi < 1.0, fmt::format("scores reach [{}, {}]", lo, hi));

  // alpha = 1, beta = 0.
  auto forced = make_efst(8, 7, 6);
  randomize(*forced, 7, 0.3);
  forced->weight_head()->weight.zero_();
  forced->weight_head()->bias.zero_();
  forced->weight_head()->bias.narrow(0, 0, 8).fill_(1.0);
  auto x = torch::randn({2, 7, 8, 6, 6});
  o.require(torch::equal(forced->forward(x).fused, forced->early_fuse(x)), "forced identity not exact");

  double worst = 0.0;
  for (std::uint64_t seed : {21, 22, 23, 24}) {
    auto toy = make_efst(4, 7, seed);
    randomize(*toy, seed + 100, 0.4);
    toy->to(torch::kFloat64);
    torch::manual_seed(seed);
    auto e = torch::randn({1, 7, 4, 2, 2}, f64());
    const auto out = toy->forward(e);
    const auto ref = oracles::efst_oracle(*toy, e);
    worst = std::max({worst, support::max_abs_diff(out.fused[0], ref.fused),
                      support::max_abs_diff(out.scores[0], ref.scores)});
  }
  o.require(worst < kEfstOracleTol, fmt::format("2x2 oracle error {:.3g}", worst));
  if (o.pass) o.detail = fmt::format("scores in [{:.3g}, {:.7f}], oracle error {:.2g}", lo, hi, worst);
  return o;
}

Outcome gradient_suite() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<std::pair<std::string, double>> errors;

  {
    ModelConfig c;
    c.base_channels = 8;
    c.num_blocks = 2;
    c.growth = 4;
    Rng rng(6);
    auto enc = init_encoder(validate_config(c), rng);
    enc->to(torch::kFloat64);
    torch::manual_seed(7);
    auto x = torch::rand({1, 3, 4, 4}, f64()).requires_grad_(true);
    auto w = torch::randn({1, 8, 4, 4}, f64());
    auto params = enc->parameters();
    params.push_back(x);
    errors.emplace_back("encoder", support::gradcheck(
                                       [&] {
                                         auto outs = enc->forward(x);
                                         return (outs[0] * w).sum() + (outs[1] * w).sum();
                                       },
                                       params, 12)
                                       .rel_error);
  }
  {
    auto blk = make_efst(8, 7, 40);
    randomize(*blk, 41, 0.25);
    blk->to(torch::kFloat64);
    torch::manual_seed(42);
    auto x = torch::randn({1, 7, 8, 4, 4}, f64()).requires_grad_(true);
    auto w = torch::randn({1, 8, 4, 4}, f64());
    auto params = blk->parameters();
    params.push_back(x);
    errors.emplace_back("efst",
                        support::gradcheck([&] { return (blk->forward(x).fused * w).sum(); }, params, 16).rel_error);
  }
  {
    torch::manual_seed(5);
    auto src = torch::rand({1, 2, 4, 4}, f64()).requires_grad_(true);
    auto flow = torch::rand({1, 2, 4, 4}, f64()) * 0.6 + 0.2;
    flow.select(1, 0).narrow(2, 3, 1).mul_(-1.0);
    flow.select(1, 1).narrow(1, 3, 1).mul_(-1.0);
    flow.requires_grad_(true);
    auto w = torch::randn({1, 2, 4, 4}, f64());
    errors.emplace_back(
        "warp", support::gradcheck([&] { return (flow::backward_warp(src, flow) * w).sum(); }, {src, flow}, 32)
                    .rel_error);
  }
  {
    ModelConfig c;
    c.scale_r = 2;
    c.base_channels = 8;
    c.num_blocks = 2;
    c.growth = 4;
    c.decoder_layers = 3;
    Decoder dec(c);
    auto gen = Rng(10).torch_generator();
    dec->reset_parameters(gen);
    dec->to(torch::kFloat64);
    torch::manual_seed(11);
    std::vector<torch::Tensor> base, skips;
    for (int i = 0; i < 2; ++i) {
      base.push_back(torch::randn({1, 8, 4, 4}, f64()).requires_grad_(true));
      skips.push_back(torch::randn({1, 8, 4, 4}, f64()));
    }
    auto w = torch::randn({1, 3, 8, 8}, f64());
    auto params = dec->parameters();
    params.insert(params.end(), base.begin(), base.end());
    errors.emplace_back("decoder",
                        support::gradcheck([&] { return (dec->forward(base, skips).residual * w).sum(); }, params, 12)
                            .rel_error);
  }
  const double dt = seconds_since(t0);
  std::string summary;
  for (const auto& [name, err] : errors) {
    o.require(err < kGradRelTol, fmt::format("{} rel error {:.3g}", name, err));
    summary += fmt::format("{}{} {:.1e}", summary.empty() ? "" : ", ", name, err);
  }
  o.require(dt < kGradBudgetSeconds, fmt::format("took {:.1f} s", dt));
  if (o.pass) o.detail = summary + fmt::format(", {:.1f} s", dt);
  return o;
}

Outcome pixel_shuffle_checks() {
  Outcome o;
  auto x = torch::arange(16, torch::kFloat32).view({1, 16, 1, 1});
  auto y = pixel_shuffle(x, 4);
  bool formula = y.sizes() == torch::IntArrayRef({1, 1, 4, 4});
  for (int dy = 0; formula && dy < 4; ++dy)
    for (int dx = 0; dx < 4; ++dx) formula = formula && y[0][0][dy][dx].item<float>() == static_cast<float>(dy * 4 + dx);
  o.require(formula, "1x1x16 enumeration differs from the index formula");

  torch::manual_seed(6);
  for (int r : {2, 3, 4}) {
    auto z = torch::randn({2, 3 * r * r, 5, 4});
    auto s = pixel_shuffle(z, r);
    o.require(torch::equal(pixel_unshuffle(s, r), z), fmt::format("unshuffle(shuffle) != id at r={}", r));
    o.require(torch::equal(pixel_shuffle(pixel_unshuffle(s, r), r), s), fmt::format("shuffle(unshuffle) != id at r={}", r));
    o.require(torch::equal(std::get<0>(s.flatten().sort()), std::get<0>(z.flatten().sort())),
              fmt::format("value multiset changed at r={}", r));
  }
  if (o.pass) o.detail = "formula, bijection and multiset hold for r in {2, 3, 4}";
  return o;
}

Outcome loss_algebra() {
  Outcome o;
  ModelConfig c;
  c.base_channels = 8;
  c.growth = 4;
  c.num_blocks = 2;
  c.encoder_layers = 2;
  c.decoder_layers = 2;
  c.lambda_m = 0.5;
  c.lambda_s = 1.0;
  c.lambda_f = 2.0;
  const auto cfg = validate_config(c);
  data::Dataset ds;
  ds.index.stride_s = 2;
  ds.hr_clips.push_back(data::synthesize_clip(14, 32, 32, 10));
  ds.index.clips.push_back(data::ClipEntry{"a", {}, {}, 14});

  const auto dir = fs::temp_directory_path() / "stvun_acceptance_loss";
  fs::remove_all(dir);
  auto s = train::desk_schedule(train::Phase::Joint);
  s.total_iters = 200;
  s.batch_size = 1;
  s.patch_size = 16;
  s.checkpoint_every = 0;
  train::TrainOptions opt;
  opt.out_dir = dir;
  opt.log_name = "loss.csv";
  double worst = 0.0;
  std::int64_t reports = 0;
  opt.on_report = [&](const train::LossReport& r) {
    worst = std::max(worst, std::abs(r.total - (0.5 * r.l_m + 1.0 * r.l_s + 2.0 * r.l_f)));
    ++reports;
  };
  Rng rng(3);
  auto net = make_network(cfg, rng);
  train::Trainer trainer(net, cfg, s, ds, rng.fork(), opt);
  trainer.run_for(200);

  std::ifstream in(dir / "loss.csv");
  std::string line;
  std::getline(in, line);
  std::int64_t rows = 0;
  while (std::getline(in, line)) {
    std::vector<double> v;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) v.push_back(std::stod(cell));
    worst = std::max(worst, std::abs(v[4] - (0.5 * v[1] + 1.0 * v[2] + 2.0 * v[3])));
    ++rows;
  }
  o.require(reports == 200 && rows == 200, fmt::format("{} reports, {} logged rows", reports, rows));
  o.require(worst < kLossTotalTol, fmt::format("total off by {:.3g}", worst));

  const auto pre = train::paper_schedule(train::Phase::Pretrain);
  const auto joint = train::paper_schedule(train::Phase::Joint);
  const bool steps = train::learning_rate_at(pre, 0) == 1e-4 && train::learning_rate_at(pre, 99999) == 1e-4 &&
                     train::learning_rate_at(pre, 100000) == 5e-5 && train::learning_rate_at(pre, 199999) == 5e-5 &&
                     train::learning_rate_at(pre, 200000) == 2.5e-5 && train::learning_rate_at(joint, 0) == 5e-5 &&
                     train::learning_rate_at(joint, 99999) == 5e-5 && train::learning_rate_at(joint, 100000) == 2.5e-5 &&
                     train::learning_rate_at(joint, 300000) == 6.25e-6;
  o.require(steps, "learning-rate step function not exact at decay boundaries");
  if (o.pass) o.detail = fmt::format("200 steps, max |total - weighted sum| {:.2g}", worst);
  return o;
}

Outcome overfit() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  const auto cfg = validate_config(ModelConfig{});
  data::Dataset ds;
  ds.index.stride_s = cfg->stride_s;
  for (int k = 0; k < 2; ++k) {
    ds.hr_clips.push_back(data::synthesize_clip(32, 96, 96, k));
    ds.index.clips.push_back(data::ClipEntry{fmt::format("clip{:03d}", k), {}, {}, 32});
  }
  train::TrainOptions opt;
  opt.on_report = [&](const train::LossReport& r) {
    if (r.iteration % 250 == 0) {
      std::cerr << fmt::format("  [overfit] iter {} l_m {:.4f} l_s {:.4f} l_f {:.4f} ({:.0f} s)\n", r.iteration, r.l_m,
                               r.l_s, r.l_f, seconds_since(t0));
    }
  };
  auto rng = seed_all(0);
  auto net = train::pretrain(ds, cfg, train::desk_schedule(train::Phase::Pretrain), rng, opt);
  net = train::train_joint(ds, cfg, train::desk_schedule(train::Phase::Joint), net, rng, opt);

  const auto model = eval::evaluate_protocol(eval::network_model(net), ds, cfg);
  const auto base = eval::evaluate_protocol(eval::bilinear_baseline(cfg->scale_r), ds, cfg);
  const double center_gain = model.center.psnr - base.center.psnr;
  const double interp_gain = model.intermediate.psnr - base.intermediate.psnr;
  const double dt = seconds_since(t0);
  o.detail = fmt::format("center {:.2f} vs bilinear {:.2f} (+{:.2f} dB), intermediate {:.2f} vs blended {:.2f} "
                         "(+{:.2f} dB), {:.0f} s",
                         model.center.psnr, base.center.psnr, center_gain, model.intermediate.psnr,
                         base.intermediate.psnr, interp_gain, dt);
  o.pass = center_gain >= kCenterMarginDb && interp_gain >= kIntermediateMarginDb;
  return o;
}

Outcome protocol_integrity() {
  Outcome o;
  data::Dataset ds;
  for (int k = 0; k < 2; ++k) {
    ds.hr_clips.push_back(data::synthesize_clip(k == 0 ? 11 : 10, 48, 48, 60 + k));
    ds.index.clips.push_back(data::ClipEntry{fmt::format("t{}", k), {}, {}, k == 0 ? 11 : 10});
  }
  const auto cfg = validate_config(ModelConfig{});
  std::vector<std::int64_t> seen;
  std::int64_t requests = 0;
  auto identity = [&](const eval::WindowRequest& req) {
    ++requests;
    seen.insert(seen.end(), req.source_frames.begin(), req.source_frames.end());
    const auto& frames = ds.hr_clips[req.clip].frames;
    const auto src = req.source_frames[cfg->center_index()];
    eval::WindowPrediction p;
    p.center = frames[src].pixels;
    for (std::size_t k = 0; k < req.t_ins.size(); ++k) p.intermediates.push_back(frames[src + 1].pixels);
    return p;
  };
  const auto report = eval::evaluate_protocol(identity, ds, cfg);
  bool even = !seen.empty();
  for (auto s : seen) even = even && s % 2 == 0;
  o.require(even, "an odd frame reached the model");
  o.require(std::isinf(report.overall.psnr) && report.overall.psnr > 0, "PSNR is not +inf");
  o.require(report.overall.ssim == 1.0, fmt::format("SSIM {}", report.overall.ssim));
  o.require(report.intermediate.count == 5 + 4, fmt::format("{} intermediates scored", report.intermediate.count));
  if (o.pass) {
    o.detail = fmt::format("{} windows, {} source slots all even, PSNR inf, SSIM {}", requests, seen.size(),
                           report.overall.ssim);
  }
  return o;
}

Outcome metric_oracles() {
  Outcome o;
  torch::manual_seed(8);
  auto a = torch::rand({3, 16, 16}, f64());
  auto sign = torch::where(torch::rand({3, 16, 16}, f64()) < 0.5, -1.0, 1.0).to(torch::kFloat64);
  auto b = a + 0.1 * sign;
  const double p = eval::psnr(a, b);
  o.require(std::abs(p - 20.0) < kPsnrTol, fmt::format("PSNR {:.12f}", p));

  double worst = 0.0;
  for (int k = 0; k < 4; ++k) {
    auto x = torch::rand({3, 16, 16});
    auto y = (x + 0.1 * (k + 1) * torch::randn({3, 16, 16})).clamp(0, 1);
    worst = std::max(worst, std::abs(eval::ssim(x, y) - oracles::ssim_oracle(x, y)));
  }
  o.require(worst < kSsimTol, fmt::format("SSIM error {:.3g}", worst));
  if (o.pass) o.detail = fmt::format("PSNR {:.12f} dB, SSIM max error {:.2g}", p, worst);
  return o;
}

Outcome ablation_structure() {
  Outcome o;
  auto count = [](const ModelConfig& c) {
    Rng rng(1);
    auto net = make_network(validate_config(c), rng);
    std::int64_t n = 0;
    for (const auto& p : net->parameters()) n += p.numel();
    return n;
  };
  ModelConfig full;
  auto no_efst = full;
  no_efst.ablation.disable_efst = true;
  auto no_d = full;
  no_d.ablation.use_efst_instead_of_D = true;
  const auto n_full = count(full), n_no_efst = count(no_efst), n_no_d = count(no_d);
  o.require(n_no_efst < n_full, "no-efst is not smaller");
  o.require(n_no_d == n_full, "no-D changes the parameter count");
  o.require(analytic_parameter_count(full).total() == n_full, "closed-form count differs");
  o.detail = fmt::format("full {}, no-efst {}, no-D {}", n_full, n_no_efst, n_no_d);
  return o;
}

Outcome pixel_budget() {
  Outcome o;
  const auto cfg = validate_config(ModelConfig{});
  Rng rng(2);
  auto net = make_network(cfg, rng);
  std::vector<Frame> window;
  torch::manual_seed(9);
  for (int t = 0; t < cfg->window_size; ++t) window.push_back(Frame{torch::rand({3, 12, 10}), t});
  const auto res = forward_window(net, window, uniform_t_ins(3));
  std::int64_t pixels = res.hr_center.height() * res.hr_center.width();
  for (const auto& [t, f] : res.intermediates) pixels += f.height() * f.width();
  const double per_input = static_cast<double>(pixels) / (12.0 * 10.0);
  o.require(res.intermediates.size() == 3, "expected three intermediates");
  o.require(pixels == 64 * 12 * 10, fmt::format("{} output pixels per input pixel", per_input));
  o.detail = fmt::format("{} HR pixels per LR pixel", per_input);
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app("Acceptance checks");
  std::vector<std::string> only, skip;
  app.add_option("--only", only, "Run only these criteria");
  app.add_option("--skip", skip, "Skip these criteria");
  CLI11_PARSE(app, argc, argv);

  const std::vector<Criterion> criteria = {
      {"flow_endpoints", "flow scaling endpoint identities", flow_endpoints},
      {"flow_midpoint", "flow scaling midpoint", flow_midpoint},
      {"warp", "warp identities", warp_identities},
      {"efst", "EFST invariants", efst_invariants},
      {"gradients", "finite-difference gradient suite", gradient_suite},
      {"pixel_shuffle", "pixel shuffle", pixel_shuffle_checks},
      {"loss_algebra", "loss algebra and learning-rate steps", loss_algebra},
      {"overfit", "desk-preset overfit beats bilinear baselines", overfit},
      {"protocol", "odd/even protocol integrity", protocol_integrity},
      {"metrics", "PSNR and SSIM oracles", metric_oracles},
      {"ablation", "ablation parameter structure", ablation_structure},
      {"pixel_budget", "64 output pixels per input pixel", pixel_budget},
  };
  auto listed = [](const std::vector<std::string>& v, const std::string& id) {
    return std::find(v.begin(), v.end(), id) != v.end();
  };

  int failed = 0, ran = 0;
  for (const auto& c : criteria) {
    if ((!only.empty() && !listed(only, c.id)) || listed(skip, c.id)) continue;
    ++ran;
    Outcome out;
    try {
      out = c.run();
    } catch (const std::exception& e) {
      out.pass = false;
      out.detail = std::string("exception: ") + e.what();
    }
    if (!out.pass) ++failed;
    std::cout << fmt::format("{} {:<14} {} ({})", out.pass ? "PASS" : "FAIL", c.id, c.title, out.detail) << std::endl;
  }
  std::cout << fmt::format("{}/{} criteria passed", ran - failed, ran) << std::endl;
  return failed == 0 && ran > 0 ? 0 : 1;
}
