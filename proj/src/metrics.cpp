#include "stvun/metrics.hpp"

#include "stvun/decoder.hpp"

#include <nlohmann/json.hpp>
#include <fmt/format.h>

#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace fs = std::filesystem;

namespace stvun::eval {

namespace {

torch::Tensor prepare(const torch::Tensor& x, const MetricOptions& options) {
  auto t = x.detach().to(torch::kFloat64);
  if (t.dim() == 2) t = t.unsqueeze(0);
  if (options.luma) {
    if (t.size(0) != 3) throw ShapeError("luma metrics need RGB input");
    t = (0.299 * t[0] + 0.587 * t[1] + 0.114 * t[2]).unsqueeze(0);
  }
  if (options.crop > 0) {
    const auto c = options.crop;
    if (t.size(-2) <= 2 * c || t.size(-1) <= 2 * c) throw ShapeError("crop removes the whole frame");
    t = t.narrow(-2, c, t.size(-2) - 2 * c).narrow(-1, c, t.size(-1) - 2 * c);
  }
  return t;
}

torch::Tensor ssim_window() {
  static const torch::Tensor window = [] {
    const auto taps = data::gaussian_taps(1.5);  // radius 5: 11 taps
    auto g = torch::tensor(taps, torch::kFloat64);
    return torch::outer(g, g).view({1, 1, 11, 11});
  }();
  return window;
}

}  // namespace

double psnr(const torch::Tensor& a, const torch::Tensor& b, const MetricOptions& options) {
  if (a.sizes() != b.sizes()) throw ShapeError("psnr: shapes differ");
  const auto x = prepare(a, options);
  const auto y = prepare(b, options);
  const double mse = (x - y).pow(2).mean().item<double>();
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(1.0 / mse);
}

double psnr(const Frame& a, const Frame& b, const MetricOptions& options) {
  return psnr(a.pixels, b.pixels, options);
}

double ssim(const torch::Tensor& a, const torch::Tensor& b, const MetricOptions& options) {
  if (a.sizes() != b.sizes()) throw ShapeError("ssim: shapes differ");
  const auto x = prepare(a, options).unsqueeze(1);  // [C, 1, H, W]
  const auto y = prepare(b, options).unsqueeze(1);
  if (x.size(2) < 11 || x.size(3) < 11) throw ShapeError("ssim needs frames of at least 11x11");
  constexpr double C1 = 0.01 * 0.01;
  constexpr double C2 = 0.03 * 0.03;
  const auto w = ssim_window();
  auto filt = [&](const torch::Tensor& t) { return torch::conv2d(t, w); };
  const auto mx = filt(x);
  const auto my = filt(y);
  const auto sxx = filt(x * x) - mx * mx;
  const auto syy = filt(y * y) - my * my;
  const auto sxy = filt(x * y) - mx * my;
  const auto map = ((2 * mx * my + C1) * (2 * sxy + C2)) / ((mx * mx + my * my + C1) * (sxx + syy + C2));
  return map.mean({1, 2, 3}).mean().item<double>();
}

double ssim(const Frame& a, const Frame& b, const MetricOptions& options) {
  return ssim(a.pixels, b.pixels, options);
}

// ---------------------------------------------------------------------------

WindowModel network_model(StvunNet& net) {
  return [net](const WindowRequest& req) mutable {
    torch::NoGradGuard no_grad;
    net->eval();
    const auto dtype = net->parameters().front().scalar_type();
    auto out = net->forward(req.lr.unsqueeze(0).to(dtype), req.t_ins);
    WindowPrediction pred;
    pred.center = out.center.squeeze(0).to(torch::kFloat32);
    for (auto& m : out.intermediates) pred.intermediates.push_back(m.squeeze(0).to(torch::kFloat32));
    return pred;
  };
}

WindowModel bilinear_baseline(int scale_r) {
  return [scale_r](const WindowRequest& req) {
    const auto c = req.lr.size(0) / 2;
    const auto x3 = req.lr[c].unsqueeze(0);
    WindowPrediction pred;
    pred.center = bilinear_upsample(x3, scale_r).squeeze(0);
    if (!req.t_ins.empty()) {
      const auto blend = 0.5 * (x3 + req.lr[c + 1].unsqueeze(0));
      const auto up = bilinear_upsample(blend, scale_r).squeeze(0);
      for (std::size_t k = 0; k < req.t_ins.size(); ++k) pred.intermediates.push_back(up);
    }
    return pred;
  };
}

Aggregate aggregate(const std::vector<FrameScore>& scores) {
  Aggregate a;
  for (const auto& s : scores) {
    a.psnr += s.psnr;
    a.ssim += s.ssim;
    ++a.count;
  }
  if (a.count > 0) {
    a.psnr /= static_cast<double>(a.count);
    a.ssim /= static_cast<double>(a.count);
  }
  return a;
}

namespace {

Aggregate aggregate_kind(const std::vector<FrameScore>& scores, std::optional<OutputKind> kind) {
  std::vector<FrameScore> subset;
  for (const auto& s : scores) {
    if (!kind || s.kind == *kind) subset.push_back(s);
  }
  return aggregate(subset);
}

}  // namespace

EvalReport evaluate_protocol(const WindowModel& model, const data::Dataset& hr_testset, const ValidatedConfig& config,
                             const std::vector<TimeIndex>& t_ins, const MetricOptions& options) {
  const ModelConfig& cfg = config.get();
  for (const auto& t : t_ins) {
    if (t != TimeIndex(1, 2)) {
      throw DomainError("odd/even protocol only has ground truth at T_in = 1/2, got " + to_string(t));
    }
  }
  if (hr_testset.hr_clips.empty()) throw DataError("test set has no clips");
  const auto dp = data::degrade_params(cfg);
  const int center = cfg.center_index();

  EvalReport report;
  double model_seconds = 0.0;
  std::int64_t outputs = 0;
  for (std::size_t ci = 0; ci < hr_testset.hr_clips.size(); ++ci) {
    const Clip& clip = hr_testset.hr_clips[ci];
    const std::string name = ci < hr_testset.index.clips.size() ? hr_testset.index.clips[ci].name
                                                                 : fmt::format("clip{}", ci);
    const auto L = static_cast<std::int64_t>(clip.size());
    const auto K = (L + 1) / 2;  // even-numbered frames
    if (K < 2) throw DataError("clip '" + name + "' has fewer than two even frames");

    std::vector<torch::Tensor> lr;
    for (std::int64_t k = 0; k < K; ++k) lr.push_back(data::degrade_tensor(clip.frames[2 * k].pixels, dp));
    report.lr_height = lr[0].size(1);
    report.lr_width = lr[0].size(2);

    std::vector<FrameScore> clip_scores;
    for (std::int64_t c = 0; c < K; ++c) {
      WindowRequest req;
      req.clip = ci;
      std::vector<torch::Tensor> slots;
      for (int j = 0; j < cfg.window_size; ++j) {
        const auto k = data::reflect_time(c + j - center, K);
        slots.push_back(lr[k]);
        req.source_frames.push_back(2 * k);
      }
      req.lr = torch::stack(slots);
      const bool has_gap = c + 1 < K && 2 * c + 1 < L;
      if (has_gap) req.t_ins = t_ins;
      for (auto src : req.source_frames) {
        if (src % 2 != 0) throw DataError(fmt::format("protocol violation: odd frame {} fed to the model", src));
      }

      const auto t0 = std::chrono::steady_clock::now();
      const auto pred = model(req);
      model_seconds += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      outputs += 1 + static_cast<std::int64_t>(req.t_ins.size());

      const auto& gt_center = clip.frames[2 * c].pixels;
      clip_scores.push_back(FrameScore{name, 2 * c, OutputKind::Center, psnr(pred.center, gt_center, options),
                                       ssim(pred.center, gt_center, options)});
      if (pred.intermediates.size() != req.t_ins.size()) throw MismatchError("model returned wrong intermediate count");
      for (std::size_t k = 0; k < req.t_ins.size(); ++k) {
        const auto& gt = clip.frames[2 * c + 1].pixels;
        clip_scores.push_back(FrameScore{name, 2 * c + 1, OutputKind::Intermediate,
                                         psnr(pred.intermediates[k], gt, options),
                                         ssim(pred.intermediates[k], gt, options)});
      }
    }
    ClipSummary summary;
    summary.clip = name;
    summary.center = aggregate_kind(clip_scores, OutputKind::Center);
    summary.intermediate = aggregate_kind(clip_scores, OutputKind::Intermediate);
    summary.overall = aggregate(clip_scores);
    report.clips.push_back(summary);
    report.frames.insert(report.frames.end(), clip_scores.begin(), clip_scores.end());
  }
  report.center = aggregate_kind(report.frames, OutputKind::Center);
  report.intermediate = aggregate_kind(report.frames, OutputKind::Intermediate);
  report.overall = aggregate(report.frames);
  report.runtime_per_frame = outputs > 0 ? model_seconds / static_cast<double>(outputs) : 0.0;
  return report;
}

// ---------------------------------------------------------------------------

std::string format_metric(double value, int precision) {
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  return fmt::format("{:.{}f}", value, precision);
}

void write_frame_csv(const EvalReport& report, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw IOError(path, "cannot write CSV");
  out << "clip,frame,kind,psnr,ssim\n";
  for (const auto& f : report.frames) {
    out << f.clip << "," << f.frame << "," << (f.kind == OutputKind::Center ? "center" : "intermediate") << ","
        << format_metric(f.psnr, 6) << "," << format_metric(f.ssim, 6) << "\n";
  }
  if (!out) throw IOError(path, "write failed");
}

namespace {

nlohmann::json aggregate_json(const Aggregate& a) {
  nlohmann::json j;
  j["psnr"] = std::isinf(a.psnr) ? nlohmann::json("inf") : nlohmann::json(a.psnr);
  j["ssim"] = a.ssim;
  j["count"] = a.count;
  return j;
}

}  // namespace

void write_clip_json(const EvalReport& report, const fs::path& path) {
  nlohmann::json j;
  j["label"] = report.label;
  j["params"] = report.params;
  j["runtime_per_frame_s"] = report.runtime_per_frame;
  j["lr_resolution"] = {report.lr_width, report.lr_height};
  j["center"] = aggregate_json(report.center);
  j["intermediate"] = aggregate_json(report.intermediate);
  j["overall"] = aggregate_json(report.overall);
  for (const auto& c : report.clips) {
    j["clips"].push_back({{"clip", c.clip},
                          {"center", aggregate_json(c.center)},
                          {"intermediate", aggregate_json(c.intermediate)},
                          {"overall", aggregate_json(c.overall)}});
  }
  std::ofstream out(path);
  if (!out) throw IOError(path, "cannot write JSON");
  out << j.dump(2) << "\n";
}

std::string render_table(const std::vector<EvalReport>& reports) {
  auto pair = [](const Aggregate& a) { return format_metric(a.psnr, 2) + " / " + format_metric(a.ssim, 4); };
  std::ostringstream out;
  const auto header = fmt::format("{:<14} | {:<18} | {:<18} | {:<18} | {:>10} | {:>12}", "Method",
                                  "Center PSNR/SSIM", "Interp. PSNR/SSIM", "Overall PSNR/SSIM", "#Params",
                                  "Runtime (s)");
  out << header << "\n" << std::string(header.size(), '-') << "\n";
  for (const auto& r : reports) {
    const std::string params = r.params > 0 ? fmt::format("{:.2f}M", static_cast<double>(r.params) / 1e6) : "-";
    out << fmt::format("{:<14} | {:<18} | {:<18} | {:<18} | {:>10} | {:>12}", r.label, pair(r.center),
                       pair(r.intermediate), pair(r.overall), params, fmt::format("{:.4f}", r.runtime_per_frame))
        << "\n";
  }
  if (!reports.empty()) {
    out << fmt::format("Runtime per output frame at LR {}x{}\n", reports.front().lr_width, reports.front().lr_height);
  }
  return out.str();
}

}  // namespace stvun::eval
