#pragma once

#include "stvun/core_types.hpp"
#include "stvun/dataio.hpp"
#include "stvun/model.hpp"

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

namespace stvun::eval {

struct MetricOptions {
  bool luma = false;  // score the BT.601 Y channel instead of RGB
  int crop = 0;       // pixels shaved from every border before scoring
};

/// 10 log10(1 / MSE) over all pixels and channels; +infinity for identical
/// inputs. Inputs are [3, H, W] (or any matching shape) in [0, 1].
double psnr(const torch::Tensor& a, const torch::Tensor& b, const MetricOptions& options = {});
double psnr(const Frame& a, const Frame& b, const MetricOptions& options = {});

/// Single-scale SSIM: 11x11 Gaussian window (sigma 1.5), K1 = 0.01,
/// K2 = 0.03, dynamic range 1, valid windows only, averaged over channels.
double ssim(const torch::Tensor& a, const torch::Tensor& b, const MetricOptions& options = {});
double ssim(const Frame& a, const Frame& b, const MetricOptions& options = {});

// ---------------------------------------------------------------------------
// Odd/even protocol
// ---------------------------------------------------------------------------

/// One window handed to the model under evaluation.
struct WindowRequest {
  std::size_t clip = 0;
  torch::Tensor lr;                         // [window, 3, h, w]
  std::vector<std::int64_t> source_frames;  // HR frame index behind each LR slot
  std::vector<TimeIndex> t_ins;             // empty at the last input frame
};

struct WindowPrediction {
  torch::Tensor center;                      // [3, H, W]
  std::vector<torch::Tensor> intermediates;  // [3, H, W] per t_in
};

using WindowModel = std::function<WindowPrediction(const WindowRequest&)>;

/// Wraps a network for the protocol.
WindowModel network_model(StvunNet& net);

/// u(X_c) for the center, u((X_c + X_{c+1}) / 2) for intermediates: the
/// network with zero residuals and zero flow.
WindowModel bilinear_baseline(int scale_r);

enum class OutputKind { Center, Intermediate };

struct FrameScore {
  std::string clip;
  std::int64_t frame = 0;  // HR frame index of the ground truth
  OutputKind kind = OutputKind::Center;
  double psnr = 0.0;
  double ssim = 0.0;
};

struct Aggregate {
  double psnr = 0.0;
  double ssim = 0.0;
  std::int64_t count = 0;
};

struct ClipSummary {
  std::string clip;
  Aggregate center, intermediate, overall;
};

struct EvalReport {
  std::string label = "STVUN";
  std::vector<FrameScore> frames;
  std::vector<ClipSummary> clips;
  Aggregate center, intermediate, overall;
  std::int64_t params = 0;
  double runtime_per_frame = 0.0;  // seconds per output frame, inference only
  std::int64_t lr_height = 0, lr_width = 0;
};

/// Arithmetic means over a set of frame scores.
Aggregate aggregate(const std::vector<FrameScore>& scores);

/// Degrades the even-numbered HR frames of every test clip into the LR input
/// sequence; centers are scored against the even HR frames they came from and
/// intermediates against the odd HR frames between them. Windows reflect at
/// the clip ends. Only even frames ever reach the model; each request is
/// checked before the call.
EvalReport evaluate_protocol(const WindowModel& model, const data::Dataset& hr_testset, const ValidatedConfig& config,
                             const std::vector<TimeIndex>& t_ins = {TimeIndex(1, 2)},
                             const MetricOptions& options = {});

std::string format_metric(double value, int precision);

void write_frame_csv(const EvalReport& report, const std::filesystem::path& path);
void write_clip_json(const EvalReport& report, const std::filesystem::path& path);
/// Text table: method, center / intermediate / overall PSNR-SSIM, #params and
/// runtime columns.
std::string render_table(const std::vector<EvalReport>& reports);

}  // namespace stvun::eval
