#pragma once

#include "stvun/core_types.hpp"
#include "stvun/decoder.hpp"
#include "stvun/efst.hpp"
#include "stvun/encoder.hpp"
#include "stvun/flow_interp.hpp"

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace stvun {

struct ForwardOptions {
  bool diagnostics = false;  // keep scores and flows in the output
};

struct ForwardOutput {
  torch::Tensor center;           // Ŷ_c, [N, 3, rH, rW]
  std::vector<TimeIndex> t_ins;   // sorted
  std::vector<torch::Tensor> intermediates;  // Ŷ_T per t_in
  std::vector<torch::Tensor> lr_blends;      // X̂_T per t_in
  // Diagnostics.
  std::vector<torch::Tensor> scores;  // per block, [N, T, 1, H, W]
  std::optional<flow::FlowPair> flows;
};

struct ParameterBreakdown {
  std::int64_t encoder = 0;
  std::int64_t efst = 0;
  std::int64_t decoder = 0;
  std::int64_t flow = 0;

  std::int64_t total() const { return encoder + efst + decoder + flow; }
  bool operator==(const ParameterBreakdown&) const = default;
};

/// Closed-form parameter count for a configuration.
ParameterBreakdown analytic_parameter_count(const ModelConfig& config);

/// The whole space-time upsampling network.
///
/// Forward pass for a window of LR frames: encode every frame with shared
/// weights; fuse each block with EFST; decode with the center frame's
/// features as base and the fused maps as skips, keeping the per-block trace
/// D; then, per T_in, scale the center-pair flows, warp the center pair's
/// features and frames, and decode again with the warped features as base and
/// D as skips (Ẽ with the "no-D" ablation).
class StvunNetImpl : public torch::nn::Module {
 public:
  explicit StvunNetImpl(const ValidatedConfig& config);

  /// lr: [N, window, 3, h, w]. Every t_in must lie strictly inside (0, 1);
  /// an empty list runs the spatial path only and never calls the flow
  /// estimator.
  ForwardOutput forward(const torch::Tensor& lr, std::vector<TimeIndex> t_ins, const ForwardOptions& options = {});

  /// Deterministic initialization from `rng`.
  void reset_parameters(Rng& rng);

  ParameterBreakdown count_parameters() const;

  /// Encoder + EFST + decoder, the parameters trained by VSR pretraining.
  std::vector<torch::Tensor> spatial_parameters() const;
  std::vector<torch::Tensor> flow_parameters() const;

  const ModelConfig& config() const { return config_.get(); }
  Encoder& encoder() { return encoder_; }
  std::vector<EfstBlock>& efst() { return efst_; }
  Decoder& decoder() { return decoder_; }
  flow::FlowEstimatorImpl& flow_estimator() { return *flow_; }
  std::int64_t flow_calls() const { return flow_calls_; }

 private:
  ValidatedConfig config_;
  Encoder encoder_{nullptr};
  std::vector<EfstBlock> efst_;
  Decoder decoder_{nullptr};
  std::shared_ptr<flow::FlowEstimatorImpl> flow_;
  std::int64_t flow_calls_ = 0;
};
TORCH_MODULE(StvunNet);

StvunNet make_network(const ValidatedConfig& config, Rng& rng);

struct WindowResult {
  Frame hr_center;
  std::vector<std::pair<TimeIndex, Frame>> intermediates;  // sorted by T_in
  std::vector<torch::Tensor> scores;                       // diagnostics
  std::optional<FlowField> flow_forward, flow_backward;    // diagnostics
  std::vector<Frame> lr_blends;                            // diagnostics
};

/// Runs one window (inference mode, no gradients).
WindowResult forward_window(StvunNet& net, const std::vector<Frame>& window, const std::vector<TimeIndex>& t_ins,
                            bool diagnostics = false);

/// k / (n + 1) for k = 1..n.
std::vector<TimeIndex> uniform_t_ins(int n);

/// Called once per processed window with the center index and its result.
using WindowObserver = std::function<void(std::int64_t center, const WindowResult&)>;

/// Slides the window over an LR clip one frame at a time, reflecting frame
/// indices at the clip ends. Output interleaves the HR input frames with the
/// requested intermediates of every gap: L + (L - 1) * |t_ins| frames.
Clip upsample_video(StvunNet& net, const Clip& lr, const std::vector<TimeIndex>& t_ins,
                    const WindowObserver& observer = {});

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

inline constexpr std::int64_t kCheckpointVersion = 1;

struct CheckpointMeta {
  std::string phase;  // "init", "pretrain" or "joint"
  std::int64_t iteration = 0;
  std::string rng_state;
};

/// Raised when a checkpoint's architecture does not match the requested one.
class CheckpointMismatch : public Error {
 public:
  explicit CheckpointMismatch(std::vector<std::string> diff);
  const std::vector<std::string>& diff() const noexcept { return diff_; }

 private:
  std::vector<std::string> diff_;
};

void save_checkpoint(const std::filesystem::path& path, StvunNet& net, const CheckpointMeta& meta,
                     torch::optim::Optimizer* optimizer = nullptr);

/// Config stored in a checkpoint, without loading parameters.
ModelConfig read_checkpoint_config(const std::filesystem::path& path);

/// Phase, iteration and sampling state stored in a checkpoint.
CheckpointMeta read_checkpoint_meta(const std::filesystem::path& path);

/// Loads parameters into `net` (and optimizer state when given). Throws
/// CheckpointMismatch if the stored fingerprint differs from `net`'s config.
CheckpointMeta load_checkpoint(const std::filesystem::path& path, StvunNet& net,
                               torch::optim::Optimizer* optimizer = nullptr);

/// Stable digest of the given tensors' bytes, for "parameters unchanged" checks.
std::string parameter_digest(const std::vector<torch::Tensor>& params);

}  // namespace stvun
