#pragma once

#include "stvun/core_types.hpp"
#include "stvun/encoder.hpp"

#include <vector>

namespace stvun {

struct DecodeResult {
  torch::Tensor residual;            // [N, 3, rH, rW]
  std::vector<torch::Tensor> trace;  // D^i, [N, C, H, W] per block
};

/// Shared-weight decoder. Block i reads a 1x1 merge of
/// [previous block output (zeros for the first block), base_i, skip_i] and runs
/// a dense block deeper than the encoder's; its output is D^i. A linear 3x3
/// head maps the last output to 3 r^2 channels, pixel-shuffled to the residual.
class DecoderImpl : public torch::nn::Module {
 public:
  explicit DecoderImpl(const ModelConfig& config);

  DecodeResult forward(const std::vector<torch::Tensor>& base, const std::vector<torch::Tensor>& skips);
  void reset_parameters(torch::Generator& gen);

  int scale() const { return scale_; }
  static std::int64_t parameter_count(const ModelConfig& config);

 private:
  int scale_;
  int channels_;
  std::vector<torch::nn::Conv2d> merges_;
  std::vector<DenseBlock> blocks_;
  torch::nn::Conv2d head_{nullptr};
};
TORCH_MODULE(Decoder);

/// [N, C r^2, H, W] -> [N, C, rH, rW] with
/// out(c, r y + dy, r x + dx) = in(c r^2 + dy r + dx, y, x).
torch::Tensor pixel_shuffle(const torch::Tensor& x, int r);
/// Inverse of `pixel_shuffle`.
torch::Tensor pixel_unshuffle(const torch::Tensor& x, int r);

/// Bilinear x r upsampling, half-pixel (align_corners = false) convention.
torch::Tensor bilinear_upsample(const torch::Tensor& x, int r);

/// u(lr_base) + residual. No clamping; outputs are clamped only when written.
torch::Tensor compose_output(const torch::Tensor& lr_base, const torch::Tensor& residual, int r);
Frame compose_output(const Frame& lr_base, const torch::Tensor& residual, int r);

}  // namespace stvun
