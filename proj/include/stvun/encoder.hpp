#pragma once

#include "stvun/core_types.hpp"
#include "stvun/layers.hpp"

#include <vector>

namespace stvun {

/// Layout of one dense block: `layers` 3x3 convolutions, each seeing the
/// concatenation of the block input and every earlier layer output and adding
/// `growth` channels, then a 1x1 fusion back to `channels`.
struct DenseBlockSpec {
  int channels = 64;
  int layers = 4;
  int growth = 32;
  int kernel = 3;

  std::int64_t parameter_count() const;
};

/// Dense block with a local residual: out = x + fuse(concat[x, l1, ..., lL]).
class DenseBlockImpl : public torch::nn::Module {
 public:
  explicit DenseBlockImpl(DenseBlockSpec spec);

  torch::Tensor forward(const torch::Tensor& x);
  void reset_parameters(torch::Generator& gen);
  const DenseBlockSpec& spec() const { return spec_; }

 private:
  DenseBlockSpec spec_;
  std::vector<torch::nn::Conv2d> layers_;
  torch::nn::Conv2d fusion_{nullptr};
};
TORCH_MODULE(DenseBlock);

/// Shared-weight per-frame feature extractor: a 3x3 lift from RGB to C
/// channels followed by B dense blocks; every block output is kept.
class EncoderImpl : public torch::nn::Module {
 public:
  explicit EncoderImpl(const ModelConfig& config);

  /// frames: [M, 3, H, W] -> one [M, C, H, W] map per block.
  std::vector<torch::Tensor> forward(const torch::Tensor& frames);
  void reset_parameters(torch::Generator& gen);

  static std::int64_t parameter_count(const ModelConfig& config);

 private:
  torch::nn::Conv2d head_{nullptr};
  std::vector<DenseBlock> blocks_;
};
TORCH_MODULE(Encoder);

/// Encodes a window of frames `lr` [N, T, 3, H, W]. Every frame passes through
/// the same weights independently, so permuting T permutes the pyramid.
FeaturePyramid encode(Encoder& encoder, const torch::Tensor& lr, std::vector<TimeIndex> times = {});
FeaturePyramid encode(Encoder& encoder, const std::vector<Frame>& frames);

Encoder init_encoder(const ValidatedConfig& config, Rng& rng);

}  // namespace stvun
