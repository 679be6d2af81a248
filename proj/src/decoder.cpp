#include "stvun/decoder.hpp"

#include <fmt/format.h>

namespace F = torch::nn::functional;

namespace stvun {

namespace {

DenseBlockSpec decoder_block_spec(const ModelConfig& config) {
  return DenseBlockSpec{config.base_channels, config.decoder_layers, config.growth, 3};
}

}  // namespace

DecoderImpl::DecoderImpl(const ModelConfig& config)
    : scale_(config.scale_r), channels_(config.base_channels) {
  const auto spec = decoder_block_spec(config);
  for (int i = 0; i < config.num_blocks; ++i) {
    merges_.push_back(register_module(fmt::format("merge{}", i), make_conv(3 * channels_, channels_, 1)));
    blocks_.push_back(register_module(fmt::format("block{}", i), DenseBlock(spec)));
  }
  head_ = register_module("head", make_conv(channels_, 3 * scale_ * scale_, 3));
}

std::int64_t DecoderImpl::parameter_count(const ModelConfig& config) {
  const std::int64_t C = config.base_channels;
  const std::int64_t r = config.scale_r;
  return config.num_blocks * (conv_parameter_count(3 * C, C, 1) + decoder_block_spec(config).parameter_count()) +
         conv_parameter_count(C, 3 * r * r, 3);
}

DecodeResult DecoderImpl::forward(const std::vector<torch::Tensor>& base, const std::vector<torch::Tensor>& skips) {
  if (base.size() != blocks_.size() || skips.size() != blocks_.size()) {
    throw ShapeError(fmt::format("decoder expects {} base and skip maps, got {} and {}", blocks_.size(),
                                 base.size(), skips.size()));
  }
  DecodeResult result;
  torch::Tensor previous = torch::zeros_like(base[0]);
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    if (base[i].sizes() != skips[i].sizes() || base[i].sizes() != previous.sizes()) {
      throw ShapeError(fmt::format("decoder block {}: base/skip shapes disagree", i));
    }
    auto merged = merges_[i]->forward(torch::cat({previous, base[i], skips[i]}, 1));
    previous = blocks_[i]->forward(merged);
    result.trace.push_back(previous);
  }
  result.residual = pixel_shuffle(head_->forward(previous), scale_);
  return result;
}

void DecoderImpl::reset_parameters(torch::Generator& gen) {
  for (auto& m : merges_) init_conv(m, gen);
  for (auto& b : blocks_) b->reset_parameters(gen);
  init_conv(head_, gen, 0.1);
}

torch::Tensor pixel_shuffle(const torch::Tensor& x, int r) {
  if (x.dim() != 4) throw ShapeError("pixel_shuffle expects [N, C r^2, H, W]");
  const auto N = x.size(0);
  const auto Cr2 = x.size(1);
  const auto H = x.size(2);
  const auto W = x.size(3);
  if (r < 1 || Cr2 % (r * r) != 0) {
    throw ShapeError(fmt::format("pixel_shuffle: {} channels not divisible by {}", Cr2, r * r));
  }
  const auto C = Cr2 / (r * r);
  return x.reshape({N, C, r, r, H, W}).permute({0, 1, 4, 2, 5, 3}).reshape({N, C, H * r, W * r});
}

torch::Tensor pixel_unshuffle(const torch::Tensor& x, int r) {
  if (x.dim() != 4) throw ShapeError("pixel_unshuffle expects [N, C, rH, rW]");
  const auto N = x.size(0);
  const auto C = x.size(1);
  if (r < 1 || x.size(2) % r != 0 || x.size(3) % r != 0) {
    throw ShapeError("pixel_unshuffle: extent not divisible by r");
  }
  const auto H = x.size(2) / r;
  const auto W = x.size(3) / r;
  return x.reshape({N, C, H, r, W, r}).permute({0, 1, 3, 5, 2, 4}).reshape({N, C * r * r, H, W});
}

torch::Tensor bilinear_upsample(const torch::Tensor& x, int r) {
  return F::interpolate(x, F::InterpolateFuncOptions()
                               .size(std::vector<std::int64_t>{x.size(-2) * r, x.size(-1) * r})
                               .mode(torch::kBilinear)
                               .align_corners(false));
}

torch::Tensor compose_output(const torch::Tensor& lr_base, const torch::Tensor& residual, int r) {
  if (lr_base.dim() != 4 || residual.dim() != 4 || residual.size(0) != lr_base.size(0) ||
      residual.size(1) != lr_base.size(1) || residual.size(2) != lr_base.size(2) * r ||
      residual.size(3) != lr_base.size(3) * r) {
    throw ShapeError("compose_output: residual must be the LR base scaled by r");
  }
  return bilinear_upsample(lr_base, r) + residual;
}

Frame compose_output(const Frame& lr_base, const torch::Tensor& residual, int r) {
  auto res = residual.dim() == 3 ? residual.unsqueeze(0) : residual;
  auto out = compose_output(lr_base.pixels.unsqueeze(0).to(res.scalar_type()), res, r);
  return Frame{out.squeeze(0).to(torch::kFloat32).contiguous(), lr_base.time};
}

}  // namespace stvun
