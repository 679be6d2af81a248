#include "stvun/encoder.hpp"

#include <fmt/format.h>

namespace stvun {

std::int64_t DenseBlockSpec::parameter_count() const {
  std::int64_t total = 0;
  std::int64_t in = channels;
  for (int l = 0; l < layers; ++l) {
    total += conv_parameter_count(in, growth, kernel);
    in += growth;
  }
  return total + conv_parameter_count(in, channels, 1);
}

DenseBlockImpl::DenseBlockImpl(DenseBlockSpec spec) : spec_(spec) {
  std::int64_t in = spec.channels;
  for (int l = 0; l < spec.layers; ++l) {
    layers_.push_back(register_module(fmt::format("layer{}", l), make_conv(in, spec.growth, spec.kernel)));
    in += spec.growth;
  }
  fusion_ = register_module("fusion", make_conv(in, spec.channels, 1));
}

torch::Tensor DenseBlockImpl::forward(const torch::Tensor& x) {
  std::vector<torch::Tensor> features{x};
  for (auto& layer : layers_) features.push_back(lrelu(layer->forward(torch::cat(features, 1))));
  return x + fusion_->forward(torch::cat(features, 1));
}

void DenseBlockImpl::reset_parameters(torch::Generator& gen) {
  for (auto& layer : layers_) init_conv(layer, gen);
  init_conv(fusion_, gen, 0.1);
}

EncoderImpl::EncoderImpl(const ModelConfig& config) {
  head_ = register_module("head", make_conv(3, config.base_channels, 3));
  const DenseBlockSpec spec{config.base_channels, config.encoder_layers, config.growth, 3};
  for (int i = 0; i < config.num_blocks; ++i) {
    blocks_.push_back(register_module(fmt::format("block{}", i), DenseBlock(spec)));
  }
}

std::vector<torch::Tensor> EncoderImpl::forward(const torch::Tensor& frames) {
  std::vector<torch::Tensor> outputs;
  auto x = lrelu(head_->forward(frames));
  for (auto& block : blocks_) {
    x = block->forward(x);
    outputs.push_back(x);
  }
  return outputs;
}

void EncoderImpl::reset_parameters(torch::Generator& gen) {
  init_conv(head_, gen);
  for (auto& block : blocks_) block->reset_parameters(gen);
}

std::int64_t EncoderImpl::parameter_count(const ModelConfig& config) {
  const DenseBlockSpec spec{config.base_channels, config.encoder_layers, config.growth, 3};
  return conv_parameter_count(3, config.base_channels, 3) + config.num_blocks * spec.parameter_count();
}

FeaturePyramid encode(Encoder& encoder, const torch::Tensor& lr, std::vector<TimeIndex> times) {
  if (lr.dim() != 5 || lr.size(2) != 3) throw ShapeError("encode expects [N, T, 3, H, W] frames");
  const auto N = lr.size(0);
  const auto T = lr.size(1);
  if (times.empty()) {
    for (std::int64_t t = 0; t < T; ++t) times.emplace_back(t);
  }
  if (static_cast<std::int64_t>(times.size()) != T) throw ShapeError("time labels do not match T");
  auto maps = encoder->forward(lr.reshape({N * T, 3, lr.size(3), lr.size(4)}));
  FeaturePyramid pyramid;
  pyramid.times = std::move(times);
  for (auto& m : maps) pyramid.blocks.push_back(m.view({N, T, m.size(1), m.size(2), m.size(3)}));
  return pyramid;
}

FeaturePyramid encode(Encoder& encoder, const std::vector<Frame>& frames) {
  if (frames.empty()) throw ShapeError("encode needs at least one frame");
  std::vector<torch::Tensor> stack;
  std::vector<TimeIndex> times;
  for (const auto& f : frames) {
    if (f.height() != frames[0].height() || f.width() != frames[0].width()) {
      throw ShapeError("encode: frames differ in size");
    }
    stack.push_back(f.pixels);
    times.push_back(f.time);
  }
  auto lr = torch::stack(stack).unsqueeze(0).to(encoder->parameters().front().scalar_type());
  return encode(encoder, lr, std::move(times));
}

Encoder init_encoder(const ValidatedConfig& config, Rng& rng) {
  Encoder encoder(config.get());
  auto gen = rng.torch_generator();
  encoder->reset_parameters(gen);
  return encoder;
}

}  // namespace stvun
