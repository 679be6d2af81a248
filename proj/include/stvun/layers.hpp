#pragma once

#include <torch/torch.h>

#include <cstdint>

namespace stvun {

inline constexpr double kLeakySlope = 0.1;

inline torch::Tensor lrelu(const torch::Tensor& x) { return torch::leaky_relu(x, kLeakySlope); }

/// Stride-1 convolution with "same" output size. Zero padding unless
/// `replicate` is set.
torch::nn::Conv2d make_conv(std::int64_t in, std::int64_t out, std::int64_t kernel,
                            bool replicate = false);

/// Fan-in scaled uniform init for a LeakyReLU network; `scale` shrinks the
/// weights of layers that feed a residual sum. Bias starts at zero.
void init_conv(torch::nn::Conv2d& conv, torch::Generator& gen, double scale = 1.0);

inline std::int64_t conv_parameter_count(std::int64_t in, std::int64_t out, std::int64_t kernel) {
  return in * out * kernel * kernel + out;
}

/// Concatenate slot tensors [N, T, C, H, W] into [N, T*C, H, W].
inline torch::Tensor merge_time(const torch::Tensor& x) {
  return x.reshape({x.size(0), x.size(1) * x.size(2), x.size(3), x.size(4)});
}

}  // namespace stvun
