#include "stvun/layers.hpp"

#include <cmath>

namespace stvun {

torch::nn::Conv2d make_conv(std::int64_t in, std::int64_t out, std::int64_t kernel, bool replicate) {
  auto opts = torch::nn::Conv2dOptions(in, out, kernel).stride(1).padding(kernel / 2).bias(true);
  if (replicate) opts.padding_mode(torch::kReplicate);
  return torch::nn::Conv2d(opts);
}

void init_conv(torch::nn::Conv2d& conv, torch::Generator& gen, double scale) {
  torch::NoGradGuard no_grad;
  const auto& w = conv->weight;
  const double fan_in = static_cast<double>(w.size(1) * w.size(2) * w.size(3));
  const double gain = std::sqrt(2.0 / (1.0 + kLeakySlope * kLeakySlope));
  const double bound = scale * gain * std::sqrt(3.0 / fan_in);
  w.uniform_(-bound, bound, gen);
  if (conv->bias.defined()) conv->bias.zero_();
}

}  // namespace stvun
