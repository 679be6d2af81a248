#include "stvun/efst.hpp"

namespace F = torch::nn::functional;

namespace stvun {

namespace {

torch::Tensor upsample_to(const torch::Tensor& x, const torch::Tensor& like) {
  return F::interpolate(x, F::InterpolateFuncOptions()
                               .size(std::vector<std::int64_t>{like.size(2), like.size(3)})
                               .mode(torch::kBilinear)
                               .align_corners(false));
}

}  // namespace

EfstBlockImpl::EfstBlockImpl(int channels, int window_size, bool early_only)
    : channels_(channels), window_size_(window_size), early_only_(early_only) {
  const int C = channels;
  early_ = register_module("early", make_conv(static_cast<std::int64_t>(window_size) * C, C, 1));
  if (early_only_) return;
  theta_ = register_module("theta", make_conv(C, C, 1));
  delta_ = register_module("delta", make_conv(C, C, 1));
  // Replicate padding keeps a spatially constant input constant at the borders.
  level1_ = register_module("level1", make_conv(static_cast<std::int64_t>(window_size) * C, C, 3, true));
  down1_ = register_module("down1", make_conv(2 * C, C, 3, true));
  down2_ = register_module("down2", make_conv(2 * C, C, 3, true));
  merge2_ = register_module("merge2", make_conv(C, C, 3, true));
  merge1_ = register_module("merge1", make_conv(C, C, 3, true));
  head_ = register_module("head", make_conv(C, 2 * C, 3, true));
}

std::int64_t EfstBlockImpl::parameter_count(int channels, int window_size, bool early_only) {
  const std::int64_t C = channels;
  const std::int64_t TC = static_cast<std::int64_t>(window_size) * C;
  std::int64_t total = conv_parameter_count(TC, C, 1);
  if (early_only) return total;
  total += 2 * conv_parameter_count(C, C, 1);
  total += conv_parameter_count(TC, C, 3);
  total += 2 * conv_parameter_count(2 * C, C, 3);
  total += 2 * conv_parameter_count(C, C, 3);
  total += conv_parameter_count(C, 2 * C, 3);
  return total;
}

torch::Tensor EfstBlockImpl::early_fuse(const torch::Tensor& features) {
  if (features.dim() != 5 || features.size(1) != window_size_ || features.size(2) != channels_) {
    throw ShapeError("early_fuse expects [N, window, C, H, W] features");
  }
  return early_->forward(merge_time(features));
}

constexpr double kScoreLogitBound = 15.0;

torch::Tensor EfstBlockImpl::confidence_scores(const torch::Tensor& early, const torch::Tensor& features) {
  const auto N = features.size(0);
  const auto T = features.size(1);
  const auto C = features.size(2);
  const auto H = features.size(3);
  const auto W = features.size(4);
  auto projected = theta_->forward(features.reshape({N * T, C, H, W})).view({N, T, C, H, W});
  // delta(E) has no time dependence: computed once per block.
  auto reference = delta_->forward(early).unsqueeze(1);
  // Bounded logits keep float32 scores strictly inside (0, 1).
  const auto logits = (projected * reference).sum(2, /*keepdim=*/true);
  return torch::sigmoid(logits.clamp(-kScoreLogitBound, kScoreLogitBound));
}

std::pair<torch::Tensor, torch::Tensor> EfstBlockImpl::spatiotemporal_weights(const torch::Tensor& weighted) {
  auto l1 = lrelu(level1_->forward(merge_time(weighted)));
  auto l2 = lrelu(down1_->forward(avg_max_pool(l1)));
  auto l3 = lrelu(down2_->forward(avg_max_pool(l2)));
  auto m2 = lrelu(merge2_->forward(upsample_to(l3, l2) + l2));
  auto m1 = lrelu(merge1_->forward(upsample_to(m2, l1) + l1));
  auto out = head_->forward(m1);
  auto parts = out.split(channels_, 1);
  return {parts[0], parts[1]};
}

EfstOutput EfstBlockImpl::forward(const torch::Tensor& features) {
  auto early = early_fuse(features);
  if (early_only_) return EfstOutput{early, {}};
  auto scores = confidence_scores(early, features);
  auto [alpha, beta] = spatiotemporal_weights(temporal_weight(features, scores));
  return EfstOutput{alpha * early + beta, scores};
}

void EfstBlockImpl::reset_parameters(torch::Generator& gen) {
  init_conv(early_, gen);
  if (early_only_) return;
  // Small projections keep the initial confidence logits near zero.
  init_conv(theta_, gen, 0.25);
  init_conv(delta_, gen, 0.25);
  init_conv(level1_, gen);
  init_conv(down1_, gen);
  init_conv(down2_, gen);
  init_conv(merge2_, gen);
  init_conv(merge1_, gen);
  init_conv(head_, gen, 0.1);
  // alpha starts near 1 and beta near 0, so the block starts close to E.
  torch::NoGradGuard no_grad;
  head_->bias.narrow(0, 0, channels_).fill_(1.0);
}

torch::Tensor temporal_weight(const torch::Tensor& features, const torch::Tensor& scores) {
  if (scores.dim() != 5 || scores.size(2) != 1) {
    throw ShapeError("scores must be [N, T, 1, H, W]");
  }
  return features * scores;
}

torch::Tensor avg_max_pool(const torch::Tensor& x) {
  auto avg = torch::avg_pool2d(x, 2, 2, 0, /*ceil_mode=*/true);
  auto mx = torch::max_pool2d(x, 2, 2, 0, 1, /*ceil_mode=*/true);
  return torch::cat({avg, mx}, 1);
}

}  // namespace stvun
