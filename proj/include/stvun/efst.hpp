#pragma once

#include "stvun/core_types.hpp"
#include "stvun/layers.hpp"

#include <utility>

namespace stvun {

struct EfstOutput {
  torch::Tensor fused;   // Ẽ^i, [N, C, H, W]
  torch::Tensor scores;  // s^i_t, [N, T, 1, H, W]; undefined when EFST is disabled
};

/// Early Fusion with Spatio-Temporal weights for one encoder block.
///
/// The T per-frame features are collapsed by a 1x1 convolution into E. Each
/// frame then gets a per-pixel confidence, sigmoid(<theta(e_t), delta(E)>),
/// which rescales its features; the rescaled stack runs through a three-level
/// average/max pooling pyramid whose output is split into alpha and beta, and
/// the block returns alpha * E + beta.
///
/// With `early_only` the block holds only the early fusion and returns E
/// unchanged (the "without EFST" ablation).
class EfstBlockImpl : public torch::nn::Module {
 public:
  EfstBlockImpl(int channels, int window_size, bool early_only = false);

  /// features: [N, T, C, H, W] -> E: [N, C, H, W].
  torch::Tensor early_fuse(const torch::Tensor& features);
  /// -> [N, T, 1, H, W] scores in (0, 1).
  torch::Tensor confidence_scores(const torch::Tensor& early, const torch::Tensor& features);
  /// weighted: [N, T, C, H, W] -> (alpha, beta), each [N, C, H, W].
  std::pair<torch::Tensor, torch::Tensor> spatiotemporal_weights(const torch::Tensor& weighted);

  EfstOutput forward(const torch::Tensor& features);

  void reset_parameters(torch::Generator& gen);
  bool early_only() const { return early_only_; }

  static std::int64_t parameter_count(int channels, int window_size, bool early_only);

  torch::nn::Conv2d& early() { return early_; }
  torch::nn::Conv2d& theta() { return theta_; }
  torch::nn::Conv2d& delta() { return delta_; }
  /// Final 2C-channel head producing (alpha, beta).
  torch::nn::Conv2d& weight_head() { return head_; }

 private:
  int channels_;
  int window_size_;
  bool early_only_;
  torch::nn::Conv2d early_{nullptr};
  torch::nn::Conv2d theta_{nullptr}, delta_{nullptr};
  torch::nn::Conv2d level1_{nullptr}, down1_{nullptr}, down2_{nullptr};
  torch::nn::Conv2d merge2_{nullptr}, merge1_{nullptr}, head_{nullptr};
};
TORCH_MODULE(EfstBlock);

/// ē_t = s_t ⊙ e_t with the single-channel score broadcast over channels.
torch::Tensor temporal_weight(const torch::Tensor& features, const torch::Tensor& scores);

/// Concatenated 2x2 average and max pooling (ceil mode, so odd and unit
/// extents stay valid).
torch::Tensor avg_max_pool(const torch::Tensor& x);

}  // namespace stvun
