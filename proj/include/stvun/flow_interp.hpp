#pragma once

#include "stvun/core_types.hpp"
#include "stvun/layers.hpp"

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

namespace stvun::flow {

/// Flows between the two center frames, each [N, 2, H, W] (x, y) in pixels.
struct FlowPair {
  torch::Tensor forward;   // f_{3->4}
  torch::Tensor backward;  // f_{4->3}
};

/// Flows from the intermediate time T to the center pair.
struct IntermediateFlows {
  torch::Tensor to_first;   // f_{T->3}
  torch::Tensor to_second;  // f_{T->4}
};

/// Pluggable optical-flow estimator between the two center LR frames.
class FlowEstimatorImpl : public torch::nn::Module {
 public:
  /// frames: [N, 3, H, W] each. Output flows share their spatial size.
  virtual FlowPair estimate_pair(const torch::Tensor& first, const torch::Tensor& second) = 0;
  /// f_{a->b} alone.
  torch::Tensor estimate(const torch::Tensor& a, const torch::Tensor& b) { return estimate_pair(a, b).forward; }
  FlowField estimate(const Frame& a, const Frame& b);

  virtual bool trainable() const = 0;
  virtual std::string name() const = 0;
  virtual void reset_parameters(torch::Generator&) {}
};

/// Always returns zero motion; intermediates degenerate to plain blending.
class ZeroFlowImpl : public FlowEstimatorImpl {
 public:
  FlowPair estimate_pair(const torch::Tensor& first, const torch::Tensor& second) override;
  bool trainable() const override { return false; }
  std::string name() const override { return "zero"; }
};

/// Small trainable coarse-to-fine estimator. At each of three levels (1/4,
/// 1/2, full) a three-layer CNN sees both frames, both frames warped by the
/// current flows, and the flows, and predicts residual updates for f_{3->4}
/// and f_{4->3}. The last layer of every level starts at zero, so an untrained
/// estimator reports zero motion.
class PyramidLiteFlowImpl : public FlowEstimatorImpl {
 public:
  explicit PyramidLiteFlowImpl(int levels = 3, int width = 32);

  FlowPair estimate_pair(const torch::Tensor& first, const torch::Tensor& second) override;
  bool trainable() const override { return true; }
  std::string name() const override { return "pyramid-lite"; }
  void reset_parameters(torch::Generator& gen) override;

  static std::int64_t parameter_count(int levels = 3, int width = 32);

 private:
  struct Level {
    torch::nn::Conv2d c1{nullptr}, c2{nullptr}, c3{nullptr};
  };
  int levels_;
  std::vector<Level> nets_;
};

std::shared_ptr<FlowEstimatorImpl> make_flow_estimator(const std::string& name);
std::int64_t flow_parameter_count(const std::string& name);

/// Linear time scaling of the center-pair flows:
///   f_{T->3} = -(1-T) T f_{3->4} + T^2 f_{4->3}
///   f_{T->4} = (1-T)^2 f_{3->4} - T (1-T) f_{4->3}
/// Throws DomainError unless 0 <= T <= 1.
IntermediateFlows scale_flows(const torch::Tensor& f34, const torch::Tensor& f43, double t_in);
IntermediateFlows scale_flows(const torch::Tensor& f34, const torch::Tensor& f43, const TimeIndex& t_in);

/// out(x, y) = bilinear sample of `source` at (x + u, y + v). Sample positions
/// are clamped to the raster, so out-of-range samples repeat the edge.
/// source: [N, C, H, W] or [C, H, W]; flow: [N, 2, H, W] or [2, H, W].
/// Differentiable in both source and flow.
torch::Tensor backward_warp(const torch::Tensor& source, const torch::Tensor& flow);

/// m^i_T = (w(e^i_3, f_{T->3}) + w(e^i_4, f_{T->4})) / 2 for every block.
std::vector<torch::Tensor> interpolate_features(const std::vector<torch::Tensor>& first,
                                                const std::vector<torch::Tensor>& second,
                                                const IntermediateFlows& flows);

/// X̂_T = (w(X_3, f_{T->3}) + w(X_4, f_{T->4})) / 2.
torch::Tensor blend_lr(const torch::Tensor& first, const torch::Tensor& second,
                       const IntermediateFlows& flows);

/// Sum over T of the per-pixel mean absolute error.
torch::Tensor motion_loss(const std::vector<torch::Tensor>& blends, const std::vector<torch::Tensor>& targets);

/// Middlebury-style flow file: "PIEH" tag, int32 width, int32 height, then
/// row-major interleaved float32 (u, v), all little-endian.
void write_flow_file(const FlowField& flow, const std::filesystem::path& path);
FlowField read_flow_file(const std::filesystem::path& path);

}  // namespace stvun::flow
