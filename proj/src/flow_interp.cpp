#include "stvun/flow_interp.hpp"

#include <fmt/format.h>

#include <bit>
#include <cstring>
#include <fstream>

namespace F = torch::nn::functional;

namespace stvun::flow {

FlowField FlowEstimatorImpl::estimate(const Frame& a, const Frame& b) {
  const auto dtype = parameters().empty() ? torch::kFloat32 : parameters().front().scalar_type();
  auto flow = estimate(a.pixels.unsqueeze(0).to(dtype), b.pixels.unsqueeze(0).to(dtype));
  return FlowField{flow.squeeze(0), a.time, b.time};
}

FlowPair ZeroFlowImpl::estimate_pair(const torch::Tensor& first, const torch::Tensor& second) {
  if (first.sizes() != second.sizes()) throw ShapeError("flow inputs differ in shape");
  auto zeros = torch::zeros({first.size(0), 2, first.size(2), first.size(3)}, first.options());
  return FlowPair{zeros, zeros.clone()};
}

// ---------------------------------------------------------------------------

PyramidLiteFlowImpl::PyramidLiteFlowImpl(int levels, int width) : levels_(levels) {
  for (int l = 0; l < levels; ++l) {
    Level lv;
    lv.c1 = register_module(fmt::format("level{}_conv1", l), make_conv(16, width, 3));
    lv.c2 = register_module(fmt::format("level{}_conv2", l), make_conv(width, width, 3));
    lv.c3 = register_module(fmt::format("level{}_conv3", l), make_conv(width, 4, 3));
    nets_.push_back(lv);
  }
}

std::int64_t PyramidLiteFlowImpl::parameter_count(int levels, int width) {
  return levels * (conv_parameter_count(16, width, 3) + conv_parameter_count(width, width, 3) +
                   conv_parameter_count(width, 4, 3));
}

void PyramidLiteFlowImpl::reset_parameters(torch::Generator& gen) {
  for (auto& lv : nets_) {
    init_conv(lv.c1, gen);
    init_conv(lv.c2, gen);
    torch::NoGradGuard no_grad;
    lv.c3->weight.zero_();
    lv.c3->bias.zero_();
  }
}

namespace {

torch::Tensor resize_flow(const torch::Tensor& flow, std::int64_t H, std::int64_t W) {
  const double sy = static_cast<double>(H) / static_cast<double>(flow.size(2));
  const double sx = static_cast<double>(W) / static_cast<double>(flow.size(3));
  auto up = F::interpolate(flow, F::InterpolateFuncOptions()
                                     .size(std::vector<std::int64_t>{H, W})
                                     .mode(torch::kBilinear)
                                     .align_corners(false));
  auto scale = torch::tensor({sx, sy}, flow.options()).view({1, 2, 1, 1});
  return up * scale;
}

}  // namespace

FlowPair PyramidLiteFlowImpl::estimate_pair(const torch::Tensor& first, const torch::Tensor& second) {
  if (first.sizes() != second.sizes() || first.dim() != 4) {
    throw ShapeError("flow inputs must be matching [N, 3, H, W] tensors");
  }
  std::vector<torch::Tensor> p3{first}, p4{second};
  for (int l = 1; l < levels_; ++l) {
    p3.push_back(torch::avg_pool2d(p3.back(), 2, 2, 0, /*ceil_mode=*/true));
    p4.push_back(torch::avg_pool2d(p4.back(), 2, 2, 0, /*ceil_mode=*/true));
  }
  torch::Tensor f34, f43;
  for (int l = levels_ - 1; l >= 0; --l) {
    const auto& x3 = p3[l];
    const auto& x4 = p4[l];
    const auto H = x3.size(2);
    const auto W = x3.size(3);
    if (!f34.defined()) {
      f34 = torch::zeros({x3.size(0), 2, H, W}, x3.options());
      f43 = torch::zeros_like(f34);
    } else {
      f34 = resize_flow(f34, H, W);
      f43 = resize_flow(f43, H, W);
    }
    auto input = torch::cat({x3, x4, backward_warp(x4, f34), backward_warp(x3, f43), f34, f43}, 1);
    auto& net = nets_[l];
    auto delta = net.c3->forward(lrelu(net.c2->forward(lrelu(net.c1->forward(input)))));
    f34 = f34 + delta.narrow(1, 0, 2);
    f43 = f43 + delta.narrow(1, 2, 2);
  }
  return FlowPair{f34, f43};
}

std::shared_ptr<FlowEstimatorImpl> make_flow_estimator(const std::string& name) {
  if (name == "zero") return std::make_shared<ZeroFlowImpl>();
  if (name == "pyramid-lite") return std::make_shared<PyramidLiteFlowImpl>();
  throw ConfigError("flow.estimator", "unknown estimator '" + name + "'");
}

std::int64_t flow_parameter_count(const std::string& name) {
  if (name == "zero") return 0;
  if (name == "pyramid-lite") return PyramidLiteFlowImpl::parameter_count();
  throw ConfigError("flow.estimator", "unknown estimator '" + name + "'");
}

// ---------------------------------------------------------------------------

IntermediateFlows scale_flows(const torch::Tensor& f34, const torch::Tensor& f43, double t) {
  if (!(t >= 0.0 && t <= 1.0)) throw DomainError(fmt::format("T_in = {} outside [0, 1]", t));
  if (f34.sizes() != f43.sizes()) throw ShapeError("flows differ in shape");
  const double s = 1.0 - t;
  return IntermediateFlows{-s * t * f34 + t * t * f43, s * s * f34 - t * s * f43};
}

IntermediateFlows scale_flows(const torch::Tensor& f34, const torch::Tensor& f43, const TimeIndex& t) {
  return scale_flows(f34, f43, to_double(t));
}

torch::Tensor backward_warp(const torch::Tensor& source_in, const torch::Tensor& flow_in) {
  const bool unbatched = source_in.dim() == 3;
  auto source = unbatched ? source_in.unsqueeze(0) : source_in;
  auto flow = flow_in.dim() == 3 ? flow_in.unsqueeze(0) : flow_in;
  if (source.dim() != 4 || flow.dim() != 4 || flow.size(1) != 2 || flow.size(0) != source.size(0) ||
      flow.size(2) != source.size(2) || flow.size(3) != source.size(3)) {
    throw ShapeError("backward_warp: flow must be [N, 2, H, W] matching the source extent");
  }
  const auto N = source.size(0);
  const auto C = source.size(1);
  const auto H = source.size(2);
  const auto W = source.size(3);
  const auto opts = flow.options();

  auto px = (torch::arange(W, opts).view({1, 1, W}) + flow.select(1, 0))
                .clamp(0.0, static_cast<double>(W - 1));
  auto py = (torch::arange(H, opts).view({1, H, 1}) + flow.select(1, 1))
                .clamp(0.0, static_cast<double>(H - 1));
  auto x0 = px.floor().detach();
  auto y0 = py.floor().detach();
  auto wx = (px - x0).unsqueeze(1);
  auto wy = (py - y0).unsqueeze(1);
  auto x0i = x0.to(torch::kLong);
  auto y0i = y0.to(torch::kLong);
  auto x1i = (x0i + 1).clamp_max(W - 1);
  auto y1i = (y0i + 1).clamp_max(H - 1);

  auto flat = source.reshape({N, C, H * W});
  auto tap = [&](const torch::Tensor& yi, const torch::Tensor& xi) {
    auto idx = (yi * W + xi).view({N, 1, H * W}).expand({N, C, H * W});
    return flat.gather(2, idx).view({N, C, H, W});
  };
  auto out = (1 - wx) * (1 - wy) * tap(y0i, x0i) + wx * (1 - wy) * tap(y0i, x1i) +
             (1 - wx) * wy * tap(y1i, x0i) + wx * wy * tap(y1i, x1i);
  return unbatched ? out.squeeze(0) : out;
}

std::vector<torch::Tensor> interpolate_features(const std::vector<torch::Tensor>& first,
                                                const std::vector<torch::Tensor>& second,
                                                const IntermediateFlows& flows) {
  if (first.size() != second.size()) throw ShapeError("feature pyramids differ in block count");
  std::vector<torch::Tensor> out;
  out.reserve(first.size());
  for (std::size_t i = 0; i < first.size(); ++i) {
    if (first[i].sizes() != second[i].sizes()) throw ShapeError("feature maps differ in shape");
    out.push_back(0.5 * (backward_warp(first[i], flows.to_first) + backward_warp(second[i], flows.to_second)));
  }
  return out;
}

torch::Tensor blend_lr(const torch::Tensor& first, const torch::Tensor& second, const IntermediateFlows& flows) {
  if (first.sizes() != second.sizes()) throw ShapeError("LR frames differ in shape");
  return 0.5 * (backward_warp(first, flows.to_first) + backward_warp(second, flows.to_second));
}

torch::Tensor motion_loss(const std::vector<torch::Tensor>& blends, const std::vector<torch::Tensor>& targets) {
  if (blends.size() != targets.size()) throw ShapeError("motion_loss: list lengths differ");
  if (blends.empty()) return torch::zeros({});
  torch::Tensor total;
  for (std::size_t k = 0; k < blends.size(); ++k) {
    if (blends[k].sizes() != targets[k].sizes()) throw ShapeError("motion_loss: shapes differ");
    auto term = (blends[k] - targets[k]).abs().mean();
    total = total.defined() ? total + term : term;
  }
  return total;
}

// ---------------------------------------------------------------------------

namespace {

constexpr float kFlowTag = 202021.25f;

template <typename T>
void put_le(std::ostream& out, T value) {
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T>
T get_le(std::istream& in) {
  unsigned char bytes[sizeof(T)];
  in.read(reinterpret_cast<char*>(bytes), sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  T value;
  std::memcpy(&value, bytes, sizeof(T));
  return value;
}

}  // namespace

void write_flow_file(const FlowField& flow, const std::filesystem::path& path) {
  auto v = flow.vectors.detach().to(torch::kFloat32);
  if (v.dim() != 3 || v.size(0) != 2) throw ShapeError("flow field must be [2, H, W]");
  auto hw2 = v.permute({1, 2, 0}).contiguous();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IOError(path, "cannot write flow file");
  put_le<float>(out, kFlowTag);
  put_le<std::int32_t>(out, static_cast<std::int32_t>(v.size(2)));
  put_le<std::int32_t>(out, static_cast<std::int32_t>(v.size(1)));
  const float* data = hw2.data_ptr<float>();
  for (std::int64_t k = 0; k < hw2.numel(); ++k) put_le<float>(out, data[k]);
  if (!out) throw IOError(path, "write failed");
}

FlowField read_flow_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IOError(path, "cannot open flow file");
  if (get_le<float>(in) != kFlowTag) throw IOError(path, "bad flow file tag");
  const auto W = get_le<std::int32_t>(in);
  const auto H = get_le<std::int32_t>(in);
  if (!in || W <= 0 || H <= 0) throw IOError(path, "bad flow file header");
  auto hw2 = torch::empty({H, W, 2}, torch::kFloat32);
  float* data = hw2.data_ptr<float>();
  for (std::int64_t k = 0; k < hw2.numel(); ++k) data[k] = get_le<float>(in);
  if (!in) throw IOError(path, "truncated flow file");
  return FlowField{hw2.permute({2, 0, 1}).contiguous(), 0, 0};
}

}  // namespace stvun::flow
