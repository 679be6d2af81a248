#pragma once

#include <torch/torch.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <string>
#include <vector>

namespace support {

inline torch::TensorOptions f64() { return torch::TensorOptions().dtype(torch::kFloat64); }

inline double max_abs_diff(const torch::Tensor& a, const torch::Tensor& b) {
  return (a.to(torch::kFloat64) - b.to(torch::kFloat64)).abs().max().item<double>();
}

inline bool bit_equal(const torch::Tensor& a, const torch::Tensor& b) {
  return a.sizes() == b.sizes() && a.scalar_type() == b.scalar_type() && torch::equal(a, b);
}

/// Loop-based "same" 2-D convolution on one image [Cin, H, W] in double.
/// `replicate` clamps out-of-range reads to the edge, otherwise they read 0.
inline torch::Tensor naive_conv2d(const torch::Tensor& x, const torch::Tensor& weight, const torch::Tensor& bias,
                                  bool replicate = false) {
  auto in = x.to(torch::kFloat64).contiguous();
  auto w = weight.to(torch::kFloat64).contiguous();
  auto b = bias.to(torch::kFloat64).contiguous();
  const auto cin = in.size(0), H = in.size(1), W = in.size(2);
  const auto cout = w.size(0), k = w.size(2), pad = k / 2;
  auto out = torch::zeros({cout, H, W}, f64());
  auto I = in.accessor<double, 3>();
  auto K = w.accessor<double, 4>();
  auto B = b.accessor<double, 1>();
  auto O = out.accessor<double, 3>();
  for (int64_t o = 0; o < cout; ++o)
    for (int64_t y = 0; y < H; ++y)
      for (int64_t x0 = 0; x0 < W; ++x0) {
        double s = B[o];
        for (int64_t c = 0; c < cin; ++c)
          for (int64_t dy = 0; dy < k; ++dy)
            for (int64_t dx = 0; dx < k; ++dx) {
              int64_t yy = y + dy - pad, xx = x0 + dx - pad;
              if (replicate) {
                yy = std::clamp<int64_t>(yy, 0, H - 1);
                xx = std::clamp<int64_t>(xx, 0, W - 1);
              } else if (yy < 0 || yy >= H || xx < 0 || xx >= W) {
                continue;
              }
              s += K[o][c][dy][dx] * I[c][yy][xx];
            }
        O[o][y][x0] = s;
      }
  return out;
}

inline double leaky(double v) { return v >= 0 ? v : 0.1 * v; }

inline torch::Tensor naive_leaky(const torch::Tensor& x) {
  auto out = x.to(torch::kFloat64).clone();
  auto flat = out.view({-1});
  auto A = flat.accessor<double, 1>();
  for (int64_t i = 0; i < flat.size(0); ++i) A[i] = leaky(A[i]);
  return out;
}

/// Bilinear sample of [C, H, W] at (px, py) with edge clamping.
inline std::vector<double> bilinear_at(const torch::Tensor& img, double px, double py) {
  auto I = img.to(torch::kFloat64).contiguous();
  auto A = I.accessor<double, 3>();
  const auto H = I.size(1), W = I.size(2);
  px = std::clamp(px, 0.0, static_cast<double>(W - 1));
  py = std::clamp(py, 0.0, static_cast<double>(H - 1));
  const auto x0 = static_cast<int64_t>(std::floor(px)), y0 = static_cast<int64_t>(std::floor(py));
  const auto x1 = std::min<int64_t>(x0 + 1, W - 1), y1 = std::min<int64_t>(y0 + 1, H - 1);
  const double ax = px - x0, ay = py - y0;
  std::vector<double> out(I.size(0));
  for (int64_t c = 0; c < I.size(0); ++c) {
    out[c] = (1 - ay) * ((1 - ax) * A[c][y0][x0] + ax * A[c][y0][x1]) +
             ay * ((1 - ax) * A[c][y1][x0] + ax * A[c][y1][x1]);
  }
  return out;
}

/// Reference backward warp of one image [C, H, W] by flow [2, H, W].
inline torch::Tensor naive_warp(const torch::Tensor& img, const torch::Tensor& flow) {
  auto F = flow.to(torch::kFloat64).contiguous();
  auto fa = F.accessor<double, 3>();
  const auto C = img.size(0), H = img.size(1), W = img.size(2);
  auto out = torch::zeros({C, H, W}, f64());
  auto O = out.accessor<double, 3>();
  for (int64_t y = 0; y < H; ++y)
    for (int64_t x = 0; x < W; ++x) {
      auto v = bilinear_at(img, x + fa[0][y][x], y + fa[1][y][x]);
      for (int64_t c = 0; c < C; ++c) O[c][y][x] = v[c];
    }
  return out;
}

struct GradReport {
  double rel_error = 0.0;  // ||analytic - numeric|| / max(||analytic||, ||numeric||)
  int checked = 0;
  std::string worst;
};

/// Central finite differences of `loss()` against the autograd gradients of
/// `tensors`, on up to `per_tensor` entries of each tensor. Tensors must be
/// double and require grad.
inline GradReport gradcheck(const std::function<torch::Tensor()>& loss, std::vector<torch::Tensor> tensors,
                            int per_tensor = 24, double eps = 1e-6, uint64_t seed = 7) {
  for (auto& t : tensors) {
    if (t.grad().defined()) t.mutable_grad().zero_();
  }
  loss().backward();
  std::vector<torch::Tensor> analytic;
  for (auto& t : tensors) {
    analytic.push_back(t.grad().defined() ? t.grad().clone() : torch::zeros_like(t));
  }
  torch::NoGradGuard no_grad;
  std::mt19937_64 pick(seed);
  double diff2 = 0.0, a2 = 0.0, n2 = 0.0, worst = -1.0;
  GradReport report;
  for (std::size_t k = 0; k < tensors.size(); ++k) {
    auto flat = tensors[k].view({-1});
    auto g = analytic[k].view({-1});
    const auto n = flat.size(0);
    std::vector<int64_t> idx(n);
    for (int64_t i = 0; i < n; ++i) idx[i] = i;
    std::shuffle(idx.begin(), idx.end(), pick);
    idx.resize(std::min<int64_t>(n, per_tensor));
    for (auto i : idx) {
      const double orig = flat[i].item<double>();
      flat[i] = orig + eps;
      const double up = loss().item<double>();
      flat[i] = orig - eps;
      const double down = loss().item<double>();
      flat[i] = orig;
      const double num = (up - down) / (2 * eps);
      const double ana = g[i].item<double>();
      diff2 += (num - ana) * (num - ana);
      a2 += ana * ana;
      n2 += num * num;
      const double err = std::abs(num - ana);
      if (err > worst) {
        worst = err;
        report.worst = "tensor " + std::to_string(k) + " entry " + std::to_string(i) + ": analytic " +
                       std::to_string(ana) + " numeric " + std::to_string(num);
      }
      ++report.checked;
    }
  }
  const double scale = std::max(std::sqrt(a2), std::sqrt(n2));
  report.rel_error = scale > 0 ? std::sqrt(diff2) / scale : std::sqrt(diff2);
  return report;
}

}  // namespace support
