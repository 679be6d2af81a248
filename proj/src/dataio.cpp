#include "stvun/dataio.hpp"

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include <nlohmann/json.hpp>
#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <regex>
#include <sstream>

namespace fs = std::filesystem;

namespace stvun::data {

std::vector<double> gaussian_taps(double sigma) {
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> taps(2 * radius + 1);
  double sum = 0.0;
  for (int k = -radius; k <= radius; ++k) {
    taps[k + radius] = std::exp(-0.5 * k * k / (sigma * sigma));
    sum += taps[k + radius];
  }
  for (double& t : taps) t /= sum;
  return taps;
}

std::int64_t reflect_index(std::int64_t i, std::int64_t n) {
  if (n == 1) return 0;
  const std::int64_t period = 2 * (n - 1);
  i = ((i % period) + period) % period;
  return i < n ? i : period - i;
}

namespace {

torch::Tensor reflect_pad_indices(std::int64_t n, std::int64_t radius) {
  std::vector<std::int64_t> idx;
  idx.reserve(n + 2 * radius);
  for (std::int64_t i = -radius; i < n + radius; ++i) idx.push_back(reflect_index(i, n));
  return torch::tensor(idx, torch::kLong);
}

}  // namespace

torch::Tensor degrade_tensor(const torch::Tensor& hr, const DegradeParams& params) {
  if (hr.dim() < 2) throw ShapeError("degrade expects a [..., H, W] tensor");
  const auto H = hr.size(-2);
  const auto W = hr.size(-1);
  const int r = params.scale_r;
  if (r < 1 || H % r != 0 || W % r != 0) {
    throw SizeError(fmt::format("frame {}x{} is not divisible by scale {}", H, W, r));
  }
  const auto taps = gaussian_taps(params.sigma);
  const auto radius = static_cast<std::int64_t>(taps.size() / 2);

  auto lead = hr.sizes().vec();
  lead.resize(lead.size() - 2);
  auto x = hr.detach().to(torch::kFloat64).reshape({-1, 1, H, W});
  x = x.index_select(2, reflect_pad_indices(H, radius));
  x = x.index_select(3, reflect_pad_indices(W, radius));

  auto kernel = torch::tensor(taps, torch::kFloat64);
  const auto K = static_cast<std::int64_t>(taps.size());
  x = torch::conv2d(x, kernel.view({1, 1, 1, K}));
  x = torch::conv2d(x, kernel.view({1, 1, K, 1}));

  using torch::indexing::Slice;
  x = x.index({Slice(), Slice(), Slice(params.offset, torch::indexing::None, r),
               Slice(params.offset, torch::indexing::None, r)});
  auto out_shape = lead;
  out_shape.push_back(H / r);
  out_shape.push_back(W / r);
  return x.reshape(out_shape).to(hr.scalar_type()).contiguous();
}

Frame degrade(const Frame& hr, int scale_r, double sigma, int offset) {
  return Frame{degrade_tensor(hr.pixels, DegradeParams{scale_r, sigma, offset}), hr.time};
}

// ---------------------------------------------------------------------------

AugmentOps draw_augment(Rng& rng) {
  AugmentOps ops;
  ops.flip_lr = rng.coin();
  ops.quarter_turns = static_cast<int>(rng.uniform_int(0, 2));
  ops.reverse_time = rng.coin();
  return ops;
}

torch::Tensor apply_geometry(const torch::Tensor& raster, const AugmentOps& ops) {
  auto out = raster;
  if (ops.flip_lr) out = torch::flip(out, {-1});
  if (ops.quarter_turns % 4 != 0) out = torch::rot90(out, ops.quarter_turns, {-2, -1});
  return out.contiguous();
}

namespace {

Frame transform(const Frame& f, const AugmentOps& ops) {
  return Frame{apply_geometry(f.pixels, ops), f.time};
}

void check_rotatable(const Frame& f, const AugmentOps& ops) {
  if (ops.quarter_turns % 2 == 1 && f.height() != f.width()) {
    throw AugmentError(fmt::format("90-degree rotation needs square patches, got {}x{}",
                                   f.height(), f.width()));
  }
}

/// Relabels time indices after a reordering: inputs at 0..w-1, trailing at w,
/// center pair at c and c + 1, intermediates at c + T.
void relabel_times(TrainingSample& s) {
  const auto c = static_cast<std::int64_t>(s.lr_inputs.size() / 2);
  for (std::size_t j = 0; j < s.lr_inputs.size(); ++j) {
    s.lr_inputs[j].time = static_cast<std::int64_t>(j);
  }
  s.lr_trailing.time = static_cast<std::int64_t>(s.lr_inputs.size());
  s.hr_center.time = c;
  s.hr_following.time = c + 1;
  for (auto& m : s.intermediates) {
    m.hr.time = c + m.t_in;
    m.lr.time = c + m.t_in;
  }
}

}  // namespace

TrainingSample apply_augment(const TrainingSample& sample, const AugmentOps& ops) {
  for (const auto& f : sample.lr_inputs) check_rotatable(f, ops);
  check_rotatable(sample.hr_center, ops);

  TrainingSample out;
  for (const auto& f : sample.lr_inputs) out.lr_inputs.push_back(transform(f, ops));
  out.lr_trailing = transform(sample.lr_trailing, ops);
  out.hr_center = transform(sample.hr_center, ops);
  out.hr_following = transform(sample.hr_following, ops);
  for (const auto& m : sample.intermediates) {
    out.intermediates.push_back(Intermediate{m.t_in, transform(m.hr, ops), transform(m.lr, ops)});
  }

  if (ops.reverse_time) {
    // [x0 .. x_{w-1}] + trailing reversed: the new window starts at the old
    // trailing frame, so the old (c, c+1) pair becomes the new (c+1, c) pair.
    std::vector<Frame> seq = out.lr_inputs;
    seq.push_back(out.lr_trailing);
    std::reverse(seq.begin(), seq.end());
    out.lr_trailing = seq.back();
    seq.pop_back();
    out.lr_inputs = std::move(seq);
    std::swap(out.hr_center, out.hr_following);
    for (auto& m : out.intermediates) m.t_in = TimeIndex(1) - m.t_in;
    std::reverse(out.intermediates.begin(), out.intermediates.end());
  }
  relabel_times(out);
  return out;
}

TrainingSample augment(const TrainingSample& sample, Rng& rng) {
  return apply_augment(sample, draw_augment(rng));
}

// ---------------------------------------------------------------------------

std::int64_t min_clip_frames(int window_size, int stride_s) {
  return static_cast<std::int64_t>(window_size - 1) * stride_s + 1;
}

void check_index(const DatasetIndex& index, const ModelConfig& config) {
  if (index.clips.empty()) throw DataError("dataset index lists no clips");
  if (index.stride_s < 2) throw DataError("dataset stride must be >= 2");
  const auto need = min_clip_frames(config.window_size, index.stride_s);
  for (const auto& clip : index.clips) {
    if (clip.frame_count < need) {
      throw DataError(fmt::format("clip '{}' has {} frames, needs at least {}", clip.name,
                                  clip.frame_count, need));
    }
  }
}

std::string frame_filename(std::int64_t index) { return fmt::format("{:06d}.png", index); }

namespace {

std::vector<std::int64_t> frame_indices(const fs::path& directory) {
  static const std::regex pattern(R"(^(\d{6})\.png$)");
  std::error_code ec;
  if (!fs::is_directory(directory, ec)) throw IOError(directory, "not a directory");
  std::vector<std::int64_t> indices;
  for (const auto& entry : fs::directory_iterator(directory)) {
    if (!entry.is_regular_file()) continue;
    const std::string name = entry.path().filename().string();
    std::smatch m;
    if (std::regex_match(name, m, pattern)) indices.push_back(std::stoll(m[1].str()));
  }
  std::sort(indices.begin(), indices.end());
  return indices;
}

}  // namespace

std::int64_t count_frames(const fs::path& directory) {
  return static_cast<std::int64_t>(frame_indices(directory).size());
}

DatasetIndex scan_frame_root(const fs::path& root, int stride_s) {
  std::error_code ec;
  if (!fs::is_directory(root, ec)) throw IOError(root, "frame root is not a directory");
  DatasetIndex index;
  index.stride_s = stride_s;
  std::vector<fs::path> dirs;
  for (const auto& entry : fs::directory_iterator(root)) {
    if (entry.is_directory()) dirs.push_back(entry.path());
  }
  std::sort(dirs.begin(), dirs.end());
  for (const auto& dir : dirs) {
    const auto n = count_frames(dir);
    if (n > 0) index.clips.push_back(ClipEntry{dir.filename().string(), dir, {}, n});
  }
  return index;
}

void write_manifest(const DatasetIndex& index, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw IOError(path, "cannot write manifest");
  out << "# stvun dataset manifest v1\n";
  out << "stride_s\t" << index.stride_s << "\n";
  for (const auto& c : index.clips) {
    out << "clip\t" << c.name << "\t" << c.frame_count << "\t" << c.hr_dir.string() << "\t"
        << c.lr_dir.string() << "\n";
  }
  if (!out) throw IOError(path, "write failed");
}

DatasetIndex read_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IOError(path, "cannot open manifest");
  const fs::path base = path.parent_path();
  auto resolve = [&](const std::string& p) -> fs::path {
    if (p.empty()) return {};
    fs::path q(p);
    return q.is_absolute() ? q : base / q;
  };
  DatasetIndex index;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> cols;
    std::stringstream ss(line);
    std::string col;
    while (std::getline(ss, col, '\t')) cols.push_back(col);
    if (cols[0] == "stride_s" && cols.size() == 2) {
      index.stride_s = std::stoi(cols[1]);
    } else if (cols[0] == "clip" && cols.size() >= 4) {
      ClipEntry e;
      e.name = cols[1];
      e.frame_count = std::stoll(cols[2]);
      e.hr_dir = resolve(cols[3]);
      if (cols.size() >= 5) e.lr_dir = resolve(cols[4]);
      index.clips.push_back(std::move(e));
    } else {
      throw IOError(path, fmt::format("malformed manifest line {}", line_no));
    }
  }
  return index;
}

Dataset load_dataset(const DatasetIndex& index) {
  Dataset ds;
  ds.index = index;
  for (const auto& entry : index.clips) {
    ds.hr_clips.push_back(read_frames(entry.hr_dir));
  }
  return ds;
}

std::int64_t reflect_time(std::int64_t i, std::int64_t n) { return reflect_index(i, n); }

std::vector<TrainingSample> sample_batch(const Dataset& dataset, const ValidatedConfig& config,
                                         int patch_size, int batch, Rng& rng,
                                         bool apply_augmentation) {
  const ModelConfig& cfg = config.get();
  const int r = cfg.scale_r;
  if (patch_size <= 0 || patch_size % r != 0) {
    throw PatchError(fmt::format("patch size {} is not a positive multiple of scale {}",
                                 patch_size, r));
  }
  if (dataset.hr_clips.empty()) throw DataError("dataset has no clips");
  const int s = dataset.index.stride_s;
  const int w = cfg.window_size;
  const int center = cfg.center_index();
  const DegradeParams dp = degrade_params(cfg);

  std::vector<TrainingSample> out;
  out.reserve(batch);
  for (int b = 0; b < batch; ++b) {
    const auto clip_id = rng.uniform_int(0, static_cast<std::int64_t>(dataset.hr_clips.size()) - 1);
    const Clip& clip = dataset.hr_clips[clip_id];
    const auto L = static_cast<std::int64_t>(clip.size());
    if (L < s + 1) throw DataError("clip too short for one center pair");
    const auto H = clip.frames[0].height();
    const auto W = clip.frames[0].width();
    if (patch_size > H || patch_size > W) {
      throw PatchError(fmt::format("patch {} exceeds frame {}x{}", patch_size, H, W));
    }
    const auto c = rng.uniform_int(0, L - 1 - s);
    const auto y = r * rng.uniform_int(0, (H - patch_size) / r);
    const auto x = r * rng.uniform_int(0, (W - patch_size) / r);

    using torch::indexing::Slice;
    auto crop = [&](std::int64_t t) {
      return clip.frames[reflect_time(t, L)].pixels.index(
          {Slice(), Slice(y, y + patch_size), Slice(x, x + patch_size)});
    };
    // Stack: w + 1 window frames, then s - 1 intermediates.
    std::vector<torch::Tensor> stack;
    for (int j = 0; j <= w; ++j) stack.push_back(crop(c + static_cast<std::int64_t>(j - center) * s));
    for (int k = 1; k < s; ++k) stack.push_back(crop(c + k));

    AugmentOps ops;
    if (apply_augmentation) ops = draw_augment(rng);
    AugmentOps geometric = ops;
    geometric.reverse_time = false;
    auto hr_stack = apply_geometry(torch::stack(stack), geometric);
    auto lr_stack = degrade_tensor(hr_stack, dp);

    TrainingSample sample;
    for (int j = 0; j < w; ++j) sample.lr_inputs.push_back(Frame{lr_stack[j], j});
    sample.lr_trailing = Frame{lr_stack[w], w};
    sample.hr_center = Frame{hr_stack[center], center};
    sample.hr_following = Frame{hr_stack[center + 1], center + 1};
    for (int k = 1; k < s; ++k) {
      const TimeIndex t_in(k, s);
      sample.intermediates.push_back(
          Intermediate{t_in, Frame{hr_stack[w + k], center + t_in}, Frame{lr_stack[w + k], center + t_in}});
    }
    if (ops.reverse_time) {
      AugmentOps rev;
      rev.reverse_time = true;
      sample = apply_augment(sample, rev);
    }
    out.push_back(std::move(sample));
  }
  return out;
}

Batch collate(const std::vector<TrainingSample>& samples) {
  if (samples.empty()) throw DataError("cannot collate an empty batch");
  Batch b;
  for (const auto& m : samples[0].intermediates) b.t_ins.push_back(m.t_in);
  std::vector<torch::Tensor> lr, hr_c, hr_i, lr_i;
  for (const auto& s : samples) {
    if (s.intermediates.size() != b.t_ins.size()) throw MismatchError("T_in sets differ in batch");
    std::vector<torch::Tensor> frames;
    for (const auto& f : s.lr_inputs) frames.push_back(f.pixels);
    lr.push_back(torch::stack(frames));
    hr_c.push_back(s.hr_center.pixels);
    std::vector<torch::Tensor> hi, li;
    for (std::size_t k = 0; k < s.intermediates.size(); ++k) {
      if (s.intermediates[k].t_in != b.t_ins[k]) throw MismatchError("T_in sets differ in batch");
      hi.push_back(s.intermediates[k].hr.pixels);
      li.push_back(s.intermediates[k].lr.pixels);
    }
    if (!hi.empty()) {
      hr_i.push_back(torch::stack(hi));
      lr_i.push_back(torch::stack(li));
    }
  }
  b.lr = torch::stack(lr);
  b.hr_center = torch::stack(hr_c);
  if (!hr_i.empty()) {
    b.hr_intermediates = torch::stack(hr_i);
    b.lr_intermediates = torch::stack(lr_i);
  }
  return b;
}

// ---------------------------------------------------------------------------

torch::Tensor quantize_8bit(const torch::Tensor& pixels) {
  return torch::round(pixels.clamp(0.0, 1.0) * 255.0).to(torch::kUInt8);
}

void write_frame_png(const Frame& frame, const fs::path& path) {
  auto hwc = quantize_8bit(frame.pixels).permute({1, 2, 0}).contiguous();
  cv::Mat rgb(static_cast<int>(frame.height()), static_cast<int>(frame.width()), CV_8UC3,
              hwc.data_ptr<std::uint8_t>());
  cv::Mat bgr;
  cv::cvtColor(rgb, bgr, cv::COLOR_RGB2BGR);
  bool ok = false;
  try {
    ok = cv::imwrite(path.string(), bgr);
  } catch (const cv::Exception& e) {
    throw IOError(path, e.what());
  }
  if (!ok) throw IOError(path, "cannot write image");
}

Frame read_frame_png(const fs::path& path, TimeIndex time) {
  cv::Mat bgr = cv::imread(path.string(), cv::IMREAD_COLOR);
  if (bgr.empty()) throw IOError(path, "cannot read image");
  cv::Mat rgb;
  cv::cvtColor(bgr, rgb, cv::COLOR_BGR2RGB);
  auto t = torch::from_blob(rgb.data, {rgb.rows, rgb.cols, 3}, torch::kUInt8)
               .permute({2, 0, 1})
               .to(torch::kFloat32)
               .div(255.0f)
               .contiguous();
  return Frame{t, time};
}

void write_frames(const Clip& clip, const fs::path& directory) {
  std::error_code ec;
  fs::create_directories(directory, ec);
  if (ec) throw IOError(directory, "cannot create directory: " + ec.message());
  for (std::size_t k = 0; k < clip.frames.size(); ++k) {
    write_frame_png(clip.frames[k], directory / frame_filename(static_cast<std::int64_t>(k)));
  }
}

Clip read_frames(const fs::path& directory) {
  const auto indices = frame_indices(directory);
  if (indices.empty()) throw IOError(directory, "no numbered frames");
  Clip clip;
  for (std::size_t k = 0; k < indices.size(); ++k) {
    const auto expected = static_cast<std::int64_t>(k);
    if (indices[k] != expected) {
      throw IOError(directory, "gap in frame sequence: missing " + frame_filename(expected));
    }
    clip.frames.push_back(read_frame_png(directory / frame_filename(expected), expected));
  }
  check_clip(clip);
  return clip;
}

void write_degradation_sidecar(const fs::path& path, const DegradeParams& params, int stride_s,
                               std::uint64_t seed) {
  nlohmann::json j;
  j["scale_r"] = params.scale_r;
  j["blur_sigma"] = params.sigma;
  j["kernel_radius"] = static_cast<int>(std::ceil(3.0 * params.sigma));
  j["padding"] = "reflect";
  j["subsample_offset"] = params.offset;
  j["stride_s"] = stride_s;
  j["seed"] = seed;
  std::ofstream out(path);
  if (!out) throw IOError(path, "cannot write sidecar");
  out << j.dump(2) << "\n";
}

// ---------------------------------------------------------------------------

Clip synthesize_clip(std::int64_t frames, std::int64_t height, std::int64_t width,
                     std::uint64_t seed) {
  Rng rng(seed);
  auto uniform = [&](double lo, double hi) {
    return lo + (hi - lo) * static_cast<double>(rng.next_u64() >> 11) * 0x1.0p-53;
  };
  auto signed_uniform = [&](double lo, double hi) { return (rng.coin() ? 1.0 : -1.0) * uniform(lo, hi); };

  struct Grating {
    double fx, fy, phase, amp;
    double color[3];
  };
  std::vector<Grating> gratings(6);
  for (auto& g : gratings) {
    const double freq = uniform(0.02, 0.12);
    const double angle = uniform(0.0, 2.0 * M_PI);
    g.fx = freq * std::cos(angle);
    g.fy = freq * std::sin(angle);
    g.phase = uniform(0.0, 2.0 * M_PI);
    g.amp = uniform(0.04, 0.09);
    for (double& c : g.color) c = uniform(0.3, 1.0);
  }
  const double bg_vx = signed_uniform(1.0, 2.0);
  const double bg_vy = signed_uniform(0.5, 1.5);
  const double obj_vx = signed_uniform(1.5, 2.5);
  const double obj_vy = signed_uniform(1.0, 2.0);
  const double radius = 0.22 * static_cast<double>(std::min(height, width));
  const double obj_x0 = 0.5 * width - obj_vx * 0.5 * frames;
  const double obj_y0 = 0.5 * height - obj_vy * 0.5 * frames;
  double obj_color[2][3];
  for (auto& row : obj_color)
    for (double& c : row) c = uniform(0.1, 0.9);
  const double checker = uniform(5.0, 9.0);

  // 2x2 supersampling on pixel-centered subsample positions.
  const auto opts = torch::TensorOptions().dtype(torch::kFloat64);
  auto ys = (torch::arange(2 * height, opts) + 0.5) / 2.0;
  auto xs = (torch::arange(2 * width, opts) + 0.5) / 2.0;
  auto grids = torch::meshgrid({ys, xs}, "ij");
  const auto& gy = grids[0];
  const auto& gx = grids[1];

  Clip clip;
  for (std::int64_t t = 0; t < frames; ++t) {
    const double td = static_cast<double>(t);
    auto bx = gx - bg_vx * td;
    auto by = gy - bg_vy * td;
    std::vector<torch::Tensor> channels;
    for (int ch = 0; ch < 3; ++ch) {
      auto v = torch::full_like(gx, 0.5);
      for (const auto& g : gratings) {
        v = v + g.amp * g.color[ch] * torch::sin(2.0 * M_PI * (g.fx * bx + g.fy * by) + g.phase);
      }
      channels.push_back(v);
    }
    auto bg = torch::stack(channels);

    const double cx = obj_x0 + obj_vx * td;
    const double cy = obj_y0 + obj_vy * td;
    auto dx = gx - cx;
    auto dy = gy - cy;
    auto inside = (dx * dx + dy * dy <= radius * radius).to(torch::kFloat64);
    auto parity = torch::remainder(torch::floor(dx / checker) + torch::floor(dy / checker), 2.0);
    std::vector<torch::Tensor> obj_channels;
    for (int ch = 0; ch < 3; ++ch) {
      obj_channels.push_back(obj_color[0][ch] * (1.0 - parity) + obj_color[1][ch] * parity);
    }
    auto obj = torch::stack(obj_channels);
    auto img = bg * (1.0 - inside) + obj * inside;
    img = torch::avg_pool2d(img.unsqueeze(0), 2).squeeze(0).clamp(0.0, 1.0);
    // Store on the 8-bit grid so frames round-trip through PNG unchanged.
    auto q = quantize_8bit(img).to(torch::kFloat32).div(255.0f);
    clip.frames.push_back(Frame{q.contiguous(), t});
  }
  return clip;
}

}  // namespace stvun::data
