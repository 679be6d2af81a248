#include "stvun/model.hpp"

#include "stvun/dataio.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cstring>
#include <functional>
#include <string_view>

namespace fs = std::filesystem;

namespace stvun {

namespace {

std::int64_t numel_sum(const std::vector<torch::Tensor>& params) {
  std::int64_t n = 0;
  for (const auto& p : params) n += p.numel();
  return n;
}

void check_t_ins(const std::vector<TimeIndex>& t_ins) {
  for (const auto& t : t_ins) {
    if (!(t > 0 && t < 1)) throw DomainError("T_in " + to_string(t) + " must lie strictly inside (0, 1)");
  }
}

}  // namespace

ParameterBreakdown analytic_parameter_count(const ModelConfig& config) {
  ParameterBreakdown p;
  p.encoder = EncoderImpl::parameter_count(config);
  p.efst = config.num_blocks *
           EfstBlockImpl::parameter_count(config.base_channels, config.window_size, config.ablation.disable_efst);
  p.decoder = DecoderImpl::parameter_count(config);
  p.flow = flow::flow_parameter_count(config.flow_estimator);
  return p;
}

StvunNetImpl::StvunNetImpl(const ValidatedConfig& config) : config_(config) {
  const ModelConfig& cfg = config_.get();
  encoder_ = register_module("encoder", Encoder(cfg));
  for (int i = 0; i < cfg.num_blocks; ++i) {
    efst_.push_back(register_module(fmt::format("efst{}", i),
                                    EfstBlock(cfg.base_channels, cfg.window_size, cfg.ablation.disable_efst)));
  }
  decoder_ = register_module("decoder", Decoder(cfg));
  flow_ = register_module("flow", flow::make_flow_estimator(cfg.flow_estimator));
}

ForwardOutput StvunNetImpl::forward(const torch::Tensor& lr, std::vector<TimeIndex> t_ins,
                                    const ForwardOptions& options) {
  const ModelConfig& cfg = config_.get();
  if (lr.dim() != 5 || lr.size(1) != cfg.window_size || lr.size(2) != 3) {
    throw ShapeError(fmt::format("forward expects [N, {}, 3, h, w] input", cfg.window_size));
  }
  check_t_ins(t_ins);
  std::sort(t_ins.begin(), t_ins.end());
  const int c = cfg.center_index();
  const int r = cfg.scale_r;

  ForwardOutput out;
  out.t_ins = t_ins;
  const auto pyramid = encode(encoder_, lr);
  std::vector<torch::Tensor> fused, center_features, next_features;
  for (std::size_t i = 0; i < pyramid.num_blocks(); ++i) {
    auto result = efst_[i]->forward(pyramid.blocks[i]);
    fused.push_back(result.fused);
    if (options.diagnostics && result.scores.defined()) out.scores.push_back(result.scores.detach());
    center_features.push_back(pyramid.at(i, c));
    next_features.push_back(pyramid.at(i, c + 1));
  }

  auto spatial = decoder_->forward(center_features, fused);
  const auto x3 = lr.select(1, c);
  const auto x4 = lr.select(1, c + 1);
  out.center = compose_output(x3, spatial.residual, r);
  if (t_ins.empty()) return out;

  const auto flows = flow_->estimate_pair(x3, x4);
  ++flow_calls_;
  if (options.diagnostics) out.flows = flow::FlowPair{flows.forward.detach(), flows.backward.detach()};
  const auto& skips = cfg.ablation.use_efst_instead_of_D ? fused : spatial.trace;
  for (const auto& t : t_ins) {
    const auto scaled = flow::scale_flows(flows.forward, flows.backward, t);
    auto features = flow::interpolate_features(center_features, next_features, scaled);
    auto blend = flow::blend_lr(x3, x4, scaled);
    auto decoded = decoder_->forward(features, skips);
    out.intermediates.push_back(compose_output(blend, decoded.residual, r));
    out.lr_blends.push_back(blend);
  }
  return out;
}

void StvunNetImpl::reset_parameters(Rng& rng) {
  auto gen = rng.torch_generator();
  encoder_->reset_parameters(gen);
  for (auto& block : efst_) block->reset_parameters(gen);
  decoder_->reset_parameters(gen);
  flow_->reset_parameters(gen);
}

ParameterBreakdown StvunNetImpl::count_parameters() const {
  ParameterBreakdown p;
  p.encoder = numel_sum(encoder_->parameters());
  for (const auto& block : efst_) p.efst += numel_sum(block->parameters());
  p.decoder = numel_sum(decoder_->parameters());
  p.flow = numel_sum(flow_->parameters());
  return p;
}

std::vector<torch::Tensor> StvunNetImpl::spatial_parameters() const {
  std::vector<torch::Tensor> params = encoder_->parameters();
  for (const auto& block : efst_) {
    auto ps = block->parameters();
    params.insert(params.end(), ps.begin(), ps.end());
  }
  auto ps = decoder_->parameters();
  params.insert(params.end(), ps.begin(), ps.end());
  return params;
}

std::vector<torch::Tensor> StvunNetImpl::flow_parameters() const { return flow_->parameters(); }

StvunNet make_network(const ValidatedConfig& config, Rng& rng) {
  StvunNet net(config);
  net->reset_parameters(rng);
  return net;
}

// ---------------------------------------------------------------------------

std::vector<TimeIndex> uniform_t_ins(int n) {
  std::vector<TimeIndex> out;
  for (int k = 1; k <= n; ++k) out.emplace_back(k, n + 1);
  return out;
}

WindowResult forward_window(StvunNet& net, const std::vector<Frame>& window, const std::vector<TimeIndex>& t_ins,
                            bool diagnostics) {
  const ModelConfig& cfg = net->config();
  if (static_cast<int>(window.size()) != cfg.window_size) {
    throw ShapeError(fmt::format("window holds {} frames, expected {}", window.size(), cfg.window_size));
  }
  std::vector<torch::Tensor> stack;
  for (const auto& f : window) {
    if (f.height() != window[0].height() || f.width() != window[0].width()) {
      throw ShapeError("window frames differ in size");
    }
    stack.push_back(f.pixels);
  }
  torch::NoGradGuard no_grad;
  const auto dtype = net->parameters().front().scalar_type();
  auto lr = torch::stack(stack).unsqueeze(0).to(dtype);
  auto out = net->forward(lr, t_ins, ForwardOptions{diagnostics});

  const int c = cfg.center_index();
  const TimeIndex t0 = window[c].time;
  const TimeIndex t1 = window[c + 1].time;
  WindowResult result;
  result.hr_center = Frame{out.center.squeeze(0).to(torch::kFloat32).contiguous(), t0};
  for (std::size_t k = 0; k < out.t_ins.size(); ++k) {
    const TimeIndex t = t0 + out.t_ins[k] * (t1 - t0);
    result.intermediates.emplace_back(out.t_ins[k],
                                      Frame{out.intermediates[k].squeeze(0).to(torch::kFloat32).contiguous(), t});
    if (diagnostics) {
      result.lr_blends.push_back(Frame{out.lr_blends[k].squeeze(0).to(torch::kFloat32).contiguous(), t});
    }
  }
  if (diagnostics) {
    for (auto& s : out.scores) result.scores.push_back(s.squeeze(0).to(torch::kFloat32));
    if (out.flows) {
      result.flow_forward = FlowField{out.flows->forward.squeeze(0).to(torch::kFloat32), t0, t1};
      result.flow_backward = FlowField{out.flows->backward.squeeze(0).to(torch::kFloat32), t1, t0};
    }
  }
  return result;
}

Clip upsample_video(StvunNet& net, const Clip& lr, const std::vector<TimeIndex>& t_ins,
                    const WindowObserver& observer) {
  const auto L = static_cast<std::int64_t>(lr.size());
  if (L < 2) throw DataError("upsampling needs at least two input frames");
  check_clip(lr);
  const ModelConfig& cfg = net->config();
  const int c = cfg.center_index();
  std::vector<TimeIndex> sorted = t_ins;
  std::sort(sorted.begin(), sorted.end());

  Clip out;
  out.fps_label = lr.fps_label ? std::optional<double>(*lr.fps_label * static_cast<double>(t_ins.size() + 1))
                               : std::nullopt;
  for (std::int64_t k = 0; k < L; ++k) {
    std::vector<Frame> window;
    for (int j = 0; j < cfg.window_size; ++j) {
      window.push_back(lr.frames[data::reflect_time(k + j - c, L)]);
    }
    // Reflected slots carry their source time; the center pair is always real
    // for interior gaps.
    const bool has_gap = k + 1 < L;
    auto result = forward_window(net, window, has_gap ? sorted : std::vector<TimeIndex>{}, static_cast<bool>(observer));
    result.hr_center.time = lr.frames[k].time;
    out.frames.push_back(result.hr_center);
    for (auto& [t, frame] : result.intermediates) {
      frame.time = lr.frames[k].time + t * (lr.frames[k + 1].time - lr.frames[k].time);
      out.frames.push_back(frame);
    }
    if (observer) observer(k, result);
  }
  return out;
}

// ---------------------------------------------------------------------------

CheckpointMismatch::CheckpointMismatch(std::vector<std::string> diff)
    : Error([&] {
        std::string msg = "checkpoint does not match the requested architecture:";
        for (const auto& d : diff) msg += "\n  " + d;
        return msg;
      }()),
      diff_(std::move(diff)) {}

namespace {

torch::Tensor string_tensor(const std::string& s) {
  auto t = torch::empty({static_cast<std::int64_t>(s.size())}, torch::kInt8);
  if (!s.empty()) std::memcpy(t.data_ptr<std::int8_t>(), s.data(), s.size());
  return t;
}

std::string read_string(torch::serialize::InputArchive& ar, const std::string& key, const fs::path& path) {
  torch::Tensor t;
  if (!ar.try_read(key, t)) throw IOError(path, "checkpoint lacks key '" + key + "'");
  std::string s(static_cast<std::size_t>(t.numel()), '\0');
  if (t.numel() > 0) std::memcpy(s.data(), t.contiguous().data_ptr<std::int8_t>(), s.size());
  return s;
}

std::int64_t read_int(torch::serialize::InputArchive& ar, const std::string& key, const fs::path& path) {
  torch::Tensor t;
  if (!ar.try_read(key, t)) throw IOError(path, "checkpoint lacks key '" + key + "'");
  return t.item<std::int64_t>();
}

torch::serialize::InputArchive open_archive(const fs::path& path) {
  std::error_code ec;
  if (!fs::exists(path, ec)) throw IOError(path, "checkpoint not found");
  torch::serialize::InputArchive ar;
  try {
    ar.load_from(path.string());
  } catch (const c10::Error& e) {
    throw IOError(path, std::string("unreadable checkpoint: ") + e.what_without_backtrace());
  }
  const auto version = read_int(ar, "meta/version", path);
  if (version != kCheckpointVersion) {
    throw IOError(path, fmt::format("unsupported checkpoint version {}", version));
  }
  return ar;
}

}  // namespace

void save_checkpoint(const fs::path& path, StvunNet& net, const CheckpointMeta& meta,
                     torch::optim::Optimizer* optimizer) {
  torch::serialize::OutputArchive ar;
  ar.write("meta/version", torch::tensor(kCheckpointVersion));
  ar.write("meta/config", string_tensor(format_config(net->config())));
  ar.write("meta/fingerprint", string_tensor(config_fingerprint(net->config())));
  ar.write("meta/phase", string_tensor(meta.phase));
  ar.write("meta/iteration", torch::tensor(meta.iteration));
  ar.write("meta/rng", string_tensor(meta.rng_state));
  ar.write("meta/upsampling", string_tensor("bilinear;align_corners=false"));
  torch::serialize::OutputArchive model_ar;
  net->save(model_ar);
  ar.write("model", model_ar);
  if (optimizer) {
    torch::serialize::OutputArchive opt_ar;
    optimizer->save(opt_ar);
    ar.write("optimizer", opt_ar);
  }
  std::error_code ec;
  if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
  // Write-then-rename so an interrupted save never leaves a torn checkpoint.
  const fs::path tmp = path.string() + ".tmp";
  try {
    ar.save_to(tmp.string());
  } catch (const c10::Error& e) {
    throw IOError(path, std::string("cannot write checkpoint: ") + e.what_without_backtrace());
  }
  fs::rename(tmp, path, ec);
  if (ec) throw IOError(path, "cannot move checkpoint into place: " + ec.message());
}

ModelConfig read_checkpoint_config(const fs::path& path) {
  auto ar = open_archive(path);
  return parse_config_text(read_string(ar, "meta/config", path));
}

namespace {

CheckpointMeta read_meta(torch::serialize::InputArchive& ar, const fs::path& path) {
  CheckpointMeta meta;
  meta.phase = read_string(ar, "meta/phase", path);
  meta.iteration = read_int(ar, "meta/iteration", path);
  meta.rng_state = read_string(ar, "meta/rng", path);
  return meta;
}

}  // namespace

CheckpointMeta read_checkpoint_meta(const fs::path& path) {
  auto ar = open_archive(path);
  return read_meta(ar, path);
}

CheckpointMeta load_checkpoint(const fs::path& path, StvunNet& net, torch::optim::Optimizer* optimizer) {
  auto ar = open_archive(path);
  const ModelConfig stored = parse_config_text(read_string(ar, "meta/config", path));
  auto diff = fingerprint_diff(net->config(), stored);
  if (!diff.empty()) throw CheckpointMismatch(std::move(diff));

  const auto meta = read_meta(ar, path);
  try {
    torch::serialize::InputArchive model_ar;
    ar.read("model", model_ar);
    net->load(model_ar);
    if (optimizer) {
      torch::serialize::InputArchive opt_ar;
      if (!ar.try_read("optimizer", opt_ar)) throw IOError(path, "checkpoint has no optimizer state");
      optimizer->load(opt_ar);
    }
  } catch (const c10::Error& e) {
    throw IOError(path, std::string("cannot restore checkpoint: ") + e.what_without_backtrace());
  }
  return meta;
}

std::string parameter_digest(const std::vector<torch::Tensor>& params) {
  std::size_t h = 0;
  for (const auto& p : params) {
    auto c = p.detach().contiguous();
    const std::string_view bytes(static_cast<const char*>(c.data_ptr()), c.numel() * c.element_size());
    h = h * 1000003u ^ std::hash<std::string_view>{}(bytes);
  }
  return fmt::format("{:016x}", h);
}

}  // namespace stvun
