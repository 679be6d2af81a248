#include "stvun/training.hpp"

#include <fmt/format.h>

#include <cmath>
#include <fstream>

namespace fs = std::filesystem;

namespace stvun::train {

std::string phase_name(Phase phase) { return phase == Phase::Pretrain ? "pretrain" : "joint"; }

Phase parse_phase(const std::string& name) {
  if (name == "pretrain") return Phase::Pretrain;
  if (name == "joint") return Phase::Joint;
  throw DataError("unknown training phase '" + name + "'");
}

TrainSchedule paper_schedule(Phase phase) {
  TrainSchedule s;
  s.phase = phase;
  s.batch_size = 32;
  s.lr_decay_factor = 2.0;
  s.lr_decay_every = 100000;
  if (phase == Phase::Pretrain) {
    s.total_iters = 300000;
    s.patch_size = 128;
    s.lr_init = 1e-4;
  } else {
    s.total_iters = 400000;
    s.patch_size = 256;
    s.lr_init = 5e-5;
  }
  return s;
}

TrainSchedule desk_schedule(Phase phase) {
  TrainSchedule s = paper_schedule(phase);
  s.batch_size = 4;
  s.patch_size = 64;
  s.total_iters = phase == Phase::Pretrain ? 2000 : 3000;
  // Same shape as the published schedule: two halvings over the phase.
  s.lr_decay_every = phase == Phase::Pretrain ? 700 : 1000;
  s.lr_init = phase == Phase::Pretrain ? 4e-4 : 2e-4;
  s.checkpoint_every = 500;
  return s;
}

double learning_rate_at(const TrainSchedule& schedule, std::int64_t iteration) {
  const auto drops = schedule.lr_decay_every > 0 ? iteration / schedule.lr_decay_every : 0;
  return schedule.lr_init / std::pow(schedule.lr_decay_factor, static_cast<double>(drops));
}

void check_schedule(const TrainSchedule& s, const ModelConfig& config) {
  if (s.total_iters < 0) throw DataError("total_iters must be >= 0");
  if (s.batch_size < 1) throw DataError("batch_size must be >= 1");
  if (s.patch_size < config.scale_r || s.patch_size % config.scale_r != 0) {
    throw DataError(fmt::format("patch_size {} must be a positive multiple of scale {}", s.patch_size, config.scale_r));
  }
  if (!(s.lr_init > 0.0)) throw DataError("lr_init must be > 0");
  if (!(s.lr_decay_factor >= 1.0)) throw DataError("lr_decay_factor must be >= 1");
  if (s.lr_decay_every < 0) throw DataError("lr_decay_every must be >= 0");
  if (s.checkpoint_every < 0) throw DataError("checkpoint_every must be >= 0");
}

LossReport make_report(std::int64_t iteration, double l_m, double l_s, double l_f, const ModelConfig& config,
                       double lr) {
  LossReport r;
  r.iteration = iteration;
  r.l_m = l_m;
  r.l_s = l_s;
  r.l_f = l_f;
  r.total = config.lambda_m * l_m + config.lambda_s * l_s + config.lambda_f * l_f;
  r.lr = lr;
  return r;
}

torch::Tensor loss_spatial(const torch::Tensor& pred, const torch::Tensor& gt) {
  if (pred.sizes() != gt.sizes()) throw ShapeError("loss_spatial: shapes differ");
  return (pred - gt).abs().mean();
}

torch::Tensor loss_interp(const std::vector<std::pair<TimeIndex, torch::Tensor>>& preds,
                          const std::vector<std::pair<TimeIndex, torch::Tensor>>& gts) {
  if (preds.size() != gts.size()) throw MismatchError("loss_interp: T_in sets differ in size");
  torch::Tensor total;
  for (const auto& [t, pred] : preds) {
    const auto match = std::find_if(gts.begin(), gts.end(), [&](const auto& g) { return g.first == t; });
    if (match == gts.end()) throw MismatchError("loss_interp: no ground truth for T_in " + to_string(t));
    if (pred.sizes() != match->second.sizes()) throw ShapeError("loss_interp: shapes differ");
    auto term = (pred - match->second).abs().mean();
    total = total.defined() ? total + term : term;
  }
  return total.defined() ? total : torch::zeros({});
}

LossTerms compute_losses(StvunNet& net, const data::Batch& batch, Phase phase) {
  const ModelConfig& cfg = net->config();
  LossTerms terms;
  if (phase == Phase::Pretrain) {
    auto out = net->forward(batch.lr, {});
    terms.l_s = loss_spatial(out.center, batch.hr_center);
    terms.l_m = torch::zeros({}, terms.l_s.options());
    terms.l_f = torch::zeros({}, terms.l_s.options());
    terms.total = cfg.lambda_s * terms.l_s;
    return terms;
  }
  auto out = net->forward(batch.lr, batch.t_ins);
  terms.l_s = loss_spatial(out.center, batch.hr_center);
  std::vector<std::pair<TimeIndex, torch::Tensor>> preds, gts;
  std::vector<torch::Tensor> lr_targets;
  for (std::size_t k = 0; k < out.t_ins.size(); ++k) {
    preds.emplace_back(out.t_ins[k], out.intermediates[k]);
    const auto slot = std::find(batch.t_ins.begin(), batch.t_ins.end(), out.t_ins[k]) - batch.t_ins.begin();
    gts.emplace_back(out.t_ins[k], batch.hr_intermediates.select(1, slot));
    lr_targets.push_back(batch.lr_intermediates.select(1, slot));
  }
  terms.l_f = loss_interp(preds, gts);
  terms.l_m = flow::motion_loss(out.lr_blends, lr_targets);
  terms.total = cfg.lambda_m * terms.l_m + cfg.lambda_s * terms.l_s + cfg.lambda_f * terms.l_f;
  return terms;
}

// ---------------------------------------------------------------------------

Trainer::Trainer(StvunNet net, ValidatedConfig config, TrainSchedule schedule, const data::Dataset& dataset,
                 Rng rng, TrainOptions options)
    : net_(std::move(net)),
      config_(std::move(config)),
      schedule_(schedule),
      dataset_(dataset),
      rng_(std::move(rng)),
      options_(std::move(options)) {
  check_schedule(schedule_, config_.get());
  data::check_index(dataset_.index, config_.get());
  if (dataset_.hr_clips.size() != dataset_.index.clips.size()) throw DataError("dataset clips not loaded");
  params_ = schedule_.phase == Phase::Pretrain ? net_->spatial_parameters() : net_->parameters();
  optimizer_ = std::make_unique<torch::optim::Adam>(params_, torch::optim::AdamOptions(schedule_.lr_init));
  if (!options_.out_dir.empty()) fs::create_directories(options_.out_dir);
}

fs::path Trainer::checkpoint_path() const {
  return options_.out_dir / (phase_name(schedule_.phase) + "_latest.ckpt");
}

LossReport Trainer::step() {
  const double lr = learning_rate_at(schedule_, iteration_);
  for (auto& group : optimizer_->param_groups()) {
    static_cast<torch::optim::AdamOptions&>(group.options()).lr(lr);
  }
  const auto samples =
      data::sample_batch(dataset_, config_, schedule_.patch_size, schedule_.batch_size, rng_, options_.augment);
  auto batch = data::collate(samples);
  const auto dtype = params_.front().scalar_type();
  batch.lr = batch.lr.to(dtype);
  batch.hr_center = batch.hr_center.to(dtype);
  if (batch.hr_intermediates.defined()) {
    batch.hr_intermediates = batch.hr_intermediates.to(dtype);
    batch.lr_intermediates = batch.lr_intermediates.to(dtype);
  }

  net_->train();
  auto terms = compute_losses(net_, batch, schedule_.phase);
  optimizer_->zero_grad();
  terms.total.backward();
  if (schedule_.clip_norm > 0.0) torch::nn::utils::clip_grad_norm_(params_, schedule_.clip_norm);
  optimizer_->step();
  ++iteration_;

  auto report = make_report(iteration_, terms.l_m.item<double>(), terms.l_s.item<double>(),
                            terms.l_f.item<double>(), config_.get(), lr);
  if (options_.log_every > 0 && iteration_ % options_.log_every == 0) append_log(report);
  if (options_.on_report) options_.on_report(report);
  return report;
}

void Trainer::run_for(std::int64_t count) {
  for (std::int64_t k = 0; k < count && iteration_ < schedule_.total_iters; ++k) {
    step();
    if (!options_.out_dir.empty() && schedule_.checkpoint_every > 0 &&
        iteration_ % schedule_.checkpoint_every == 0) {
      save(checkpoint_path());
    }
  }
}

void Trainer::run() {
  run_for(schedule_.total_iters - iteration_);
  if (!options_.out_dir.empty()) {
    save(checkpoint_path());
    save(options_.out_dir / (phase_name(schedule_.phase) + "_final.ckpt"));
  }
}

void Trainer::save(const fs::path& path) {
  save_checkpoint(path, net_, CheckpointMeta{phase_name(schedule_.phase), iteration_, rng_.serialize()},
                  optimizer_.get());
}

void Trainer::resume(const fs::path& path) {
  const auto stored = read_checkpoint_meta(path);
  if (stored.phase != phase_name(schedule_.phase)) {
    throw DataError("checkpoint phase '" + stored.phase + "' does not match '" + phase_name(schedule_.phase) + "'");
  }
  const auto meta = load_checkpoint(path, net_, optimizer_.get());
  iteration_ = meta.iteration;
  rng_ = Rng::deserialize(meta.rng_state);
}

void Trainer::append_log(const LossReport& r) {
  if (options_.out_dir.empty()) return;
  const fs::path path = options_.out_dir / options_.log_name;
  const bool fresh = !fs::exists(path);
  std::ofstream out(path, std::ios::app);
  if (!out) throw IOError(path, "cannot append to loss log");
  if (fresh) out << "iteration,l_m,l_s,l_f,total,lr\n";
  out << fmt::format("{},{},{},{},{},{}\n", r.iteration, r.l_m, r.l_s, r.l_f, r.total, r.lr);
}

StvunNet pretrain(const data::Dataset& dataset, const ValidatedConfig& config, const TrainSchedule& schedule,
                  Rng& rng, const TrainOptions& options) {
  if (schedule.phase != Phase::Pretrain) throw DataError("pretrain needs a pretrain schedule");
  auto net = make_network(config, rng);
  Trainer trainer(net, config, schedule, dataset, rng.fork(), options);
  trainer.run();
  return trainer.net();
}

StvunNet train_joint(const data::Dataset& dataset, const ValidatedConfig& config, const TrainSchedule& schedule,
                     StvunNet init, Rng& rng, const TrainOptions& options) {
  if (schedule.phase != Phase::Joint) throw DataError("train_joint needs a joint schedule");
  Trainer trainer(std::move(init), config, schedule, dataset, rng.fork(), options);
  trainer.run();
  return trainer.net();
}

}  // namespace stvun::train
