#pragma once

#include "stvun/core_types.hpp"
#include "stvun/dataio.hpp"
#include "stvun/model.hpp"

#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace stvun::train {

enum class Phase { Pretrain, Joint };

std::string phase_name(Phase phase);
Phase parse_phase(const std::string& name);

struct TrainSchedule {
  Phase phase = Phase::Pretrain;
  std::int64_t total_iters = 300000;
  int batch_size = 32;
  int patch_size = 128;
  double lr_init = 1e-4;
  double lr_decay_factor = 2.0;
  std::int64_t lr_decay_every = 100000;
  double clip_norm = 10.0;  // <= 0 disables clipping
  std::int64_t checkpoint_every = 500;
};

/// Published schedule: 300K pretraining iterations (batch 32, 128^2 patches,
/// lr 1e-4) then 400K joint iterations (256^2 patches, lr 5e-5), halving the
/// rate every 100K iterations.
TrainSchedule paper_schedule(Phase phase);

/// Scaled-down schedule that exercises every code path on a desk machine:
/// 2000 + 3000 iterations, batch 4, 64^2 patches.
TrainSchedule desk_schedule(Phase phase);

/// lr(i) = lr_init / factor^floor(i / decay_every).
double learning_rate_at(const TrainSchedule& schedule, std::int64_t iteration);

void check_schedule(const TrainSchedule& schedule, const ModelConfig& config);

struct LossReport {
  std::int64_t iteration = 0;
  double l_m = 0.0;
  double l_s = 0.0;
  double l_f = 0.0;
  double total = 0.0;
  double lr = 0.0;
};

/// total = lambda_M l_m + lambda_S l_s + lambda_F l_f.
LossReport make_report(std::int64_t iteration, double l_m, double l_s, double l_f, const ModelConfig& config,
                       double lr);

/// Mean absolute error over every pixel and channel.
torch::Tensor loss_spatial(const torch::Tensor& pred, const torch::Tensor& gt);

/// Sum over T of the per-frame mean absolute error. The T_in sets must match
/// exactly (MismatchError otherwise).
torch::Tensor loss_interp(const std::vector<std::pair<TimeIndex, torch::Tensor>>& preds,
                          const std::vector<std::pair<TimeIndex, torch::Tensor>>& gts);

/// Weighted loss terms for one batch.
struct LossTerms {
  torch::Tensor l_m, l_s, l_f, total;
};

LossTerms compute_losses(StvunNet& net, const data::Batch& batch, Phase phase);

struct TrainOptions {
  std::filesystem::path out_dir;   // checkpoints and loss log; empty = none
  std::string log_name = "loss_log.csv";
  std::function<void(const LossReport&)> on_report;
  int log_every = 1;
  bool augment = true;
};

/// Owns one optimization phase over a network.
///
/// Pretraining updates encoder, EFST and decoder on the spatial loss only and
/// never touches the flow estimator; joint training updates every parameter
/// on the weighted sum of the motion, spatial and interpolation losses.
class Trainer {
 public:
  Trainer(StvunNet net, ValidatedConfig config, TrainSchedule schedule, const data::Dataset& dataset, Rng rng,
          TrainOptions options = {});

  /// One sampled batch, one Adam step.
  LossReport step();
  /// Steps until `schedule.total_iters`, checkpointing on the configured
  /// cadence and at the end of the phase.
  void run();
  /// Steps at most `count` more iterations (without the end-of-phase save).
  void run_for(std::int64_t count);

  void save(const std::filesystem::path& path);
  /// Restores parameters, optimizer moments, sampling stream and iteration.
  void resume(const std::filesystem::path& path);

  std::int64_t iteration() const { return iteration_; }
  StvunNet& net() { return net_; }
  const TrainSchedule& schedule() const { return schedule_; }
  const Rng& rng() const { return rng_; }
  std::filesystem::path checkpoint_path() const;

 private:
  void append_log(const LossReport& report);

  StvunNet net_;
  ValidatedConfig config_;
  TrainSchedule schedule_;
  const data::Dataset& dataset_;
  Rng rng_;
  TrainOptions options_;
  std::vector<torch::Tensor> params_;
  std::unique_ptr<torch::optim::Adam> optimizer_;
  std::int64_t iteration_ = 0;
};

/// VSR pretraining from a freshly initialized network.
StvunNet pretrain(const data::Dataset& dataset, const ValidatedConfig& config, const TrainSchedule& schedule,
                  Rng& rng, const TrainOptions& options = {});

/// Joint training starting from `init`.
StvunNet train_joint(const data::Dataset& dataset, const ValidatedConfig& config, const TrainSchedule& schedule,
                     StvunNet init, Rng& rng, const TrainOptions& options = {});

}  // namespace stvun::train
