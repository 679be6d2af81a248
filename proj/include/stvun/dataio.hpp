#pragma once

#include "stvun/core_types.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace stvun::data {

// ---------------------------------------------------------------------------
// Degradation
// ---------------------------------------------------------------------------

struct DegradeParams {
  int scale_r = 4;
  double sigma = 1.5;
  int offset = 0;  // subsampling phase inside each r x r cell
};

inline DegradeParams degrade_params(const ModelConfig& c) {
  return DegradeParams{c.scale_r, c.blur_sigma, c.subsample_offset};
}

/// Normalized 1-D Gaussian taps with radius ceil(3 sigma).
std::vector<double> gaussian_taps(double sigma);

/// Index into [0, n) with mirror reflection that excludes the edge sample
/// (-1 -> 1, n -> n - 2).
std::int64_t reflect_index(std::int64_t i, std::int64_t n);

/// Blur with a separable Gaussian (reflect padding), then keep every r-th
/// sample starting at `offset`. Works on any [..., H, W] tensor.
torch::Tensor degrade_tensor(const torch::Tensor& hr, const DegradeParams& params);

/// LR frame of size (H/r, W/r). Throws SizeError when H or W is not a
/// multiple of r.
Frame degrade(const Frame& hr, int scale_r, double sigma, int offset = 0);

// ---------------------------------------------------------------------------
// Training samples and augmentation
// ---------------------------------------------------------------------------

struct Intermediate {
  TimeIndex t_in;  // in (0, 1), relative to the center pair
  Frame hr;        // Y_T
  Frame lr;        // X_T, target of the motion loss
};

/// One training window. `lr_inputs` are the model inputs; `lr_trailing` is the
/// input that follows the window, kept so time reversal can re-center the
/// window on the same center pair.
struct TrainingSample {
  std::vector<Frame> lr_inputs;
  Frame lr_trailing;
  Frame hr_center;     // Y at the window center
  Frame hr_following;  // Y at the next input slot
  std::vector<Intermediate> intermediates;  // sorted by t_in
};

struct AugmentOps {
  bool flip_lr = false;
  int quarter_turns = 0;  // 0, 1 (90 degrees) or 2 (180 degrees)
  bool reverse_time = false;
};

AugmentOps draw_augment(Rng& rng);

/// Applies the geometric part of `ops` to a [..., H, W] tensor.
torch::Tensor apply_geometry(const torch::Tensor& raster, const AugmentOps& ops);

/// Same transform on every LR and HR frame; time reversal swaps the center
/// pair and maps T_in to 1 - T_in. Throws AugmentError on a 90-degree turn of
/// a non-square sample.
TrainingSample apply_augment(const TrainingSample& sample, const AugmentOps& ops);
TrainingSample augment(const TrainingSample& sample, Rng& rng);

// ---------------------------------------------------------------------------
// Dataset index and sampling
// ---------------------------------------------------------------------------

struct ClipEntry {
  std::string name;
  std::filesystem::path hr_dir;
  std::filesystem::path lr_dir;  // empty when no LR mirror exists
  std::int64_t frame_count = 0;
};

struct DatasetIndex {
  std::vector<ClipEntry> clips;
  int stride_s = 2;
};

/// Minimum clip length for a window of `window_size` inputs spaced by stride.
std::int64_t min_clip_frames(int window_size, int stride_s);

/// Throws DataError when the index is empty or a clip is too short.
void check_index(const DatasetIndex& index, const ModelConfig& config);

/// Every subdirectory of `root` that holds numbered frames, sorted by name.
DatasetIndex scan_frame_root(const std::filesystem::path& root, int stride_s);

void write_manifest(const DatasetIndex& index, const std::filesystem::path& path);
DatasetIndex read_manifest(const std::filesystem::path& path);

/// Dataset index with its HR clips resident in memory.
struct Dataset {
  DatasetIndex index;
  std::vector<Clip> hr_clips;
};

Dataset load_dataset(const DatasetIndex& index);

/// Mirror-reflects `i` into [0, n): the boundary rule shared by training
/// windows, sliding-window inference and evaluation.
std::int64_t reflect_time(std::int64_t i, std::int64_t n);

/// Random co-registered crops. HR patches are patch_size^2, LR patches
/// (patch_size / r)^2; LR frames are synthesized from the augmented HR crops.
std::vector<TrainingSample> sample_batch(const Dataset& dataset, const ValidatedConfig& config,
                                         int patch_size, int batch, Rng& rng,
                                         bool apply_augmentation = true);

/// Stacked tensors for a batch whose samples share the same T_in set.
struct Batch {
  torch::Tensor lr;            // [N, window, 3, h, w]
  torch::Tensor hr_center;     // [N, 3, H, W]
  std::vector<TimeIndex> t_ins;
  torch::Tensor hr_intermediates;  // [N, K, 3, H, W]
  torch::Tensor lr_intermediates;  // [N, K, 3, h, w]
};

Batch collate(const std::vector<TrainingSample>& samples);

// ---------------------------------------------------------------------------
// Frame files
// ---------------------------------------------------------------------------

/// Maps [0, 1] floats to the 8-bit grid used at file boundaries.
torch::Tensor quantize_8bit(const torch::Tensor& pixels);

void write_frame_png(const Frame& frame, const std::filesystem::path& path);
Frame read_frame_png(const std::filesystem::path& path, TimeIndex time = 0);

/// Writes 000000.png, 000001.png, ... into `directory` (created if needed).
void write_frames(const Clip& clip, const std::filesystem::path& directory);
/// Reads a contiguous numbered sequence; a missing index is an IOError.
Clip read_frames(const std::filesystem::path& directory);
std::int64_t count_frames(const std::filesystem::path& directory);

std::string frame_filename(std::int64_t index);

/// Sidecar describing how an LR set was generated.
void write_degradation_sidecar(const std::filesystem::path& path, const DegradeParams& params,
                               int stride_s, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Synthetic corpus
// ---------------------------------------------------------------------------

/// Procedural clip: drifting multi-frequency texture with a moving textured
/// disk. Deterministic for a given seed; frame t sits at time index t.
Clip synthesize_clip(std::int64_t frames, std::int64_t height, std::int64_t width,
                     std::uint64_t seed);

}  // namespace stvun::data
