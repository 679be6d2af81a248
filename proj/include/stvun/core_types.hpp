#pragma once

#include <torch/torch.h>

#include <boost/rational.hpp>

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace stvun {

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid configuration; `field()` names the offending key.
class ConfigError : public Error {
 public:
  ConfigError(std::string field, const std::string& message)
      : Error("config field '" + field + "': " + message), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

class ShapeError : public Error { using Error::Error; };
class SizeError : public Error { using Error::Error; };
class DomainError : public Error { using Error::Error; };
class AugmentError : public Error { using Error::Error; };
class PatchError : public Error { using Error::Error; };
class MismatchError : public Error { using Error::Error; };
class DataError : public Error { using Error::Error; };

class IOError : public Error {
 public:
  IOError(std::filesystem::path path, const std::string& message)
      : Error(path.string() + ": " + message), path_(std::move(path)) {}
  const std::filesystem::path& path() const noexcept { return path_; }

 private:
  std::filesystem::path path_;
};

// ---------------------------------------------------------------------------
// Time indices and rasters
// ---------------------------------------------------------------------------

/// Exact time position of a frame. Input frames sit on integers, intermediates
/// on fractions such as 7/2.
using TimeIndex = boost::rational<std::int64_t>;

inline double to_double(const TimeIndex& t) { return boost::rational_cast<double>(t); }
std::string to_string(const TimeIndex& t);

/// One RGB frame. `pixels` is a float32 tensor of shape [3, H, W] holding
/// values in [0, 1]. Frames are treated as immutable once built.
struct Frame {
  torch::Tensor pixels;
  TimeIndex time{0};

  std::int64_t height() const { return pixels.size(1); }
  std::int64_t width() const { return pixels.size(2); }
};

/// Validates shape/finiteness and returns a contiguous float32 frame.
Frame make_frame(torch::Tensor pixels, TimeIndex time = 0);

struct Clip {
  std::vector<Frame> frames;
  std::optional<double> fps_label;

  std::size_t size() const { return frames.size(); }
};

/// Throws ShapeError/DataError if the frames disagree in size or time order.
void check_clip(const Clip& clip);

/// Dense displacement field in pixels: `vectors` is [2, H, W] with channel 0
/// the horizontal (x) and channel 1 the vertical (y) component.
struct FlowField {
  torch::Tensor vectors;
  TimeIndex src_time{0};
  TimeIndex dst_time{0};
};

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

struct AblationFlags {
  bool disable_efst = false;           // Ẽ := E (early fusion only)
  bool use_efst_instead_of_D = false;  // intermediate pass skips from Ẽ, not D
};

struct ModelConfig {
  int scale_r = 4;
  int num_blocks = 3;
  int base_channels = 64;
  int window_size = 7;
  int growth = 32;
  int encoder_layers = 4;
  int decoder_layers = 8;
  double lambda_m = 1.0;
  double lambda_s = 1.0;
  double lambda_f = 1.0;
  double leaky_slope = 0.1;
  AblationFlags ablation;
  std::string flow_estimator = "pyramid-lite";
  // Degradation used to synthesize LR frames.
  double blur_sigma = 1.5;
  int subsample_offset = 0;
  int stride_s = 2;

  int center_index() const { return window_size / 2; }
};

/// A ModelConfig that passed validation. Only `validate_config` creates one.
class ValidatedConfig {
 public:
  const ModelConfig& get() const noexcept { return config_; }
  const ModelConfig* operator->() const noexcept { return &config_; }
  operator const ModelConfig&() const noexcept { return config_; }

 private:
  friend ValidatedConfig validate_config(const ModelConfig& config);
  explicit ValidatedConfig(ModelConfig config) : config_(std::move(config)) {}
  ModelConfig config_;
};

ValidatedConfig validate_config(const ModelConfig& config);

/// Flat `key = value` text form; `parse_config_text(format_config(c)) == c`.
std::string format_config(const ModelConfig& config);
ModelConfig parse_config_text(const std::string& text, const ModelConfig& base = {});
ModelConfig load_config_file(const std::filesystem::path& path, const ModelConfig& base = {});

/// Key/value view of every config field, in file order.
std::vector<std::pair<std::string, std::string>> config_fields(const ModelConfig& config);

/// Fields that fix the parameter layout. Two configs with equal fingerprints
/// can exchange checkpoints.
std::string config_fingerprint(const ModelConfig& config);

/// Architecture fields that differ between two configs, as "key: a != b".
std::vector<std::string> fingerprint_diff(const ModelConfig& expected, const ModelConfig& actual);

// ---------------------------------------------------------------------------
// Randomness
// ---------------------------------------------------------------------------

/// Explicit random stream handed to every stochastic operation.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform integer in [lo, hi].
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);
  bool coin() { return uniform_int(0, 1) == 1; }
  /// Independent child stream; advances this stream by one draw.
  Rng fork() { return Rng(next_u64()); }
  /// Torch generator seeded from this stream, for tensor initializers.
  torch::Generator torch_generator();

  std::string serialize() const;
  static Rng deserialize(const std::string& state);

  bool operator==(const Rng& other) const { return engine_ == other.engine_; }

 private:
  std::mt19937_64 engine_;
};

/// Seeds torch's global generator and returns the root stream for `seed`.
Rng seed_all(std::uint64_t seed);

// ---------------------------------------------------------------------------
// Feature pyramid
// ---------------------------------------------------------------------------

/// Encoder outputs e^i_t. `blocks[i]` holds block i for every time slot as a
/// [N, T, C, H, W] tensor; `times[t]` labels slot t.
struct FeaturePyramid {
  std::vector<torch::Tensor> blocks;
  std::vector<TimeIndex> times;

  std::size_t num_blocks() const { return blocks.size(); }
  std::size_t num_times() const { return times.size(); }
  /// [N, C, H, W] feature map of block `i` (0-based) at slot `t`.
  torch::Tensor at(std::size_t i, std::size_t t) const;
};

}  // namespace stvun
