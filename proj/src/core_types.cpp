#include "stvun/core_types.hpp"

#include <boost/program_options.hpp>

#include <algorithm>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

namespace po = boost::program_options;

namespace stvun {

std::string to_string(const TimeIndex& t) {
  if (t.denominator() == 1) return std::to_string(t.numerator());
  return std::to_string(t.numerator()) + "/" + std::to_string(t.denominator());
}

Frame make_frame(torch::Tensor pixels, TimeIndex time) {
  if (!pixels.defined() || pixels.dim() != 3 || pixels.size(0) != 3) {
    throw ShapeError("frame pixels must be a [3, H, W] tensor");
  }
  if (pixels.size(1) < 1 || pixels.size(2) < 1) throw ShapeError("frame has empty extent");
  pixels = pixels.detach().to(torch::kFloat32).contiguous();
  if (!torch::isfinite(pixels).all().item<bool>()) throw DomainError("frame pixels must be finite");
  return Frame{std::move(pixels), time};
}

void check_clip(const Clip& clip) {
  for (std::size_t k = 1; k < clip.frames.size(); ++k) {
    const Frame& a = clip.frames[k - 1];
    const Frame& b = clip.frames[k];
    if (a.height() != b.height() || a.width() != b.width()) {
      throw ShapeError(fmt::format("clip frame {} is {}x{}, frame 0 is {}x{}", k, b.height(),
                                   b.width(), a.height(), a.width()));
    }
    if (!(a.time < b.time)) {
      throw DataError(fmt::format("clip time indices not strictly increasing at frame {}", k));
    }
  }
}

// ---------------------------------------------------------------------------

ValidatedConfig validate_config(const ModelConfig& input) {
  ModelConfig c = input;
  std::transform(c.flow_estimator.begin(), c.flow_estimator.end(), c.flow_estimator.begin(),
                 [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
  if (c.scale_r != 2 && c.scale_r != 4) throw ConfigError("scale_r", "must be 2 or 4");
  if (c.window_size < 3 || c.window_size % 2 == 0) {
    throw ConfigError("window_size", "must be odd and >= 3");
  }
  if (c.num_blocks < 1) throw ConfigError("num_blocks", "must be >= 1");
  if (c.base_channels < 1) throw ConfigError("base_channels", "must be >= 1");
  if (c.growth < 1) throw ConfigError("growth", "must be >= 1");
  if (c.encoder_layers < 1) throw ConfigError("encoder_layers", "must be >= 1");
  if (c.decoder_layers < 1) throw ConfigError("decoder_layers", "must be >= 1");
  if (!(c.lambda_m >= 0.0)) throw ConfigError("lambda_m", "must be >= 0");
  if (!(c.lambda_s >= 0.0)) throw ConfigError("lambda_s", "must be >= 0");
  if (!(c.lambda_f >= 0.0)) throw ConfigError("lambda_f", "must be >= 0");
  if (c.leaky_slope != 0.1) throw ConfigError("leaky_slope", "is fixed at 0.1");
  if (c.flow_estimator != "zero" && c.flow_estimator != "pyramid-lite") {
    throw ConfigError("flow.estimator", "must be 'zero' or 'pyramid-lite'");
  }
  if (!(c.blur_sigma > 0.0)) throw ConfigError("blur_sigma", "must be > 0");
  if (c.subsample_offset < 0 || c.subsample_offset >= c.scale_r) {
    throw ConfigError("subsample_offset", "must lie in [0, scale_r)");
  }
  if (c.stride_s < 2) throw ConfigError("stride_s", "must be >= 2");
  return ValidatedConfig(std::move(c));
}

namespace {

std::string format_double(double v) { return fmt::format("{}", v); }

po::options_description config_options(ModelConfig& c) {
  po::options_description desc("model");
  desc.add_options()
      ("scale_r", po::value(&c.scale_r))
      ("num_blocks", po::value(&c.num_blocks))
      ("base_channels", po::value(&c.base_channels))
      ("window_size", po::value(&c.window_size))
      ("growth", po::value(&c.growth))
      ("encoder_layers", po::value(&c.encoder_layers))
      ("decoder_layers", po::value(&c.decoder_layers))
      ("lambda_m", po::value(&c.lambda_m))
      ("lambda_s", po::value(&c.lambda_s))
      ("lambda_f", po::value(&c.lambda_f))
      ("leaky_slope", po::value(&c.leaky_slope))
      ("disable_efst", po::value(&c.ablation.disable_efst))
      ("use_efst_instead_of_D", po::value(&c.ablation.use_efst_instead_of_D))
      ("flow.estimator", po::value(&c.flow_estimator))
      ("blur_sigma", po::value(&c.blur_sigma))
      ("subsample_offset", po::value(&c.subsample_offset))
      ("stride_s", po::value(&c.stride_s));
  return desc;
}

}  // namespace

std::vector<std::pair<std::string, std::string>> config_fields(const ModelConfig& c) {
  auto b = [](bool v) { return std::string(v ? "true" : "false"); };
  return {
      {"scale_r", std::to_string(c.scale_r)},
      {"num_blocks", std::to_string(c.num_blocks)},
      {"base_channels", std::to_string(c.base_channels)},
      {"window_size", std::to_string(c.window_size)},
      {"growth", std::to_string(c.growth)},
      {"encoder_layers", std::to_string(c.encoder_layers)},
      {"decoder_layers", std::to_string(c.decoder_layers)},
      {"lambda_m", format_double(c.lambda_m)},
      {"lambda_s", format_double(c.lambda_s)},
      {"lambda_f", format_double(c.lambda_f)},
      {"leaky_slope", format_double(c.leaky_slope)},
      {"disable_efst", b(c.ablation.disable_efst)},
      {"use_efst_instead_of_D", b(c.ablation.use_efst_instead_of_D)},
      {"flow.estimator", c.flow_estimator},
      {"blur_sigma", format_double(c.blur_sigma)},
      {"subsample_offset", std::to_string(c.subsample_offset)},
      {"stride_s", std::to_string(c.stride_s)},
  };
}

std::string format_config(const ModelConfig& config) {
  std::string out;
  for (const auto& [key, value] : config_fields(config)) out += key + " = " + value + "\n";
  return out;
}

ModelConfig parse_config_text(const std::string& text, const ModelConfig& base) {
  ModelConfig c = base;
  const auto desc = config_options(c);
  std::istringstream in(text);
  po::variables_map vm;
  try {
    po::store(po::parse_config_file(in, desc, /*allow_unregistered=*/false), vm);
    po::notify(vm);
  } catch (const po::unknown_option& e) {
    throw ConfigError(e.get_option_name(), "unknown key");
  } catch (const po::error_with_option_name& e) {
    throw ConfigError(e.get_option_name(), e.what());
  } catch (const po::error& e) {
    throw ConfigError("<file>", e.what());
  }
  return c;
}

ModelConfig load_config_file(const std::filesystem::path& path, const ModelConfig& base) {
  std::ifstream in(path);
  if (!in) throw IOError(path, "cannot open config file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str(), base);
}

namespace {

const std::vector<std::string>& fingerprint_keys() {
  static const std::vector<std::string> keys = {
      "scale_r",        "num_blocks",     "base_channels", "window_size", "growth",
      "encoder_layers", "decoder_layers", "disable_efst",  "flow.estimator"};
  return keys;
}

std::map<std::string, std::string> fingerprint_map(const ModelConfig& c) {
  std::map<std::string, std::string> out;
  const auto& keys = fingerprint_keys();
  for (auto& [k, v] : config_fields(c)) {
    if (std::find(keys.begin(), keys.end(), k) != keys.end()) out[k] = v;
  }
  return out;
}

}  // namespace

std::string config_fingerprint(const ModelConfig& config) {
  const auto fields = fingerprint_map(config);
  std::string out;
  for (const auto& k : fingerprint_keys()) out += k + "=" + fields.at(k) + ";";
  return out;
}

std::vector<std::string> fingerprint_diff(const ModelConfig& expected, const ModelConfig& actual) {
  const auto a = fingerprint_map(expected);
  const auto b = fingerprint_map(actual);
  std::vector<std::string> diff;
  for (const auto& k : fingerprint_keys()) {
    if (a.at(k) != b.at(k)) diff.push_back(k + ": " + a.at(k) + " != " + b.at(k));
  }
  return diff;
}

// ---------------------------------------------------------------------------

std::int64_t Rng::uniform_int(std::int64_t lo, std::int64_t hi) {
  // Explicit rejection sampling keeps streams identical across standard
  // library implementations.
  const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
  if (span == 0) return static_cast<std::int64_t>(engine_());
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % span;
  std::uint64_t draw;
  do {
    draw = engine_();
  } while (draw >= limit);
  return lo + static_cast<std::int64_t>(draw % span);
}

torch::Generator Rng::torch_generator() {
  auto gen = at::make_generator<at::CPUGeneratorImpl>(next_u64());
  return gen;
}

std::string Rng::serialize() const {
  std::ostringstream out;
  out << engine_;
  return out.str();
}

Rng Rng::deserialize(const std::string& state) {
  Rng rng;
  std::istringstream in(state);
  in >> rng.engine_;
  if (!in) throw DataError("malformed RNG state");
  return rng;
}

Rng seed_all(std::uint64_t seed) {
  torch::manual_seed(seed);
  return Rng(seed);
}

torch::Tensor FeaturePyramid::at(std::size_t i, std::size_t t) const {
  return blocks.at(i).select(1, static_cast<std::int64_t>(t));
}

}  // namespace stvun
