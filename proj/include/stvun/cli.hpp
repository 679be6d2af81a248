#pragma once

#include "stvun/core_types.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace stvun::cli {

enum ExitCode : int {
  kOk = 0,
  kFailure = 1,
  kIOFailure = 2,         // prepare could not read or write
  kValidation = 3,        // dataset or schedule rejected
  kCheckpointMismatch = 4,
  kAblationMismatch = 5,  // checkpoint incompatible with the requested ablation
};

/// Entry point behind the `stvun` binary. Never throws; returns an exit code.
int run_cli(int argc, const char* const* argv);
int run_cli(const std::vector<std::string>& args);  // args exclude the program name

/// Blue-to-red (JET) rendering of a [H, W] map with values in [0, 1].
void write_score_heatmap(const torch::Tensor& map, const std::filesystem::path& path);

/// $STVUN_SCRATCH_DIR/<leaf>, or ./<leaf> when unset.
std::filesystem::path scratch_path(const std::string& leaf);
/// $STVUN_CACHE_DIR/<leaf>, or ./<leaf> when unset.
std::filesystem::path cache_path(const std::string& leaf);

}  // namespace stvun::cli
