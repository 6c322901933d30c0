#pragma once

#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "cli/config.hpp"
#include "vqg/evaluation.hpp"

namespace vqg::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitDataError = 1;
inline constexpr int kExitUsage = 2;

// Entry point behind the vqg binary. `args` excludes the program name.
int run_cli(std::vector<std::string> args, std::ostream& out, std::ostream& err);

struct PipelineResult {
  ScoreReport report;
  std::filesystem::path run_dir;
};

// forge -> prompt -> infer -> postprocess -> score, every artifact written to
// `run_dir`. Throws UsageError when run_dir is non-empty and !force.
PipelineResult run_pipeline(const RunConfig& config,
                            const std::filesystem::path& run_dir, bool force,
                            std::ostream& log);

}  // namespace vqg::cli
