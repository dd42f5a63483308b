#pragma once

// The vpcd subcommands. Each owns its run directory, validates its inputs
// and writes a manifest next to its outputs.

#include "vpcd/cli/config.hpp"

#include <filesystem>
#include <iosfwd>

namespace vpcd::cli {

enum class Stage { Decomp, Motion };

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitRuntime = 2;

void cmd_gen(const RunConfig& cfg, std::ostream& log);
/// Motion training refuses to start without a decomposition checkpoint.
void cmd_train(const RunConfig& cfg, Stage stage, bool resume, std::ostream& log);
void cmd_track(const RunConfig& cfg, std::ostream& log);
void cmd_predict(const RunConfig& cfg, std::ostream& log);
/// Returns the number of images written (0 prints "nothing to plot").
int cmd_plot(const std::filesystem::path& run_dir, std::ostream& log);

/// Command-line entry point; returns the process exit code.
int run(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace vpcd::cli
