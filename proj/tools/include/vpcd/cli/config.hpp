#pragma once

// Run configuration: INI file with sections, validated before any work.

#include "vpcd/datagen.hpp"
#include "vpcd/learning.hpp"
#include "vpcd/pipeline.hpp"
#include "vpcd/tracker.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>

namespace vpcd::cli {

/// Bad configuration or missing inputs; maps to exit code 1.
struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline constexpr const char* kDataRootEnv = "VPCD_DATA_ROOT";

struct DataConfig {
  std::string preset = "dynamics_bouncing";
  datagen::SceneSpec spec;
  int train_count = 300;
  int test_count = 300;
  /// Dataset directory; empty selects $VPCD_DATA_ROOT/<name>-seed<seed> or <out>/data.
  std::string path;
};

struct EvalConfig {
  double match_radius = 5.0;
  double min_visibility = 0.25;
  int seeds = 3;
  /// Predicted frames; the sequence remainder when absent from the config.
  int horizon = 27;
  bool netless = false;
  bool subpixel_render = false;
  bool closed_loop = true;
  /// Score the ground truth as the tracker output (sanity check of the metric).
  bool gt_passthrough = false;
  /// Sequences evaluated by track/predict; -1 for all.
  int max_sequences = -1;
  /// Image strips written by predict and segmentation strips by track.
  int strips = 4;
  double penalty_distance = 10.0;
};

struct RunConfig {
  std::uint64_t seed = 0;
  std::string out = "runs/default";
  int jobs = 1;
  Variant variant = Variant::Full;
  DataConfig data;
  ParseConfig parse = parse_config_for(Variant::Full);
  TrackerConfig tracker;
  learning::DecompLossConfig decomp;
  learning::MotionLossConfig motion;
  EvalConfig eval;

  /// Throws ValidationError.
  void validate() const;
  /// Canonical INI text of every setting (manifest snapshot).
  std::string to_ini() const;
};

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::string> variant;
  std::optional<int> horizon;
  std::optional<int> seeds;
  std::optional<bool> netless;
  std::optional<int> jobs;
};

/// Parses INI text. Unknown sections or keys and malformed values throw
/// ValidationError.
RunConfig parse_config(const std::string& text, const Overrides& overrides = {});
RunConfig load_config(const std::filesystem::path& path, const Overrides& overrides = {});

std::filesystem::path dataset_dir(const RunConfig& cfg);

}  // namespace vpcd::cli
