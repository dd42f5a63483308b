#pragma once

// Video parsing: state-conditioned stage 1, residual-driven stage 2 with the
// inactive prototypes, external templates and alignment with the scene state.

#include "vpcd/decompose.hpp"
#include "vpcd/tracker.hpp"

#include <string>
#include <vector>

namespace vpcd {

enum class Variant { FrameIndependent, Aligned, StateOnly, TwoStage, Full };

std::string to_string(Variant v);
Variant variant_from_string(const std::string& s);

struct ParseConfig {
  int max_objs = 4;
  /// Mean per-pixel RGB residual above which stage 2 runs.
  double err_thr = 2e-3;
  int peaks_per_pair = 4;
  int nms_radius = -1;
  bool use_external_templates = true;
  bool stage2_enabled = true;
  /// Stage 1 only, restricted to the state's prototypes.
  bool state_only = false;
  /// Restrict stage 1 to the prototypes referenced by the state.
  bool state_conditioned = true;
  /// Align with the scene state; otherwise ids are per-frame depth ranks.
  bool align = true;
  int colors = 5;
  std::uint64_t quantize_seed = 0;
  Rgb background{0.0, 0.0, 0.0};
  EdgeMode edge = EdgeMode::Clip;
  /// Frames parsed with every prototype before the state takes over.
  int cold_start_frames = 2;
  /// Squared-error increase tolerated when accepting an external template.
  double external_slack = 1e-3;

  void validate() const;
  bool runs_stage2() const { return stage2_enabled && !state_only; }
};

ParseConfig parse_config_for(Variant v);

struct FrameParse {
  std::vector<ObjectInstance> objects;  ///< front to back
  std::vector<int> ids;                 ///< track id per object
  double stage1_error = 0.0;            ///< L2 error of the stage-1 selection
  double error = 0.0;                   ///< L2 error of the final selection
  double residual = 0.0;                ///< mean per-pixel residual of the final selection
  double stage1_residual = 0.0;
  bool stage2_triggered = false;
  int stage1_candidates = 0;
  int stage2_candidates = 0;
  int external_candidates = 0;
  bool degenerate_palette = false;
};

/// Candidates restricted to the given prototypes.
std::vector<ObjectInstance> create_candidates_with_state(const ChannelStack& channels,
                                                         const PrototypeSet& prototypes,
                                                         const PrototypeSpectra& spectra,
                                                         const std::vector<int>& active_ids,
                                                         const CandidateOptions& opts);

/// Stage-2 channel maps: the residual clamped to [0, 1], projected on each
/// centroid colour and restricted to that colour's pixels.
ChannelStack residual_channels(const RgbImage& frame, const RgbImage& reconstruction,
                               const ColorQuantizedFrame& quantized, const CandidateOptions& opts);

/// One-step predictions of the live tracks, as external candidates.
std::vector<ObjectInstance> external_templates(const SceneState& state);

struct TrackRecord {
  int frame = 0;
  int track_id = 0;
  Vec2 position;
  int prototype_id = -1;
  Rgb color{0.0, 0.0, 0.0};
};

/// Stateful parser of one video. Single writer.
class VideoParser {
 public:
  VideoParser(const PrototypeSet& prototypes, ParseConfig cfg, TrackerConfig tracker = {});

  FrameParse parse(const RgbImage& frame);

  int frame_index() const { return t_; }
  const SceneState& state() const { return state_; }
  const ParseConfig& config() const { return cfg_; }

 private:
  const PrototypeSet& prototypes_;
  ParseConfig cfg_;
  SceneState state_;
  PrototypeSpectra spectra_;
  int t_ = 0;
};

/// Parses one frame against the given state (not modified) and external
/// candidates. Alignment is left to the caller.
FrameParse parse_frame(const RgbImage& frame, const SceneState& state,
                       const std::vector<ObjectInstance>& external,
                       const PrototypeSet& prototypes, const PrototypeSpectra& spectra,
                       const ParseConfig& cfg, int frame_index);

struct VideoParse {
  std::vector<FrameParse> frames;
  std::vector<TrackRecord> records;
  SceneState final_state;
};

VideoParse parse_video(std::span<const RgbImage> frames, const PrototypeSet& prototypes,
                       const ParseConfig& cfg, const TrackerConfig& tracker = {});

}  // namespace vpcd
