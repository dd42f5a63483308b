#pragma once

// Object-centric prediction: velocity estimation between parses, learned
// velocity refinement and multi-step rollout.

#include "vpcd/decompose.hpp"
#include "vpcd/pipeline.hpp"
#include "vpcd/spectral.hpp"
#include "vpcd/velocity_net.hpp"

#include <deque>
#include <vector>

namespace vpcd::motion {

using spectral::PhaseDiff;

struct VelocityEstimate {
  PhaseDiff velocity;
  double confidence = 0.0;  ///< correlation peak value
  bool fallback = false;    ///< centre-of-mass difference was used
};

/// Phase-correlates the rendered objects; falls back to the centre-of-mass
/// difference when the peak is below `min_confidence` or an object is empty.
VelocityEstimate estimate_velocity(const ObjectInstance& prev, const ObjectInstance& curr,
                                   double min_confidence = 0.2);

/// Last H (velocity, centre of mass) observations of one object, oldest first.
class MotionHistory {
 public:
  explicit MotionHistory(int length = 3) : length_(length) {}

  void push(const PhaseDiff& v, const Vec2& z);
  int length() const { return length_; }
  bool empty() const { return entries_.empty(); }
  int size() const { return static_cast<int>(entries_.size()); }
  const PhaseDiff& last_velocity() const { return entries_.back().first; }
  const Vec2& last_position() const { return entries_.back().second; }
  /// Entry i of the padded window (0 = oldest).
  const std::pair<PhaseDiff, Vec2>& padded(int i) const;

  /// 4H normalised features (vx, vy, x, y per step, oldest first), padded by
  /// repeating the oldest entry.
  Eigen::VectorXd features(const FeatureScale& scale) const;

 private:
  int length_;
  std::deque<std::pair<PhaseDiff, Vec2>> entries_;
};

/// v_ref = v_last + net(features).
PhaseDiff refine_velocity(const MotionHistory& history, const VelocityNet& net);

/// Advances template and mask by `v` with the Fourier shift theorem; the
/// result is a full-frame periodic layer.
ObjectInstance predict_instance(const ObjectInstance& obj, const PhaseDiff& v);

/// Integer translation of a placed instance (exact, keeps the edge mode).
ObjectInstance shift_instance(const ObjectInstance& obj, int dx, int dy);

struct RolloutConfig {
  int seeds = 3;
  int horizon = 27;
  bool use_net = true;
  /// Feed refined velocities back into the history; otherwise the raw seed
  /// velocity stays the history's velocity entry.
  bool closed_loop = true;
  /// Render at real-valued displacements through the Fourier shift instead
  /// of snapping to whole pixels.
  bool subpixel_render = false;
  double min_confidence = 0.2;
  /// Seeds are rejected when every seed frame's mean residual exceeds this.
  double max_seed_residual = 0.05;
  ParseConfig parse = parse_config_for(Variant::Full);
  TrackerConfig tracker;

  void validate() const;
};

struct PredictedObject {
  int track_id = 0;
  int prototype_id = -1;
  Rgb color{0.0, 0.0, 0.0};
  Vec2 position;
  PhaseDiff velocity;
  ObjectInstance instance;
};

struct Rollout {
  RgbImage seed_reconstruction;                       ///< last seed frame
  std::vector<PredictedObject> seed_objects;          ///< state at the last seed frame
  std::vector<RgbImage> frames;                       ///< one per step
  std::vector<std::vector<PredictedObject>> objects;  ///< one list per step, depth order
  VideoParse parse;                                   ///< of the seed frames
};

/// Per-track seed observations extracted from a parse: instances and
/// velocity estimates of the objects present in the last seed frame.
struct SeedTrack {
  int track_id = 0;
  std::vector<ObjectInstance> instances;  ///< one per frame where observed
  std::vector<int> frames;
  MotionHistory history;
  int depth = 0;
};

std::vector<SeedTrack> seed_tracks(const VideoParse& parse, int history, double min_confidence);

/// Parses the seeds and predicts `horizon` frames.
Rollout rollout(std::span<const RgbImage> seed_frames, const PrototypeSet& prototypes,
                const VelocityNet* net, const RolloutConfig& cfg);

/// Prediction from already extracted seed tracks.
Rollout rollout_from_tracks(const std::vector<SeedTrack>& tracks, const VelocityNet* net,
                            const RolloutConfig& cfg, int height, int width);

}  // namespace vpcd::motion
