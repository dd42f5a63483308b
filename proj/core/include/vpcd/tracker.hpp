#pragma once

// Scene-state tracking: matching cost between parsed objects and tracks,
// optimal assignment and the track-id lifecycle.

#include "vpcd/decompose.hpp"
#include "vpcd/spectral.hpp"

#include <deque>
#include <vector>

namespace vpcd {

struct MatchWeights {
  double lambda_c = 1.0;
  /// Negative selects 1 / (h_p * w_p).
  double lambda_p = -1.0;
  double lambda_z = 0.1;
  double gate = 2.0;

  /// lambda_p with the per-pixel default resolved for a prototype size.
  double appearance_weight(int proto_pixels) const {
    return lambda_p >= 0.0 ? lambda_p : 1.0 / static_cast<double>(proto_pixels);
  }
  void validate() const;
};

struct ObjectTrack {
  int track_id = 0;
  Rgb color{0.0, 0.0, 0.0};
  int prototype_id = -1;
  Plane appearance;
  Vec2 position;
  std::deque<spectral::PhaseDiff> velocity_history;  ///< oldest first
  int age = 0;
  int missed = 0;
  int last_seen_frame = 0;
  ObjectInstance last_instance;

  spectral::PhaseDiff last_velocity() const {
    return velocity_history.empty() ? spectral::PhaseDiff{} : velocity_history.back();
  }
  /// Position advanced by the last velocity.
  Vec2 predicted_position() const {
    const auto v = last_velocity();
    return position + Vec2{v.vx, v.vy};
  }
};

/// The state s = (colour, appearance, centre of mass) of a parsed object.
struct ParsedState {
  Rgb color;
  const Plane* appearance = nullptr;
  Vec2 position;
};

ParsedState parsed_state(const ObjectInstance& obj, const PrototypeSet& prototypes);

/// lambda_c |c_i - c_j| + lambda_P |P_i - P_j| + lambda_Z |Z_i - Z_j|.
double match_cost(const ParsedState& parsed, const ObjectTrack& track, const MatchWeights& w,
                  bool use_predicted_position = false);

/// Minimum-cost one-to-one assignment of a rectangular cost matrix. Returns,
/// for each row, the matched column or -1 (only when rows > cols).
std::vector<int> solve_assignment(const Eigen::MatrixXd& cost);

struct Assignment {
  std::vector<std::pair<int, int>> matches;  ///< (parsed index, track index)
  std::vector<int> unmatched_parsed;
  std::vector<int> unmatched_tracks;
  double total_cost = 0.0;  ///< over accepted matches
};

Assignment assign(std::span<const ParsedState> parsed, std::span<const ObjectTrack> tracks,
                  const MatchWeights& w, bool use_predicted_position = true);

struct TrackerConfig {
  MatchWeights weights;
  int max_missed = 2;
  int history = 3;
  bool predicted_gating = true;
};

/// Tracked objects of one sequence. Single writer.
class SceneState {
 public:
  SceneState() = default;
  explicit SceneState(TrackerConfig cfg) : cfg_(cfg) {}

  const std::vector<ObjectTrack>& tracks() const { return tracks_; }
  const TrackerConfig& config() const { return cfg_; }
  bool empty() const { return tracks_.empty(); }
  int next_id() const { return next_id_; }

  /// Prototype ids referenced by live tracks, sorted.
  std::vector<int> active_prototypes() const;

  /// Aligns parsed objects with the tracks and updates the state. Returns the
  /// track id for each parsed object.
  std::vector<int> align(std::span<const ObjectInstance> parsed, const PrototypeSet& prototypes,
                         int frame_index);

  /// Applies an assignment computed for `parsed`.
  std::vector<int> update(const Assignment& assignment, std::span<const ObjectInstance> parsed,
                          const PrototypeSet& prototypes, int frame_index);

 private:
  TrackerConfig cfg_;
  std::vector<ObjectTrack> tracks_;
  int next_id_ = 1;
};

}  // namespace vpcd
