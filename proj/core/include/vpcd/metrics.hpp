#pragma once

// Evaluation: CLEAR-MOT style tracking scores, adjusted Rand index, SSIM,
// MSE/PSNR, per-step position error and trajectory export.

#include "vpcd/decompose.hpp"
#include "vpcd/image.hpp"

#include <filesystem>
#include <optional>
#include <span>
#include <vector>

namespace vpcd::metrics {

/// One tracked (or ground-truth) object in one frame.
struct TrackPoint {
  int frame = 0;
  int id = 0;
  Vec2 position;
  /// Ground truth only: objects below the evaluation's visibility cut are
  /// don't-care (neither misses nor false positives when matched).
  double visibility = 1.0;
};

struct TrackingReport {
  std::optional<double> mota;  ///< absent when there is no ground truth
  double motp = 0.0;           ///< mean matched distance / match radius
  int mostly_tracked = 0;      ///< GT tracks matched in >= 80% of their frames
  int id_switches = 0;
  int false_positives = 0;
  int false_negatives = 0;
  int matches = 0;
  int ground_truth = 0;  ///< GT detections that count
  int frames = 0;
};

struct MotOptions {
  double match_radius = 5.0;
  double min_visibility = 0.25;
};

/// Per frame: matches from the previous frame are kept while within the
/// radius, the rest are assigned by minimum total distance. An id switch is
/// counted when a GT object is matched to a different prediction id than the
/// one it was last matched to.
TrackingReport mot_eval(std::span<const TrackPoint> predicted, std::span<const TrackPoint> truth,
                        const MotOptions& opts = {});

/// Accumulates reports over sequences (sums of counts, matched-distance
/// weighted MOTP).
TrackingReport combine(std::span<const TrackingReport> reports);

/// Adjusted Rand index between two labelings of the same pixels. Without
/// `include_background`, pixels with truth == background_label are ignored.
double ari(std::span<const int> predicted, std::span<const int> truth, bool include_background = false,
           int background_label = 0);

/// Label map of a composition: masks binarised at 0.5, frontmost wins,
/// labels 1..n in list order, 0 for background.
std::vector<int> instance_labels(std::span<const ObjectInstance> instances, int height, int width);

double frame_mse(const RgbImage& a, const RgbImage& b);
/// Peak signal-to-noise ratio for unit range; +inf for identical frames.
double psnr(const RgbImage& a, const RgbImage& b);

/// Mean SSIM over the valid region, 11x11 Gaussian window (sigma 1.5),
/// C1 = 0.01^2, C2 = 0.03^2, averaged over the RGB channels.
double ssim(const RgbImage& a, const RgbImage& b);
double ssim(const Plane& a, const Plane& b);

/// Optimal one-to-one matching of predicted to true positions within
/// `radius`; result[j] is the prediction matched to truth j or -1.
std::vector<int> match_positions(std::span<const Vec2> predicted, std::span<const Vec2> truth,
                                 double radius);

struct PositionSample {
  int step = 0;  ///< 1-based rollout step
  std::optional<Vec2> predicted;
  Vec2 truth;
};

struct PositionCurve {
  std::vector<double> mean;    ///< per step, squared distance
  std::vector<double> stddev;
  std::vector<int> count;
  std::vector<int> unmatched;  ///< samples scored with the penalty
};

/// Mean and standard deviation of the squared position error per step.
/// Samples without a prediction contribute penalty_distance^2.
PositionCurve position_mse(std::span<const PositionSample> samples, int horizon,
                           double penalty_distance = 10.0);

struct TrajectoryRecord {
  int track_id = 0;
  int t = 0;
  Vec2 position;
  Vec2 velocity;
};

/// CSV with header track_id,t,x,y,vx,vy.
void write_trajectories(const std::filesystem::path& path, std::span<const TrajectoryRecord> records);

}  // namespace vpcd::metrics
