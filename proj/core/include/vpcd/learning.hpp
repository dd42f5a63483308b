#pragma once

// Training: prototype/mask learning on reconstruction plus regularisers, and
// velocity-network training with frozen prototypes. Gradients are derived by
// hand and verified against finite differences.

#include "vpcd/decompose.hpp"
#include "vpcd/motion.hpp"
#include "vpcd/pipeline.hpp"
#include "vpcd/velocity_net.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace vpcd::learning {

using motion::MotionHistory;

/// Adam on a flat parameter vector.
class Adam {
 public:
  explicit Adam(double learning_rate = 1e-3, double beta1 = 0.9, double beta2 = 0.999,
                double eps = 1e-8);

  void step(Eigen::VectorXd& params, const Eigen::VectorXd& grad);
  /// Clears the moments of params[offset, offset + size).
  void reset(Eigen::Index offset, Eigen::Index size);

  double learning_rate() const { return lr_; }
  void set_learning_rate(double lr) { lr_ = lr; }
  long steps() const { return t_; }
  Eigen::VectorXd& first_moment() { return m_; }
  Eigen::VectorXd& second_moment() { return v_; }
  void restore(long steps, Eigen::VectorXd m, Eigen::VectorXd v);

 private:
  double lr_, beta1_, beta2_, eps_;
  long t_ = 0;
  Eigen::VectorXd m_, v_;
};

/// Frames stored as 8-bit RGB (lossless for the generated data).
class FrameBank {
 public:
  void add(const RgbImage& frame);
  std::size_t size() const { return frames_.size(); }
  RgbImage get(std::size_t index) const;

 private:
  struct Entry {
    int height = 0;
    int width = 0;
    std::vector<std::uint8_t> rgb;
  };
  std::vector<Entry> frames_;
};

struct DecompLossConfig {
  double lambda_sparsity = 1e-4;
  double lambda_mask_smooth = 1e-3;
  double learning_rate = 3e-3;
  int steps = 1500;
  int batch_size = 8;
  int prototypes = 8;
  int prototype_size = 11;
  std::uint64_t seed = 0;
  /// Parsing used to pick the selection each step.
  int max_objs = 4;
  int colors = 5;
  int peaks_per_pair = 4;
  Rgb background{0.0, 0.0, 0.0};
  /// Rarely used or duplicated prototypes are re-initialised from a poorly
  /// explained connected component every `reseed_interval` steps.
  bool reseed = true;
  int reseed_interval = 25;
  double reseed_min_usage = 0.02;
  double duplicate_iou = 0.9;

  void validate() const;
};

struct DecompLoss {
  double loss = 0.0;
  double reconstruction = 0.0;  ///< squared L2 error
  double sparsity = 0.0;        ///< lambda_s * sum |A|
  double smoothness = 0.0;      ///< lambda_m * TV(sigmoid(L))
  std::vector<Plane> grad_appearance;  ///< aligned with the prototype set
  std::vector<Plane> grad_mask_logits;
};

/// Loss and gradients for a fixed selection (straight-through over the
/// discrete choices). `corrupt_adjoint_sign` is for testing the checker.
DecompLoss decomp_loss(const RgbImage& frame, std::span<const ObjectInstance> selection,
                       const PrototypeSet& prototypes, const DecompLossConfig& cfg,
                       bool corrupt_adjoint_sign = false);

/// Anisotropic total variation of a plane.
double total_variation(const Plane& p);

PrototypeSet init_prototypes(int count, int size, std::uint64_t seed);

struct LossRecord {
  int step = 0;
  double loss = 0.0;
  std::vector<double> components;
};

struct DecompTrainState {
  PrototypeSet prototypes;
  int step = 0;
  long adam_steps = 0;
  Eigen::VectorXd adam_m;
  Eigen::VectorXd adam_v;
};

struct DecompTrainResult {
  DecompTrainState state;
  std::vector<LossRecord> curve;  ///< components: reconstruction, sparsity, smoothness, objects
  int reseeds = 0;
  bool diverged = false;
};

using Progress = std::function<void(int step, double loss)>;

DecompTrainResult train_decomposition(const FrameBank& frames, const DecompLossConfig& cfg,
                                      const DecompTrainState* resume = nullptr,
                                      const Progress& progress = {});

/// Best IoU between two binary maps over all integer relative shifts.
double aligned_iou(const Plane& a, const Plane& b);

enum class MotionLossKind { Position, Frame };

struct MotionLossConfig {
  int seed_frames = 3;
  int predict_frames = 7;
  MotionLossKind loss = MotionLossKind::Position;
  double learning_rate = 1e-3;
  /// Cosine decay of the learning rate down to this fraction at the last step.
  double final_lr_fraction = 0.05;
  int steps = 2000;
  int batch_size = 64;
  int history = 3;
  std::vector<int> hidden{96, 96};
  std::uint64_t seed = 0;
  double min_confidence = 0.2;
  /// Sequences whose mean parse residual exceeds this are skipped.
  double max_parse_residual = 0.05;

  void validate() const;
};

/// One object's training window: the seed history and the parsed positions
/// over the predicted steps.
struct ObjectWindow {
  MotionHistory history;
  std::vector<Vec2> targets;
  std::vector<bool> observed;
  ObjectInstance base;  ///< last seed instance (frame loss)
  int window = 0;       ///< index of the owning frame window
};

struct FrameWindow {
  std::vector<RgbImage> targets;  ///< predicted frames (frame loss only)
  std::vector<int> objects;       ///< object windows, depth order
  Rgb background{0.0, 0.0, 0.0};
};

struct MotionBatchLoss {
  double loss = 0.0;
  VelocityNet::Gradients grads;
  std::vector<std::vector<Vec2>> positions;  ///< per object, per step
};

/// Closed-loop unroll of `steps` predictions for the given object windows
/// with backpropagation through time. Position loss: mean over objects of
/// sum_k |Z_k - target_k|^2. Frame loss: sum_k pixel MSE of the Fourier-shift
/// rendered composition per frame window, averaged over windows.
MotionBatchLoss motion_loss(const VelocityNet& net, std::span<const ObjectWindow> objects,
                            std::span<const FrameWindow> frames, std::span<const int> selection,
                            int steps, MotionLossKind kind);

struct MotionTrainResult {
  VelocityNet net;
  std::vector<LossRecord> curve;
  int windows = 0;
  int sequences = 0;
  int skipped_sequences = 0;
};

/// Extracts training windows from one parsed sequence.
void extract_windows(const VideoParse& parse, std::span<const RgbImage> frames,
                     const MotionLossConfig& cfg, const Rgb& background,
                     std::vector<ObjectWindow>& objects, std::vector<FrameWindow>& windows);

/// Training windows of a set of parsed sequences.
struct MotionDataset {
  std::vector<ObjectWindow> objects;
  std::vector<FrameWindow> windows;
  int sequences = 0;
  int skipped_sequences = 0;
  int height = 0;
  int width = 0;
};

/// Parses every sequence with the frozen prototypes and extracts windows.
/// `sequence(i)` returns the frames of sequence i.
MotionDataset collect_motion_data(int sequence_count,
                                  const std::function<std::vector<RgbImage>(int)>& sequence,
                                  const PrototypeSet& prototypes, const MotionLossConfig& cfg,
                                  const ParseConfig& parse, const TrackerConfig& tracker = {});

MotionTrainResult fit_motion(const MotionDataset& data, const MotionLossConfig& cfg,
                             const Progress& progress = {});

/// collect_motion_data followed by fit_motion.
MotionTrainResult train_motion(int sequence_count,
                               const std::function<std::vector<RgbImage>(int)>& sequence,
                               const PrototypeSet& prototypes, const MotionLossConfig& cfg,
                               const ParseConfig& parse, const TrackerConfig& tracker = {},
                               const Progress& progress = {});

enum class GradcheckComponent { DecompLoss, MotionFrameLoss, MotionPositionLoss };

struct GradcheckOptions {
  double step = 1e-4;
  double tolerance = 1e-3;
  bool corrupt_adjoint_sign = false;
  /// Decomposition check at a perfectly reconstructed frame, no regularisers.
  bool perfect_reconstruction = false;
};

struct GradcheckReport {
  bool passed = false;
  double max_relative_error = 0.0;
  std::string worst_block;
  std::vector<std::pair<std::string, double>> blocks;  ///< max error per block
};

/// Compares analytic gradients with central differences on a miniature
/// instance (16x16 frame, 5x5 prototypes).
GradcheckReport gradcheck(GradcheckComponent component, std::uint64_t seed,
                          const GradcheckOptions& opts = {});

void write_loss_csv(const std::string& path, const std::vector<LossRecord>& curve,
                    const std::vector<std::string>& component_names);

}  // namespace vpcd::learning
