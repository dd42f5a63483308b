#pragma once

// Single-frame parsing: colour quantisation, PC-cell candidate generation,
// template rendering, depth-ordered compositing and greedy selection.

#include "vpcd/image.hpp"
#include "vpcd/spectral.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace vpcd {

struct ColorQuantizedFrame {
  std::vector<Plane> channels;  ///< k one-hot occupancy maps
  std::vector<Rgb> centroids;   ///< sorted lexicographically
  RgbImage original;
  /// Set when the image has fewer than k distinct colours; the missing
  /// centroids duplicate the last distinct colour and their channels are empty.
  bool degenerate_palette = false;

  int k() const { return static_cast<int>(centroids.size()); }
  int height() const { return original.height(); }
  int width() const { return original.width(); }
  RgbImage reconstruct() const;
  /// Index of the centroid closest to `background` (lowest index on ties).
  int nearest_channel(const Rgb& color) const;
};

/// k-means over pixel colours with seeded k-means++ initialisation.
ColorQuantizedFrame quantize_colors(const RgbImage& image, int k, std::uint64_t seed);

struct Prototype {
  int id = 0;
  Plane appearance;   ///< h_p x w_p, kept in [0, 1]
  Plane mask_logits;  ///< h_p x w_p

  int height() const { return static_cast<int>(appearance.rows()); }
  int width() const { return static_cast<int>(appearance.cols()); }
  Plane mask() const { return 1.0 / (1.0 + (-mask_logits).exp()); }
  /// Mask-weighted mean (x, y) in prototype coordinates.
  Vec2 mask_center() const;
  /// Prototype appearance zero-padded to a frame, anchored at the origin.
  Plane padded_appearance(int height, int width) const;
};

using PrototypeSet = std::vector<Prototype>;

const Prototype* find_prototype(const PrototypeSet& set, int id);

/// Placement of a patch in the frame. Periodic patches wrap around the frame
/// edges; clipped patches drop the pixels that fall outside.
enum class EdgeMode { Periodic, Clip };

struct Layer {
  int top = 0;   ///< frame row of patch(0, 0), may be negative
  int left = 0;  ///< frame col of patch(0, 0), may be negative
  std::array<Plane, 3> color;  ///< rendered template patch per RGB channel
  Plane mask;
  EdgeMode edge = EdgeMode::Clip;

  int rows() const { return static_cast<int>(mask.rows()); }
  int cols() const { return static_cast<int>(mask.cols()); }

  /// Calls fn(patch_row, patch_col, frame_row, frame_col) for every patch
  /// pixel that lands in an H x W frame.
  template <typename Fn>
  void for_each_pixel(int height, int width, Fn&& fn) const {
    for (int r = 0; r < rows(); ++r) {
      int fr = top + r;
      if (edge == EdgeMode::Periodic) {
        fr = ((fr % height) + height) % height;
      } else if (fr < 0 || fr >= height) {
        continue;
      }
      for (int c = 0; c < cols(); ++c) {
        int fc = left + c;
        if (edge == EdgeMode::Periodic) {
          fc = ((fc % width) + width) % width;
        } else if (fc < 0 || fc >= width) {
          continue;
        }
        fn(r, c, fr, fc);
      }
    }
  }
};

struct PeakTriplet {
  int channel = 0;
  int dx = 0;  ///< in [0, W)
  int dy = 0;  ///< in [0, H)
  double score = 0.0;
};

struct ObjectInstance {
  int prototype_id = -1;
  PeakTriplet peak;
  Rgb color{0.0, 0.0, 0.0};
  Layer layer;
  Vec2 center_of_mass;
  int depth_rank = 0;  ///< 1 = frontmost, 0 = not selected yet
  bool external = false;
  /// Signed placement of the prototype origin (may lie outside the frame).
  Vec2 offset;
  int frame_height = 0;
  int frame_width = 0;

  RgbImage render_template() const;
  Plane render_mask() const;
};

/// Integer placement of a prototype with its origin at (dx, dy).
ObjectInstance place_prototype(const Prototype& proto, int channel, const Rgb& color, int dx,
                               int dy, int frame_height, int frame_width, EdgeMode edge,
                               double score = 0.0);

/// Sub-pixel placement through the Fourier shift theorem (full-frame, periodic).
ObjectInstance place_prototype_fourier(const Prototype& proto, int channel, const Rgb& color,
                                       double dx, double dy, int frame_height, int frame_width);

struct CandidateOptions {
  int peaks_per_pair = 4;
  /// Non-maximum suppression radius; negative selects ceil(max(h_p, w_p) / 2).
  int nms_radius = -1;
  EdgeMode edge = EdgeMode::Clip;
  bool skip_background_channel = true;
  Rgb background{0.0, 0.0, 0.0};
  double eps = spectral::kDefaultEps;
};

/// Frequency-domain views of a prototype set at a given frame size.
struct PrototypeSpectra {
  int height = 0;
  int width = 0;
  std::vector<int> ids;
  std::vector<ComplexPlane> spectra;

  static PrototypeSpectra compute(const PrototypeSet& set, int height, int width);
  const ComplexPlane* find(int id) const;
};

/// Channel maps with their spectra; the inputs to the PC-cell.
struct ChannelStack {
  std::vector<Plane> maps;
  std::vector<Rgb> colors;
  std::vector<ComplexPlane> spectra;
  std::vector<bool> active;

  static ChannelStack from_frame(const ColorQuantizedFrame& frame, const CandidateOptions& opts);
  int height() const { return maps.empty() ? 0 : static_cast<int>(maps.front().rows()); }
  int width() const { return maps.empty() ? 0 : static_cast<int>(maps.front().cols()); }
};

/// Channel-wise phase correlation of every (prototype, channel) pair. When
/// `only_ids` is set, only those prototypes take part.
std::vector<ObjectInstance> generate_candidates(const ChannelStack& channels,
                                                const PrototypeSet& prototypes,
                                                const PrototypeSpectra& spectra,
                                                const CandidateOptions& opts,
                                                const std::vector<int>* only_ids = nullptr);

std::vector<ObjectInstance> generate_candidates(const ColorQuantizedFrame& frame,
                                                const PrototypeSet& prototypes,
                                                const CandidateOptions& opts);

/// Back-to-front over-compositing; instances[0] is frontmost.
RgbImage compose(std::span<const ObjectInstance> instances, const Rgb& background, int height,
                 int width);

/// L2 norm of frame - compose(instances).
double reconstruction_error(const RgbImage& frame, std::span<const ObjectInstance> instances,
                            const Rgb& background);

struct GreedyOptions {
  int max_objs = 4;
  /// Stop once no candidate lowers the error. Disabled, the loop always fills
  /// max_objs like the reference pseudocode.
  bool early_stop = true;
  /// Error increase (in squared-error units) tolerated for external candidates.
  double slack = 0.0;
  Rgb background{0.0, 0.0, 0.0};
};

struct Selection {
  std::vector<ObjectInstance> objects;  ///< front to back, depth_rank set
  std::vector<int> candidate_indices;
  std::vector<double> error_trace;  ///< L2 error after each addition
  double error = 0.0;               ///< final L2 error
};

Selection greedy_select(const RgbImage& frame, std::span<const ObjectInstance> candidates,
                        const GreedyOptions& opts);

}  // namespace vpcd
