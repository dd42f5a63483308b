#pragma once

// Small raster plots written as PNG: line charts, prototype sheets,
// trajectories and label strips.

#include "vpcd/decompose.hpp"
#include "vpcd/image.hpp"

#include <string>
#include <vector>

namespace vpcd::cli::plot {

struct Series {
  std::vector<double> x;
  std::vector<double> y;
  Rgb color{0.1, 0.3, 0.8};
};

/// Axes with min/max tick labels and one polyline per series.
RgbImage line_plot(const std::vector<Series>& series, int width = 480, int height = 320);

/// One tile per prototype (appearance times mask), left to right.
RgbImage prototype_sheet(const PrototypeSet& prototypes, int scale = 4);

/// Paths of tracked positions over a frame-sized canvas.
RgbImage trajectory_plot(const std::vector<std::vector<Vec2>>& paths, int frame_height, int frame_width,
                         int scale = 6);

/// Label maps (row-major, 0 = background) coloured per id, side by side.
RgbImage label_strip(const std::vector<std::vector<int>>& labels, int height, int width, int scale = 2);

RgbImage hstack(const std::vector<RgbImage>& images, int gap = 2, const Rgb& gap_color = {1.0, 1.0, 1.0});
RgbImage vstack(const std::vector<RgbImage>& images, int gap = 2, const Rgb& gap_color = {1.0, 1.0, 1.0});

/// 3x5 pixel font; digits, '.', '-', '+', 'e'. Other characters leave a gap.
void draw_text(RgbImage& img, int x, int y, const std::string& text, const Rgb& color, int scale = 2);

/// Distinct colour for an id.
Rgb id_color(int id);

}  // namespace vpcd::cli::plot
