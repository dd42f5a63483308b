#include "vpcd/cli/plot.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <limits>

namespace vpcd::cli::plot {
namespace {

// Rows of 3-bit patterns, top to bottom.
const std::array<int, 5>* glyph(char c) {
  static const std::array<std::array<int, 5>, 14> font{{
      {7, 5, 5, 5, 7},  // 0
      {2, 6, 2, 2, 7},  // 1
      {7, 1, 7, 4, 7},  // 2
      {7, 1, 7, 1, 7},  // 3
      {5, 5, 7, 1, 1},  // 4
      {7, 4, 7, 1, 7},  // 5
      {7, 4, 7, 5, 7},  // 6
      {7, 1, 1, 1, 1},  // 7
      {7, 5, 7, 5, 7},  // 8
      {7, 5, 7, 1, 7},  // 9
      {0, 0, 0, 0, 2},  // .
      {0, 0, 7, 0, 0},  // -
      {0, 2, 7, 2, 0},  // +
      {0, 7, 7, 4, 7},  // e
  }};
  if (c >= '0' && c <= '9') return &font[static_cast<std::size_t>(c - '0')];
  switch (c) {
    case '.': return &font[10];
    case '-': return &font[11];
    case '+': return &font[12];
    case 'e': return &font[13];
    default: return nullptr;
  }
}

void put(RgbImage& img, int x, int y, const Rgb& c) {
  if (x < 0 || y < 0 || x >= img.width() || y >= img.height()) return;
  img.set_pixel(y, x, c);
}

void line(RgbImage& img, int x0, int y0, int x1, int y1, const Rgb& c) {
  const int dx = std::abs(x1 - x0);
  const int dy = -std::abs(y1 - y0);
  const int sx = x0 < x1 ? 1 : -1;
  const int sy = y0 < y1 ? 1 : -1;
  int err = dx + dy;
  for (;;) {
    put(img, x0, y0, c);
    if (x0 == x1 && y0 == y1) break;
    const int e2 = 2 * err;
    if (e2 >= dy) {
      err += dy;
      x0 += sx;
    }
    if (e2 <= dx) {
      err += dx;
      y0 += sy;
    }
  }
}

std::string label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

}  // namespace

Rgb id_color(int id) {
  static const std::array<Rgb, 10> palette{{{0.90, 0.10, 0.10},
                                            {0.10, 0.70, 0.10},
                                            {0.15, 0.35, 0.95},
                                            {0.95, 0.80, 0.10},
                                            {0.80, 0.20, 0.80},
                                            {0.10, 0.80, 0.80},
                                            {0.95, 0.50, 0.10},
                                            {0.55, 0.35, 0.15},
                                            {0.50, 0.50, 0.50},
                                            {0.60, 0.90, 0.40}}};
  return palette[static_cast<std::size_t>(((id % 10) + 10) % 10)];
}

void draw_text(RgbImage& img, int x, int y, const std::string& text, const Rgb& color, int scale) {
  for (char ch : text) {
    if (const auto* g = glyph(ch)) {
      for (int r = 0; r < 5; ++r)
        for (int c = 0; c < 3; ++c)
          if (((*g)[static_cast<std::size_t>(r)] >> (2 - c)) & 1)
            for (int sy = 0; sy < scale; ++sy)
              for (int sx = 0; sx < scale; ++sx) put(img, x + c * scale + sx, y + r * scale + sy, color);
    }
    x += 4 * scale;
  }
}

RgbImage line_plot(const std::vector<Series>& series, int width, int height) {
  RgbImage img(height, width, {1.0, 1.0, 1.0});
  double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
  double ymin = xmin, ymax = -xmin;
  for (const auto& s : series)
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      xmin = std::min(xmin, s.x[i]);
      xmax = std::max(xmax, s.x[i]);
      ymin = std::min(ymin, s.y[i]);
      ymax = std::max(ymax, s.y[i]);
    }
  if (!std::isfinite(xmin)) return img;
  if (xmax == xmin) xmax = xmin + 1.0;
  if (ymax == ymin) ymax = ymin + 1.0;
  const int left = 60, right = 12, top = 12, bottom = 28;
  const int pw = width - left - right;
  const int ph = height - top - bottom;
  const Rgb axis{0.0, 0.0, 0.0};
  line(img, left, top, left, top + ph, axis);
  line(img, left, top + ph, left + pw, top + ph, axis);
  draw_text(img, 4, top, label(ymax), axis);
  draw_text(img, 4, top + ph - 10, label(ymin), axis);
  draw_text(img, left, top + ph + 8, label(xmin), axis);
  draw_text(img, left + pw - 40, top + ph + 8, label(xmax), axis);
  const auto px = [&](double x) { return left + static_cast<int>(std::lround((x - xmin) / (xmax - xmin) * pw)); };
  const auto py = [&](double y) { return top + ph - static_cast<int>(std::lround((y - ymin) / (ymax - ymin) * ph)); };
  for (const auto& s : series) {
    bool have = false;
    int lx = 0, ly = 0;
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) {
        have = false;
        continue;
      }
      const int x = px(s.x[i]);
      const int y = py(s.y[i]);
      if (have) line(img, lx, ly, x, y, s.color);
      else put(img, x, y, s.color);
      lx = x;
      ly = y;
      have = true;
    }
  }
  return img;
}

RgbImage prototype_sheet(const PrototypeSet& prototypes, int scale) {
  std::vector<RgbImage> tiles;
  for (const auto& p : prototypes) {
    const Plane v = p.appearance * p.mask();
    RgbImage t(p.height() * scale, p.width() * scale);
    for (int r = 0; r < t.height(); ++r)
      for (int c = 0; c < t.width(); ++c) {
        const double g = std::clamp(v(r / scale, c / scale), 0.0, 1.0);
        t.set_pixel(r, c, {g, g, g});
      }
    tiles.push_back(std::move(t));
  }
  return hstack(tiles, 2, {0.3, 0.3, 0.9});
}

RgbImage trajectory_plot(const std::vector<std::vector<Vec2>>& paths, int frame_height, int frame_width,
                         int scale) {
  RgbImage img(frame_height * scale, frame_width * scale, {1.0, 1.0, 1.0});
  for (std::size_t i = 0; i < paths.size(); ++i) {
    const Rgb c = id_color(static_cast<int>(i));
    for (std::size_t k = 0; k < paths[i].size(); ++k) {
      const int x = static_cast<int>(std::lround(paths[i][k].x * scale));
      const int y = static_cast<int>(std::lround(paths[i][k].y * scale));
      if (k > 0) {
        const int x0 = static_cast<int>(std::lround(paths[i][k - 1].x * scale));
        const int y0 = static_cast<int>(std::lround(paths[i][k - 1].y * scale));
        line(img, x0, y0, x, y, c);
      }
      for (int d = -1; d <= 1; ++d) {
        put(img, x + d, y, c);
        put(img, x, y + d, c);
      }
    }
  }
  return img;
}

RgbImage label_strip(const std::vector<std::vector<int>>& labels, int height, int width, int scale) {
  std::vector<RgbImage> tiles;
  for (const auto& lab : labels) {
    RgbImage t(height * scale, width * scale);
    for (int r = 0; r < t.height(); ++r)
      for (int c = 0; c < t.width(); ++c) {
        const int id = lab[static_cast<std::size_t>(r / scale) * static_cast<std::size_t>(width) +
                           static_cast<std::size_t>(c / scale)];
        if (id != 0) t.set_pixel(r, c, id_color(id));
      }
    tiles.push_back(std::move(t));
  }
  return hstack(tiles);
}

RgbImage hstack(const std::vector<RgbImage>& images, int gap, const Rgb& gap_color) {
  if (images.empty()) return {};
  int h = 0, w = 0;
  for (const auto& im : images) {
    h = std::max(h, im.height());
    w += im.width();
  }
  w += gap * (static_cast<int>(images.size()) - 1);
  RgbImage out(h, w, gap_color);
  int x = 0;
  for (const auto& im : images) {
    for (int c = 0; c < 3; ++c) out.channel(c).block(0, x, im.height(), im.width()) = im.channel(c);
    x += im.width() + gap;
  }
  return out;
}

RgbImage vstack(const std::vector<RgbImage>& images, int gap, const Rgb& gap_color) {
  if (images.empty()) return {};
  int h = 0, w = 0;
  for (const auto& im : images) {
    w = std::max(w, im.width());
    h += im.height();
  }
  h += gap * (static_cast<int>(images.size()) - 1);
  RgbImage out(h, w, gap_color);
  int y = 0;
  for (const auto& im : images) {
    for (int c = 0; c < 3; ++c) out.channel(c).block(y, 0, im.height(), im.width()) = im.channel(c);
    y += im.height() + gap;
  }
  return out;
}

}  // namespace vpcd::cli::plot
