#pragma once

#include <Eigen/Core>

#include <array>
#include <cmath>
#include <complex>
#include <cstdint>

namespace vpcd {

/// Single-channel 2-D array, indexed (row, col).
using Plane = Eigen::Array<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ComplexPlane =
    Eigen::Array<std::complex<double>, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using Rgb = std::array<double, 3>;

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  Vec2& operator+=(const Vec2& o) {
    x += o.x;
    y += o.y;
    return *this;
  }
  Vec2& operator-=(const Vec2& o) {
    x -= o.x;
    y -= o.y;
    return *this;
  }
  friend Vec2 operator+(Vec2 a, const Vec2& b) { return a += b; }
  friend Vec2 operator-(Vec2 a, const Vec2& b) { return a -= b; }
  friend Vec2 operator*(double s, const Vec2& v) { return {s * v.x, s * v.y}; }
  friend bool operator==(const Vec2&, const Vec2&) = default;

  double norm() const { return std::hypot(x, y); }
  double squared_norm() const { return x * x + y * y; }
};

inline double color_distance(const Rgb& a, const Rgb& b) {
  const double dr = a[0] - b[0];
  const double dg = a[1] - b[1];
  const double db = a[2] - b[2];
  return std::sqrt(dr * dr + dg * dg + db * db);
}

/// Planar H x W x 3 image with values nominally in [0, 1].
class RgbImage {
 public:
  RgbImage() = default;
  RgbImage(int height, int width, const Rgb& fill = {0.0, 0.0, 0.0});

  int height() const { return static_cast<int>(planes_[0].rows()); }
  int width() const { return static_cast<int>(planes_[0].cols()); }
  bool empty() const { return planes_[0].size() == 0; }

  Plane& channel(int c) { return planes_[static_cast<std::size_t>(c)]; }
  const Plane& channel(int c) const { return planes_[static_cast<std::size_t>(c)]; }

  double& at(int c, int row, int col) { return channel(c)(row, col); }
  double at(int c, int row, int col) const { return channel(c)(row, col); }

  Rgb pixel(int row, int col) const {
    return {planes_[0](row, col), planes_[1](row, col), planes_[2](row, col)};
  }
  void set_pixel(int row, int col, const Rgb& v) {
    for (int c = 0; c < 3; ++c) channel(c)(row, col) = v[static_cast<std::size_t>(c)];
  }

  bool all_finite() const;
  /// Sum of squared per-element differences.
  double squared_distance(const RgbImage& other) const;
  Plane channel_sum() const { return planes_[0] + planes_[1] + planes_[2]; }

  friend bool operator==(const RgbImage& a, const RgbImage& b);

 private:
  std::array<Plane, 3> planes_;
};

double mean_squared_error(const RgbImage& a, const RgbImage& b);

/// Mean over pixels of the per-pixel Euclidean RGB difference.
double mean_pixel_residual(const RgbImage& a, const RgbImage& b);

inline bool all_finite(const Plane& p) { return p.allFinite(); }

}  // namespace vpcd
