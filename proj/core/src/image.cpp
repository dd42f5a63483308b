#include "vpcd/image.hpp"

#include <stdexcept>

namespace vpcd {

RgbImage::RgbImage(int height, int width, const Rgb& fill) {
  if (height < 0 || width < 0) throw std::invalid_argument("RgbImage: negative size");
  for (std::size_t c = 0; c < 3; ++c) planes_[c] = Plane::Constant(height, width, fill[c]);
}

bool RgbImage::all_finite() const {
  return planes_[0].allFinite() && planes_[1].allFinite() && planes_[2].allFinite();
}

double RgbImage::squared_distance(const RgbImage& other) const {
  if (height() != other.height() || width() != other.width())
    throw std::invalid_argument("RgbImage::squared_distance: shape mismatch");
  double s = 0.0;
  for (int c = 0; c < 3; ++c) s += (channel(c) - other.channel(c)).square().sum();
  return s;
}

bool operator==(const RgbImage& a, const RgbImage& b) {
  if (a.height() != b.height() || a.width() != b.width()) return false;
  for (int c = 0; c < 3; ++c)
    if (!(a.channel(c) == b.channel(c)).all()) return false;
  return true;
}

double mean_squared_error(const RgbImage& a, const RgbImage& b) {
  const double n = 3.0 * a.height() * a.width();
  return n > 0 ? a.squared_distance(b) / n : 0.0;
}

double mean_pixel_residual(const RgbImage& a, const RgbImage& b) {
  if (a.height() != b.height() || a.width() != b.width())
    throw std::invalid_argument("mean_pixel_residual: shape mismatch");
  Plane sq = Plane::Zero(a.height(), a.width());
  for (int c = 0; c < 3; ++c) sq += (a.channel(c) - b.channel(c)).square();
  const double n = static_cast<double>(a.height()) * a.width();
  return n > 0 ? sq.sqrt().sum() / n : 0.0;
}

}  // namespace vpcd
