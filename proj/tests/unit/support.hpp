#pragma once

#include "vpcd/datagen.hpp"
#include "vpcd/decompose.hpp"

#include <complex>
#include <numbers>
#include <random>

namespace vpcd::test {

/// Prototypes equal to the generator's sprite bitmaps (hard masks).
inline PrototypeSet oracle_prototypes(const datagen::SceneSpec& spec) {
  PrototypeSet out;
  const auto shapes = datagen::make_shapes(spec.shapes, spec.sprite_size);
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    Prototype p;
    p.id = static_cast<int>(i);
    p.appearance = shapes[i];
    p.mask_logits = (shapes[i] > 0.5).select(Plane::Constant(shapes[i].rows(), shapes[i].cols(), 40.0),
                                              Plane::Constant(shapes[i].rows(), shapes[i].cols(), -40.0));
    out.push_back(std::move(p));
  }
  return out;
}

inline Plane random_plane(int h, int w, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Plane p(h, w);
  for (Eigen::Index i = 0; i < p.size(); ++i) p.data()[i] = u(rng);
  return p;
}

/// O(N^4) textbook DFT.
inline ComplexPlane naive_dft(const Plane& x) {
  const auto h = x.rows(), w = x.cols();
  ComplexPlane out(h, w);
  for (Eigen::Index u = 0; u < h; ++u)
    for (Eigen::Index v = 0; v < w; ++v) {
      std::complex<double> s = 0.0;
      for (Eigen::Index r = 0; r < h; ++r)
        for (Eigen::Index c = 0; c < w; ++c) {
          const double a = -2.0 * std::numbers::pi *
                           (static_cast<double>(u * r) / static_cast<double>(h) +
                            static_cast<double>(v * c) / static_cast<double>(w));
          s += x(r, c) * std::polar(1.0, a);
        }
      out(u, v) = s;
    }
  return out;
}

}  // namespace vpcd::test
