#include "vpcd/spectral.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <stdexcept>
#include <string>
#include <utility>

namespace vpcd::spectral {
namespace {

// FFTW planning is not thread-safe; execution with new-array plans is.
// Plans are created with FFTW_ESTIMATE so results do not depend on timing.
class PlanCache {
 public:
  ~PlanCache() {
    for (auto& [key, plan] : plans_) fftw_destroy_plan(plan);
  }

  fftw_plan get(int height, int width, int sign) {
    const std::lock_guard<std::mutex> lock(mutex_);
    const auto key = std::make_tuple(height, width, sign);
    if (auto it = plans_.find(key); it != plans_.end()) return it->second;
    const std::size_t n = static_cast<std::size_t>(height) * static_cast<std::size_t>(width);
    auto* in = fftw_alloc_complex(n);
    auto* out = fftw_alloc_complex(n);
    fftw_plan plan = fftw_plan_dft_2d(height, width, in, out, sign,
                                      FFTW_ESTIMATE | FFTW_UNALIGNED);
    fftw_free(in);
    fftw_free(out);
    if (plan == nullptr) throw std::runtime_error("fftw: failed to create plan");
    plans_.emplace(key, plan);
    return plan;
  }

 private:
  std::mutex mutex_;
  std::map<std::tuple<int, int, int>, fftw_plan> plans_;
};

PlanCache& plan_cache() {
  static PlanCache cache;
  return cache;
}

void transform(const ComplexPlane& in, ComplexPlane& out, int sign) {
  const int h = static_cast<int>(in.rows());
  const int w = static_cast<int>(in.cols());
  if (h < 1 || w < 1) throw std::invalid_argument("fft2: dimensions must be >= 1");
  out.resize(h, w);
  fftw_plan plan = plan_cache().get(h, w, sign);
  // fftw_execute_dft does not modify the input for out-of-place plans.
  fftw_execute_dft(plan,
                   reinterpret_cast<fftw_complex*>(const_cast<std::complex<double>*>(in.data())),
                   reinterpret_cast<fftw_complex*>(out.data()));
}

void require_finite(const Plane& p, const char* what) {
  if (!p.allFinite()) throw std::invalid_argument(std::string(what) + ": non-finite input");
}

}  // namespace

ComplexPlane fft2(const Plane& image) {
  require_finite(image, "fft2");
  ComplexPlane in = image.cast<std::complex<double>>();
  ComplexPlane out;
  transform(in, out, FFTW_FORWARD);
  return out;
}

ComplexPlane fft2(const ComplexPlane& image) {
  if (!image.allFinite()) throw std::invalid_argument("fft2: non-finite input");
  ComplexPlane out;
  transform(image, out, FFTW_FORWARD);
  return out;
}

ComplexPlane ifft2_complex(const ComplexPlane& spectrum) {
  if (!spectrum.allFinite()) throw std::invalid_argument("ifft2: non-finite input");
  ComplexPlane out;
  transform(spectrum, out, FFTW_BACKWARD);
  out /= static_cast<double>(spectrum.size());
  return out;
}

Plane ifft2(const ComplexPlane& spectrum, bool check_real) {
  const ComplexPlane out = ifft2_complex(spectrum);
  Plane re = out.real();
  if (check_real) {
    const double scale = std::max(1.0, re.abs().maxCoeff());
    const double imag = out.imag().abs().maxCoeff();
    if (imag > 1e-8 * scale)
      throw std::runtime_error("ifft2: imaginary residue " + std::to_string(imag));
  }
  return re;
}

double dft_frequency(int index, int n) {
  return (2 * index < n) ? static_cast<double>(index) / n : static_cast<double>(index - n) / n;
}

FrequencyGrid make_frequency_grid(int height, int width) {
  if (height < 1 || width < 1) throw std::invalid_argument("frequency grid: empty shape");
  FrequencyGrid g;
  g.height = height;
  g.width = width;
  g.fx.resize(height, width);
  g.fy.resize(height, width);
  for (int r = 0; r < height; ++r) {
    for (int c = 0; c < width; ++c) {
      g.fx(r, c) = dft_frequency(c, width);
      g.fy(r, c) = dft_frequency(r, height);
    }
  }
  return g;
}

LocalizationMap phase_correlate_spectra(const ComplexPlane& fx, const ComplexPlane& fp,
                                        double eps) {
  if (fx.rows() != fp.rows() || fx.cols() != fp.cols())
    throw std::invalid_argument("phase_correlate: shape mismatch");
  if (!(eps > 0.0)) throw std::invalid_argument("phase_correlate: eps must be positive");
  ComplexPlane cross = fx * fp.conjugate();
  const Plane mag = cross.abs().max(eps);
  cross /= mag.cast<std::complex<double>>();
  LocalizationMap m;
  m.values = ifft2(cross);
  return m;
}

LocalizationMap phase_correlate(const Plane& x, const Plane& p, double eps) {
  if (x.rows() != p.rows() || x.cols() != p.cols())
    throw std::invalid_argument("phase_correlate: shape mismatch");
  if (!(eps > 0.0)) throw std::invalid_argument("phase_correlate: eps must be positive");
  return phase_correlate_spectra(fft2(x), fft2(p), eps);
}

ComplexPlane shift_ramp(int height, int width, double dx, double dy) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  Eigen::Array<std::complex<double>, 1, Eigen::Dynamic> ex(width);
  Eigen::Array<std::complex<double>, Eigen::Dynamic, 1> ey(height);
  for (int c = 0; c < width; ++c) ex(c) = std::polar(1.0, -two_pi * dx * dft_frequency(c, width));
  for (int r = 0; r < height; ++r) ey(r) = std::polar(1.0, -two_pi * dy * dft_frequency(r, height));
  ComplexPlane ramp(height, width);
  for (int r = 0; r < height; ++r) ramp.row(r) = ex * ey(r);
  return ramp;
}

Plane fourier_shift_spectrum(const ComplexPlane& spectrum, double dx, double dy) {
  if (!std::isfinite(dx) || !std::isfinite(dy))
    throw std::invalid_argument("fourier_shift: non-finite shift");
  const int h = static_cast<int>(spectrum.rows());
  const int w = static_cast<int>(spectrum.cols());
  return ifft2(spectrum * shift_ramp(h, w, dx, dy));
}

Plane fourier_shift(const Plane& p, double dx, double dy) {
  return fourier_shift_spectrum(fft2(p), dx, dy);
}

Plane fourier_shift_derivative(const Plane& p, double dx, double dy, int axis) {
  if (axis != 0 && axis != 1) throw std::invalid_argument("fourier_shift_derivative: axis");
  constexpr double two_pi = 2.0 * std::numbers::pi;
  const int h = static_cast<int>(p.rows());
  const int w = static_cast<int>(p.cols());
  ComplexPlane s = fft2(p) * shift_ramp(h, w, dx, dy);
  const std::complex<double> minus_i_two_pi(0.0, -two_pi);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      const double f = axis == 0 ? dft_frequency(c, w) : dft_frequency(r, h);
      s(r, c) *= minus_i_two_pi * f;
    }
  }
  return ifft2(s);
}

Plane roll(const Plane& p, int dx, int dy) {
  const int h = static_cast<int>(p.rows());
  const int w = static_cast<int>(p.cols());
  Plane out(h, w);
  const int sx = ((dx % w) + w) % w;
  const int sy = ((dy % h) + h) % h;
  for (int r = 0; r < h; ++r) {
    const int rr = (r + sy) % h;
    for (int c = 0; c < w; ++c) out(rr, (c + sx) % w) = p(r, c);
  }
  return out;
}

Plane velocity_to_phase(const PhaseDiff& v, const FrequencyGrid& grid) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  return two_pi * (v.vx * grid.fx + v.vy * grid.fy);
}

Plane apply_phase(const Plane& p, const Plane& phase) {
  if (p.rows() != phase.rows() || p.cols() != phase.cols())
    throw std::invalid_argument("apply_phase: shape mismatch");
  ComplexPlane s = fft2(p);
  for (Eigen::Index i = 0; i < s.size(); ++i) s(i) *= std::polar(1.0, -phase(i));
  return ifft2(s);
}

int wrap_signed(int offset, int n) {
  int m = ((offset % n) + n) % n;
  if (2 * m >= n) m -= n;
  return m;
}

std::vector<Peak> extract_peaks(const Plane& map, int count, int nms_radius) {
  std::vector<Peak> out;
  if (count <= 0) return out;
  const int h = static_cast<int>(map.rows());
  const int w = static_cast<int>(map.cols());
  std::vector<Peak> maxima;
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      const double v = map(r, c);
      bool is_max = true;
      for (int dr = -1; dr <= 1 && is_max; ++dr) {
        for (int dc = -1; dc <= 1; ++dc) {
          if (dr == 0 && dc == 0) continue;
          const int rr = (r + dr + h) % h;
          const int cc = (c + dc + w) % w;
          const double u = map(rr, cc);
          // Plateaus: the first pixel in raster order wins.
          if (u > v || (u == v && rr * w + cc < r * w + c)) {
            is_max = false;
            break;
          }
        }
      }
      if (is_max) maxima.push_back({c, r, v});
    }
  }
  std::stable_sort(maxima.begin(), maxima.end(),
                   [](const Peak& a, const Peak& b) { return a.score > b.score; });
  for (const Peak& cand : maxima) {
    bool suppressed = false;
    for (const Peak& kept : out) {
      const int ddx = std::abs(wrap_signed(cand.dx - kept.dx, w));
      const int ddy = std::abs(wrap_signed(cand.dy - kept.dy, h));
      if (std::max(ddx, ddy) <= nms_radius) {
        suppressed = true;
        break;
      }
    }
    if (!suppressed) {
      out.push_back(cand);
      if (static_cast<int>(out.size()) == count) break;
    }
  }
  return out;
}

}  // namespace vpcd::spectral
