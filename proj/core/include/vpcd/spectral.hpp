#pragma once

// Frequency-domain primitives: 2-D FFT, frequency grids, phase correlation,
// Fourier-shift warping and velocity <-> phase-ramp conversion.
//
// Conventions: arrays are indexed (row, col) = (y, x). A shift (dx, dy) moves
// content right by dx and down by dy. All transforms are periodic.

#include "vpcd/image.hpp"

#include <vector>

namespace vpcd::spectral {

inline constexpr double kDefaultEps = 1e-8;

ComplexPlane fft2(const Plane& image);
ComplexPlane fft2(const ComplexPlane& image);
/// Inverse transform, complex result.
ComplexPlane ifft2_complex(const ComplexPlane& spectrum);
/// Inverse transform, real part. With `check_real`, throws if the imaginary
/// part exceeds 1e-8 relative to the real magnitude.
Plane ifft2(const ComplexPlane& spectrum, bool check_real = false);

struct FrequencyGrid {
  Plane fx;  ///< cycles per pixel along columns, depends on col only
  Plane fy;  ///< cycles per pixel along rows, depends on row only
  int height = 0;
  int width = 0;
};

/// Standard DFT frequency layout: j/N for j < N/2, (j - N)/N otherwise.
double dft_frequency(int index, int n);
FrequencyGrid make_frequency_grid(int height, int width);

struct LocalizationMap {
  Plane values;
  int source_prototype = -1;
  int source_channel = -1;
};

LocalizationMap phase_correlate(const Plane& x, const Plane& p, double eps = kDefaultEps);
/// Same as phase_correlate, from precomputed spectra F(x) and F(p).
LocalizationMap phase_correlate_spectra(const ComplexPlane& fx, const ComplexPlane& fp,
                                        double eps = kDefaultEps);

/// Separable phase ramp exp(-i 2 pi (dx fx + dy fy)).
ComplexPlane shift_ramp(int height, int width, double dx, double dy);

/// F^-1( F(p) exp(-i 2 pi (dx fx + dy fy)) ), real part.
Plane fourier_shift(const Plane& p, double dx, double dy);
/// Shift of a precomputed spectrum, returning the real image.
Plane fourier_shift_spectrum(const ComplexPlane& spectrum, double dx, double dy);
/// Partial derivative of fourier_shift(p, dx, dy) with respect to dx (axis 0)
/// or dy (axis 1).
Plane fourier_shift_derivative(const Plane& p, double dx, double dy, int axis);

/// Exact circular roll by integer offsets.
Plane roll(const Plane& p, int dx, int dy);

/// Pixel displacement per frame. Positive vx moves right, positive vy down.
struct PhaseDiff {
  double vx = 0.0;
  double vy = 0.0;
  friend bool operator==(const PhaseDiff&, const PhaseDiff&) = default;
};

/// Phase map 2 pi (vx fx + vy fy).
Plane velocity_to_phase(const PhaseDiff& v, const FrequencyGrid& grid);
/// Advances `p` by the displacement encoded in `phase` (as produced by
/// velocity_to_phase): F^-1( F(p) exp(-i phase) ).
Plane apply_phase(const Plane& p, const Plane& phase);

struct Peak {
  int dx = 0;
  int dy = 0;
  double score = 0.0;
};

/// Up to `count` local maxima in descending score order. A candidate is
/// suppressed when it lies within `nms_radius` (Chebyshev, periodic) of an
/// already accepted peak.
std::vector<Peak> extract_peaks(const Plane& map, int count, int nms_radius);

/// Signed representative of a periodic offset in [-n/2, n/2).
int wrap_signed(int offset, int n);

}  // namespace vpcd::spectral
