#include "support.hpp"

#include "vpcd/spectral.hpp"

#include <gtest/gtest.h>

#include <cmath>

namespace vpcd::spectral {
namespace {

using test::random_plane;

TEST(Spectral, Fft2MatchesNaiveDft) {
  std::mt19937_64 rng(1);
  const Plane x = random_plane(6, 10, rng);
  const ComplexPlane a = fft2(x);
  const ComplexPlane b = test::naive_dft(x);
  EXPECT_LT((a - b).abs().maxCoeff(), 1e-10);
}

TEST(Spectral, InverseRoundTrip) {
  std::mt19937_64 rng(2);
  const Plane x = random_plane(16, 12, rng);
  EXPECT_LT((ifft2(fft2(x), true) - x).abs().maxCoeff(), 1e-12);
}

TEST(Spectral, CheckRealRejectsComplexSignal) {
  ComplexPlane s = ComplexPlane::Zero(4, 4);
  s(0, 1) = {0.0, 3.0};
  EXPECT_THROW(ifft2(s, true), std::runtime_error);
}

TEST(Spectral, DftFrequencyLayout) {
  EXPECT_DOUBLE_EQ(dft_frequency(0, 8), 0.0);
  EXPECT_DOUBLE_EQ(dft_frequency(3, 8), 3.0 / 8.0);
  EXPECT_DOUBLE_EQ(dft_frequency(4, 8), -4.0 / 8.0);
  EXPECT_DOUBLE_EQ(dft_frequency(7, 8), -1.0 / 8.0);
  EXPECT_DOUBLE_EQ(dft_frequency(2, 5), 2.0 / 5.0);
  EXPECT_DOUBLE_EQ(dft_frequency(3, 5), -2.0 / 5.0);
  const auto g = make_frequency_grid(4, 6);
  EXPECT_DOUBLE_EQ(g.fx(2, 1), 1.0 / 6.0);
  EXPECT_DOUBLE_EQ(g.fy(3, 5), -1.0 / 4.0);
}

TEST(Spectral, RollMovesContentRightAndDown) {
  Plane p = Plane::Zero(5, 7);
  p(1, 2) = 1.0;
  const Plane r = roll(p, 3, -2);
  EXPECT_EQ(r(4, 5), 1.0);
  EXPECT_EQ(r.sum(), 1.0);
  const Plane w = roll(p, 6, 0);
  EXPECT_EQ(w(1, 1), 1.0);
}

TEST(Spectral, IntegerFourierShiftEqualsRoll) {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> d(-40, 40);
  for (int trial = 0; trial < 20; ++trial) {
    const Plane p = random_plane(32, 24, rng);
    const int dx = d(rng), dy = d(rng);
    EXPECT_LT((fourier_shift(p, dx, dy) - roll(p, dx, dy)).abs().maxCoeff(), 1e-9);
  }
}

TEST(Spectral, FractionalShiftsCompose) {
  std::mt19937_64 rng(4);
  // Odd sizes have no Nyquist bin, whose real-valued phase does not compose.
  const Plane p = random_plane(15, 17, rng);
  const Plane a = fourier_shift(fourier_shift(p, 0.3, -1.7), 0.45, 0.2);
  const Plane b = fourier_shift(p, 0.75, -1.5);
  EXPECT_LT((a - b).abs().maxCoeff(), 1e-9);
  // Shifts preserve the mean.
  EXPECT_NEAR(fourier_shift(p, 0.37, 2.9).mean(), p.mean(), 1e-12);
}

TEST(Spectral, PhaseRampMatchesShift) {
  std::mt19937_64 rng(5);
  const Plane p = random_plane(12, 20, rng);
  const auto grid = make_frequency_grid(12, 20);
  const Plane via_phase = apply_phase(p, velocity_to_phase({1.25, -0.5}, grid));
  EXPECT_LT((via_phase - fourier_shift(p, 1.25, -0.5)).abs().maxCoeff(), 1e-10);
  const ComplexPlane ramp = shift_ramp(12, 20, 1.25, -0.5);
  EXPECT_LT((ifft2(fft2(p) * ramp) - via_phase).abs().maxCoeff(), 1e-10);
}

TEST(Spectral, ShiftDerivativeMatchesFiniteDifference) {
  std::mt19937_64 rng(6);
  const Plane p = random_plane(10, 14, rng);
  const double h = 1e-5;
  for (int axis = 0; axis < 2; ++axis) {
    const double ex = axis == 0 ? h : 0.0, ey = axis == 1 ? h : 0.0;
    const Plane fd = (fourier_shift(p, 0.4 + ex, -1.2 + ey) - fourier_shift(p, 0.4 - ex, -1.2 - ey)) / (2 * h);
    EXPECT_LT((fourier_shift_derivative(p, 0.4, -1.2, axis) - fd).abs().maxCoeff(), 1e-6) << "axis " << axis;
  }
}

TEST(Spectral, PhaseCorrelationRecoversIntegerShift) {
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<int> d(0, 63);
  for (int trial = 0; trial < 50; ++trial) {
    const Plane p = random_plane(64, 64, rng);
    const int dx = d(rng), dy = d(rng);
    const auto map = phase_correlate(roll(p, dx, dy), p);
    Eigen::Index r = 0, c = 0;
    map.values.maxCoeff(&r, &c);
    EXPECT_EQ(c, dx);
    EXPECT_EQ(r, dy);
    EXPECT_NEAR(map.values(r, c), 1.0, 1e-9);
  }
}

TEST(Spectral, PhaseCorrelationOfZeroImageIsFinite) {
  const auto map = phase_correlate(Plane::Zero(8, 8), Plane::Zero(8, 8));
  EXPECT_TRUE(map.values.allFinite());
}

TEST(Spectral, WrapSigned) {
  EXPECT_EQ(wrap_signed(0, 64), 0);
  EXPECT_EQ(wrap_signed(31, 64), 31);
  EXPECT_EQ(wrap_signed(32, 64), -32);
  EXPECT_EQ(wrap_signed(63, 64), -1);
  EXPECT_EQ(wrap_signed(-1, 64), -1);
  EXPECT_EQ(wrap_signed(65, 64), 1);
}

TEST(Spectral, PeaksAreSortedAndSuppressed) {
  Plane m = Plane::Zero(16, 16);
  m(2, 3) = 1.0;
  m(2, 4) = 0.9;  // suppressed neighbour
  m(10, 12) = 0.8;
  m(15, 3) = 0.7;  // 3 rows from (2, 3) across the edge
  const auto peaks = extract_peaks(m, 3, 1);
  ASSERT_EQ(peaks.size(), 3u);
  EXPECT_EQ(peaks[0].dx, 3);
  EXPECT_EQ(peaks[0].dy, 2);
  EXPECT_EQ(peaks[1].dx, 12);
  EXPECT_EQ(peaks[1].dy, 10);
  EXPECT_EQ(peaks[2].dx, 3);
  EXPECT_EQ(peaks[2].dy, 15);
  for (std::size_t i = 1; i < peaks.size(); ++i) EXPECT_GE(peaks[i - 1].score, peaks[i].score);
  // Radius 3 wraps across the top edge and removes (15, 3).
  const auto wide = extract_peaks(m, 3, 3);
  for (const auto& p : wide) EXPECT_FALSE(p.dx == 3 && p.dy == 15);
}

}  // namespace
}  // namespace vpcd::spectral
