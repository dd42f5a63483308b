#include "support.hpp"

#include "vpcd/metrics.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <map>

namespace vpcd::metrics {
namespace {

// Textbook contingency-table ARI over all given pixels.
double ari_oracle(const std::vector<int>& a, const std::vector<int>& b) {
  std::map<std::pair<int, int>, double> nij;
  std::map<int, double> ai, bj;
  for (std::size_t i = 0; i < a.size(); ++i) {
    nij[{a[i], b[i]}] += 1;
    ai[a[i]] += 1;
    bj[b[i]] += 1;
  }
  const auto c2 = [](double n) { return n * (n - 1) / 2; };
  double sij = 0, sa = 0, sb = 0;
  for (const auto& [_, v] : nij) sij += c2(v);
  for (const auto& [_, v] : ai) sa += c2(v);
  for (const auto& [_, v] : bj) sb += c2(v);
  const double expected = sa * sb / c2(static_cast<double>(a.size()));
  return (sij - expected) / (0.5 * (sa + sb) - expected);
}

TEST(Ari, IdenticalPartitionsScoreOne) {
  const std::vector<int> t{0, 1, 1, 2, 2, 2, 3, 0};
  EXPECT_DOUBLE_EQ(ari(t, t, true), 1.0);
  std::vector<int> relabelled{5, 9, 9, 7, 7, 7, 1, 5};
  EXPECT_DOUBLE_EQ(ari(relabelled, t, true), 1.0);
}

TEST(Ari, MatchesContingencyOracle) {
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<int> lab(0, 3);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<int> a(200), b(200);
    for (std::size_t i = 0; i < a.size(); ++i) {
      b[i] = lab(rng);
      a[i] = trial % 2 ? lab(rng) : (b[i] + (i % 7 == 0)) % 4;
    }
    EXPECT_NEAR(ari(a, b, true), ari_oracle(a, b), 1e-12);
  }
}

TEST(Ari, RandomLabellingIsNearZero) {
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<int> lab(1, 4);
  std::vector<int> a(64 * 64), b(64 * 64);
  for (std::size_t i = 0; i < a.size(); ++i) {
    a[i] = lab(rng);
    b[i] = lab(rng);
  }
  EXPECT_NEAR(ari(a, b), 0.0, 0.01);
}

TEST(Ari, BackgroundExcludedByDefault) {
  const std::vector<int> truth{0, 0, 0, 1, 1, 2, 2};
  const std::vector<int> pred{1, 2, 2, 3, 3, 4, 4};
  EXPECT_DOUBLE_EQ(ari(pred, truth), 1.0);
  EXPECT_LT(ari(pred, truth, true), 1.0);
  EXPECT_THROW(ari(std::vector<int>{1}, truth), std::invalid_argument);
}

TEST(InstanceLabels, FrontmostWins) {
  PrototypeSet protos = test::oracle_prototypes(datagen::sprites_mot_spec());
  const std::vector<ObjectInstance> objs{
      place_prototype(protos[1], 0, {1, 0, 0}, 2, 2, 16, 16, EdgeMode::Clip),
      place_prototype(protos[1], 0, {0, 1, 0}, 4, 2, 16, 16, EdgeMode::Clip)};
  const auto lab = instance_labels(objs, 16, 16);
  ASSERT_EQ(lab.size(), 256u);
  EXPECT_EQ(lab[0], 0);
  EXPECT_EQ(lab[6 * 16 + 6], 1);  // overlap
  EXPECT_EQ(lab[6 * 16 + 13], 2);
  EXPECT_EQ(lab[6 * 16 + 14], 0);  // square leaves a one-pixel margin
}

TEST(Images, MsePsnrSsim) {
  std::mt19937_64 rng(3);
  RgbImage a(32, 32);
  for (int c = 0; c < 3; ++c) a.channel(c) = test::random_plane(32, 32, rng);
  EXPECT_EQ(frame_mse(a, a), 0.0);
  EXPECT_TRUE(std::isinf(psnr(a, a)));
  EXPECT_NEAR(ssim(a, a), 1.0, 1e-12);
  RgbImage b = a;
  for (int c = 0; c < 3; ++c) b.channel(c) += 0.1;
  EXPECT_NEAR(frame_mse(a, b), 0.01, 1e-12);
  EXPECT_NEAR(psnr(a, b), 20.0, 1e-9);
  EXPECT_LT(ssim(a, b), 1.0);
  RgbImage c(32, 32);
  for (int ch = 0; ch < 3; ++ch) c.channel(ch) = test::random_plane(32, 32, rng);
  EXPECT_LT(ssim(a, c), 0.2);
  EXPECT_NEAR(ssim(a, c), ssim(c, a), 1e-12);
}

TEST(Images, SsimOfConstantPlanes) {
  const Plane z = Plane::Zero(16, 16);
  EXPECT_DOUBLE_EQ(ssim(z, z), 1.0);
  // Luminance term only: (2*0*0.5 + C1) / (0.25 + C1).
  EXPECT_NEAR(ssim(z, Plane::Constant(16, 16, 0.5)), 1e-4 / (0.25 + 1e-4), 1e-12);
}

std::vector<TrackPoint> track(int id, int frames, Vec2 start, Vec2 v, int first = 0) {
  std::vector<TrackPoint> out;
  for (int t = first; t < first + frames; ++t) out.push_back({t, id, start + static_cast<double>(t) * v});
  return out;
}

TEST(Mot, PerfectTrackingScoresOne) {
  auto gt = track(1, 10, {5, 5}, {1, 0});
  const auto b = track(2, 10, {40, 40}, {0, 1});
  gt.insert(gt.end(), b.begin(), b.end());
  auto pred = gt;
  for (auto& p : pred) p.id += 100;
  const auto r = mot_eval(pred, gt);
  ASSERT_TRUE(r.mota);
  EXPECT_DOUBLE_EQ(*r.mota, 1.0);
  EXPECT_EQ(r.id_switches, 0);
  EXPECT_EQ(r.mostly_tracked, 2);
  EXPECT_DOUBLE_EQ(r.motp, 0.0);
  EXPECT_EQ(r.frames, 10);
}

TEST(Mot, CountsSwitchesMissesAndFalsePositives) {
  const auto gt = track(1, 10, {5, 5}, {1, 0});
  auto pred = track(7, 5, {5, 5}, {1, 0});
  auto rest = track(8, 5, {5, 5}, {1, 0}, 5);
  pred.insert(pred.end(), rest.begin(), rest.end());
  auto r = mot_eval(pred, gt);
  EXPECT_EQ(r.id_switches, 1);
  EXPECT_NEAR(*r.mota, 1.0 - 1.0 / 10.0, 1e-12);
  pred.push_back({3, 9, {50, 50}});  // false positive
  pred.erase(pred.begin());          // miss at frame 0
  r = mot_eval(pred, gt);
  EXPECT_EQ(r.false_positives, 1);
  EXPECT_EQ(r.false_negatives, 1);
  EXPECT_NEAR(*r.mota, 1.0 - 3.0 / 10.0, 1e-12);
}

TEST(Mot, RadiusAndDontCare) {
  std::vector<TrackPoint> gt{{0, 1, {10, 10}, 1.0}, {0, 2, {30, 30}, 0.1}};
  std::vector<TrackPoint> pred{{0, 5, {13, 14}}};
  auto r = mot_eval(pred, gt);
  EXPECT_EQ(r.matches, 1);
  EXPECT_EQ(r.false_negatives, 0);  // object 2 is don't-care
  EXPECT_NEAR(r.motp, 1.0, 1e-12);  // distance 5 / radius 5
  pred[0].position = {16, 10};
  r = mot_eval(pred, gt);
  EXPECT_EQ(r.matches, 0);
  EXPECT_EQ(r.false_positives, 1);
  EXPECT_FALSE(mot_eval(pred, std::vector<TrackPoint>{}).mota.has_value());
}

TEST(Mot, CombineSumsCounts) {
  const auto gt = track(1, 4, {5, 5}, {1, 0});
  const auto a = mot_eval(gt, gt);
  const auto b = mot_eval(std::vector<TrackPoint>{}, gt);
  const std::vector<TrackingReport> both{a, b};
  const auto c = combine(both);
  EXPECT_EQ(c.ground_truth, 8);
  EXPECT_EQ(c.false_negatives, 4);
  EXPECT_DOUBLE_EQ(*c.mota, 0.5);
}

TEST(Positions, MatchingAndCurve) {
  const std::vector<Vec2> pred{{0, 0}, {20, 20}, {41, 40}};
  const std::vector<Vec2> truth{{40, 40}, {1, 1}, {90, 90}};
  const auto m = match_positions(pred, truth, 5.0);
  EXPECT_EQ(m, (std::vector<int>{2, 0, -1}));
  std::vector<PositionSample> s{{1, Vec2{0, 0}, {3, 4}}, {1, Vec2{1, 1}, {1, 1}}, {2, std::nullopt, {0, 0}}};
  const auto c = position_mse(s, 2, 10.0);
  EXPECT_DOUBLE_EQ(c.mean[0], 12.5);
  EXPECT_DOUBLE_EQ(c.stddev[0], 12.5);
  EXPECT_DOUBLE_EQ(c.mean[1], 100.0);
  EXPECT_EQ(c.unmatched[1], 1);
  EXPECT_EQ(c.count[0], 2);
}

TEST(Trajectories, CsvFormat) {
  const auto path = std::filesystem::temp_directory_path() / "vpcd_traj_test.csv";
  const std::vector<TrajectoryRecord> recs{{3, 5, {1.5, 2}, {1, -1}}};
  write_trajectories(path, recs);
  std::ifstream f(path);
  std::string header, line;
  std::getline(f, header);
  std::getline(f, line);
  EXPECT_EQ(header, "track_id,t,x,y,vx,vy");
  EXPECT_EQ(line, "3,5,1.5,2,1,-1");
  std::filesystem::remove(path);
}

}  // namespace
}  // namespace vpcd::metrics
