#include "support.hpp"

#include "vpcd/decompose.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>

namespace vpcd {
namespace {

Prototype square_prototype(int id, int size) {
  Prototype p;
  p.id = id;
  p.appearance = Plane::Ones(size, size);
  p.mask_logits = Plane::Constant(size, size, 30.0);
  return p;
}

TEST(Quantize, RecoversExactPalette) {
  RgbImage img(8, 8);
  for (int r = 0; r < 8; ++r)
    for (int c = 0; c < 8; ++c) img.set_pixel(r, c, c < 3 ? Rgb{1, 0, 0} : (r < 4 ? Rgb{0, 0, 1} : Rgb{0, 0, 0}));
  const auto q = quantize_colors(img, 3, 7);
  ASSERT_EQ(q.k(), 3);
  EXPECT_FALSE(q.degenerate_palette);
  EXPECT_TRUE(std::is_sorted(q.centroids.begin(), q.centroids.end()));
  Plane total = Plane::Zero(8, 8);
  for (const auto& ch : q.channels) total += ch;
  EXPECT_TRUE((total == 1.0).all());
  EXPECT_EQ(q.reconstruct(), img);
  EXPECT_EQ(q.centroids[static_cast<std::size_t>(q.nearest_channel({0.1, 0.0, 0.0}))], (Rgb{0, 0, 0}));
}

TEST(Quantize, FlagsDegeneratePalette) {
  RgbImage img(4, 4, {0.5, 0.5, 0.5});
  img.set_pixel(0, 0, {1, 1, 1});
  const auto q = quantize_colors(img, 5, 0);
  EXPECT_TRUE(q.degenerate_palette);
  EXPECT_EQ(q.k(), 5);
  EXPECT_EQ(q.reconstruct(), img);
}

TEST(Quantize, IsDeterministicForSeed) {
  std::mt19937_64 rng(3);
  RgbImage img(16, 16);
  for (int c = 0; c < 3; ++c) img.channel(c) = test::random_plane(16, 16, rng);
  const auto a = quantize_colors(img, 4, 11);
  const auto b = quantize_colors(img, 4, 11);
  EXPECT_EQ(a.centroids, b.centroids);
}

TEST(Placement, ClipDropsOutsidePixelsAndPeriodicWraps) {
  const Prototype p = square_prototype(0, 3);
  const auto clip = place_prototype(p, 0, {1, 1, 1}, -1, 6, 8, 8, EdgeMode::Clip);
  EXPECT_NEAR(clip.render_mask().sum(), 4.0, 1e-9);  // 2 columns x 2 rows inside
  const auto wrap = place_prototype(p, 0, {1, 1, 1}, -1, 6, 8, 8, EdgeMode::Periodic);
  EXPECT_NEAR(wrap.render_mask().sum(), 9.0, 1e-9);
  EXPECT_GT(wrap.render_mask()(0, 7), 0.99);
  EXPECT_EQ(wrap.peak.dx, 7);
  EXPECT_EQ(wrap.peak.dy, 6);
}

TEST(Placement, FourierAtIntegerShiftMatchesPatch) {
  std::mt19937_64 rng(5);
  Prototype p;
  p.id = 2;
  p.appearance = test::random_plane(5, 5, rng);
  p.mask_logits = test::random_plane(5, 5, rng) * 6.0 - 3.0;
  const auto a = place_prototype(p, 1, {0.2, 0.6, 1.0}, 9, 4, 16, 16, EdgeMode::Periodic);
  const auto b = place_prototype_fourier(p, 1, {0.2, 0.6, 1.0}, 9.0, 4.0, 16, 16);
  EXPECT_LT((a.render_mask() - b.render_mask()).abs().maxCoeff(), 1e-9);
  const RgbImage ta = a.render_template(), tb = b.render_template();
  for (int c = 0; c < 3; ++c) EXPECT_LT((ta.channel(c) - tb.channel(c)).abs().maxCoeff(), 1e-9);
}

TEST(Compose, FrontObjectOccludes) {
  const Prototype p = square_prototype(0, 4);
  std::vector<ObjectInstance> objs{place_prototype(p, 0, {1, 0, 0}, 2, 2, 10, 10, EdgeMode::Clip),
                                   place_prototype(p, 1, {0, 1, 0}, 4, 4, 10, 10, EdgeMode::Clip)};
  const RgbImage img = compose(objs, {0, 0, 0}, 10, 10);
  EXPECT_NEAR(img.at(0, 5, 5), 1.0, 1e-9);
  EXPECT_NEAR(img.at(1, 5, 5), 0.0, 1e-9);
  EXPECT_NEAR(img.at(1, 7, 7), 1.0, 1e-9);
  EXPECT_NEAR(img.at(0, 0, 0), 0.0, 1e-12);
  EXPECT_NEAR(reconstruction_error(img, objs, {0, 0, 0}), 0.0, 1e-9);
  std::reverse(objs.begin(), objs.end());
  EXPECT_GT(reconstruction_error(img, objs, {0, 0, 0}), 1.0);
}

TEST(Compose, SoftMaskBlendsWithBackground) {
  Prototype p = square_prototype(0, 1);
  p.mask_logits(0, 0) = 0.0;  // sigmoid 0.5
  const std::vector<ObjectInstance> objs{place_prototype(p, 0, {1, 1, 1}, 0, 0, 2, 2, EdgeMode::Clip)};
  const RgbImage img = compose(objs, {0.2, 0.2, 0.2}, 2, 2);
  EXPECT_NEAR(img.at(0, 0, 0), 0.6, 1e-12);
  EXPECT_NEAR(img.at(2, 1, 1), 0.2, 1e-12);
}

TEST(Candidates, ContainExactPlacement) {
  const auto spec = datagen::dynamics_bouncing_spec();
  const PrototypeSet protos = test::oracle_prototypes(spec);
  const auto truth = place_prototype(protos[3], 0, {0, 1, 0}, 20, 33, 64, 64, EdgeMode::Clip);
  const RgbImage frame = compose(std::vector<ObjectInstance>{truth}, {0, 0, 0}, 64, 64);
  const auto q = quantize_colors(frame, 2, 0);
  CandidateOptions opts;
  const auto cands = generate_candidates(q, protos, opts);
  const auto hit = std::find_if(cands.begin(), cands.end(), [](const ObjectInstance& o) {
    return o.prototype_id == 3 && o.layer.left == 20 && o.layer.top == 33;
  });
  ASSERT_NE(hit, cands.end());
  EXPECT_NEAR(hit->peak.score, 1.0, 1e-6);
  GreedyOptions g;
  g.max_objs = 3;
  const auto sel = greedy_select(frame, cands, g);
  ASSERT_EQ(sel.objects.size(), 1u);
  EXPECT_EQ(sel.objects[0].prototype_id, 3);
  EXPECT_NEAR(sel.error, 0.0, 1e-6);
}

TEST(Candidates, BackgroundChannelIsSkipped) {
  const Prototype p = square_prototype(0, 3);
  RgbImage frame(16, 16);
  frame.set_pixel(4, 4, {1, 1, 1});
  const auto q = quantize_colors(frame, 2, 0);
  CandidateOptions opts;
  for (const auto& c : generate_candidates(q, {p}, opts)) EXPECT_NE(c.color, (Rgb{0, 0, 0}));
}

// Exhaustive search over ordered subsets of size <= m.
double exhaustive_best(const RgbImage& frame, const std::vector<ObjectInstance>& cands, int m) {
  double best = frame.squared_distance(RgbImage(frame.height(), frame.width()));
  std::vector<ObjectInstance> cur;
  std::vector<bool> used(cands.size(), false);
  std::function<void()> rec = [&] {
    best = std::min(best, std::pow(reconstruction_error(frame, cur, {0, 0, 0}), 2));
    if (static_cast<int>(cur.size()) == m) return;
    for (std::size_t i = 0; i < cands.size(); ++i) {
      if (used[i]) continue;
      used[i] = true;
      cur.push_back(cands[i]);
      rec();
      cur.pop_back();
      used[i] = false;
    }
  };
  rec();
  return std::sqrt(best);
}

TEST(Greedy, TraceDecreasesAndNeverBeatsExhaustive) {
  std::mt19937_64 rng(9);
  std::uniform_int_distribution<int> pos(0, 12);
  const Prototype a = square_prototype(0, 4), b = square_prototype(1, 3);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<ObjectInstance> cands;
    for (int i = 0; i < 6; ++i)
      cands.push_back(place_prototype(i % 2 ? a : b, 0, {i * 0.15, 1.0 - i * 0.1, 0.5}, pos(rng), pos(rng), 16, 16,
                                      EdgeMode::Clip));
    std::vector<ObjectInstance> truth{cands[0], cands[3]};
    const RgbImage frame = compose(truth, {0, 0, 0}, 16, 16);
    GreedyOptions g;
    g.max_objs = 3;
    const auto sel = greedy_select(frame, cands, g);
    for (std::size_t i = 1; i < sel.error_trace.size(); ++i) EXPECT_LE(sel.error_trace[i], sel.error_trace[i - 1]);
    EXPECT_GE(sel.error + 1e-9, exhaustive_best(frame, cands, 3));
    for (std::size_t i = 0; i < sel.objects.size(); ++i) EXPECT_EQ(sel.objects[i].depth_rank, static_cast<int>(i) + 1);
  }
}

TEST(Greedy, WithoutEarlyStopFillsMaxObjs) {
  const Prototype p = square_prototype(0, 3);
  std::vector<ObjectInstance> cands;
  for (int i = 0; i < 4; ++i) cands.push_back(place_prototype(p, 0, {1, 1, 1}, 3 * i, 0, 16, 16, EdgeMode::Clip));
  const RgbImage frame = compose(std::span(cands).first(1), {0, 0, 0}, 16, 16);
  GreedyOptions g;
  g.max_objs = 3;
  EXPECT_EQ(greedy_select(frame, cands, g).objects.size(), 1u);
  g.early_stop = false;
  EXPECT_EQ(greedy_select(frame, cands, g).objects.size(), 3u);
  g.max_objs = 0;
  EXPECT_TRUE(greedy_select(frame, cands, g).objects.empty());
  g.max_objs = -1;
  EXPECT_THROW(greedy_select(frame, cands, g), std::invalid_argument);
}

TEST(Greedy, SlackAdmitsExternalCandidatesOnly) {
  const Prototype p = square_prototype(0, 2);
  auto ext = place_prototype(p, 0, {0.1, 0.1, 0.1}, 0, 0, 8, 8, EdgeMode::Clip);
  ext.external = true;
  const RgbImage frame(8, 8);
  GreedyOptions g;
  g.slack = 1.0;  // 4 pixels x 3 channels x 0.01 = 0.12 error increase
  EXPECT_EQ(greedy_select(frame, std::vector<ObjectInstance>{ext}, g).objects.size(), 1u);
  ext.external = false;
  EXPECT_TRUE(greedy_select(frame, std::vector<ObjectInstance>{ext}, g).objects.empty());
}

}  // namespace
}  // namespace vpcd
