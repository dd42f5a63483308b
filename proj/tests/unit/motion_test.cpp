#include "support.hpp"

#include "vpcd/motion.hpp"

#include <gtest/gtest.h>

namespace vpcd::motion {
namespace {

class MotionTest : public ::testing::Test {
 protected:
  void SetUp() override { protos = test::oracle_prototypes(datagen::dynamics_bouncing_spec()); }
  ObjectInstance at(int proto, int x, int y, const Rgb& color = {1, 0, 0}) const {
    return place_prototype(protos[static_cast<std::size_t>(proto)], 0, color, x, y, 64, 64, EdgeMode::Clip);
  }
  PrototypeSet protos;
};

TEST_F(MotionTest, PhaseCorrelationVelocityIsExactForTranslation) {
  const auto e = estimate_velocity(at(2, 10, 20), at(2, 13, 18));
  EXPECT_FALSE(e.fallback);
  EXPECT_EQ(e.velocity, (PhaseDiff{3.0, -2.0}));
  EXPECT_NEAR(e.confidence, 1.0, 1e-6);
}

TEST_F(MotionTest, EmptyMaskFallsBackToCentreOfMass) {
  ObjectInstance a = at(0, 5, 5), b = at(0, 8, 9);
  a.layer.mask.setZero();
  const auto e = estimate_velocity(a, b);
  EXPECT_TRUE(e.fallback);
  EXPECT_NEAR(e.velocity.vx, b.center_of_mass.x - a.center_of_mass.x, 1e-12);
}

TEST(MotionHistory, PadsWithOldestEntry) {
  MotionHistory h(3);
  EXPECT_THROW(h.features({}), std::logic_error);
  h.push({1, 2}, {32, 32});
  const auto x = h.features({});
  ASSERT_EQ(x.size(), 12);
  for (int i = 0; i < 3; ++i) {
    EXPECT_DOUBLE_EQ(x(4 * i), 0.25);
    EXPECT_DOUBLE_EQ(x(4 * i + 1), 0.5);
    EXPECT_DOUBLE_EQ(x(4 * i + 2), 0.0);
  }
  h.push({3, 0}, {0, 64});
  h.push({0, 0}, {64, 0});
  h.push({-4, 4}, {16, 48});
  EXPECT_EQ(h.size(), 3);
  const auto y = h.features({});
  EXPECT_DOUBLE_EQ(y(0), 0.75);
  EXPECT_DOUBLE_EQ(y(2), -1.0);
  EXPECT_DOUBLE_EQ(y(3), 1.0);
  EXPECT_DOUBLE_EQ(y(8), -1.0);
  EXPECT_DOUBLE_EQ(y(11), 0.5);
}

TEST(RefineVelocity, ZeroInitialisedNetKeepsLastVelocity) {
  const VelocityNet net(3, {8}, 1);
  MotionHistory h(3);
  h.push({1, 1}, {10, 10});
  h.push({2, -1}, {12, 9});
  EXPECT_EQ(refine_velocity(h, net), (PhaseDiff{2, -1}));
  MotionHistory wrong(2);
  wrong.push({0, 0}, {0, 0});
  EXPECT_THROW(refine_velocity(wrong, net), std::invalid_argument);
}

TEST_F(MotionTest, PredictInstanceMatchesIntegerShift) {
  const ObjectInstance o = at(5, 20, 30, {0.2, 0.7, 0.9});
  const ObjectInstance p = predict_instance(o, {4, -3});
  const ObjectInstance s = shift_instance(o, 4, -3);
  EXPECT_LT((p.render_mask() - s.render_mask()).abs().maxCoeff(), 1e-9);
  const RgbImage a = p.render_template(), b = s.render_template();
  for (int c = 0; c < 3; ++c) EXPECT_LT((a.channel(c) - b.channel(c)).abs().maxCoeff(), 1e-9);
  EXPECT_NEAR(p.center_of_mass.x, o.center_of_mass.x + 4, 1e-12);
  EXPECT_EQ(s.peak.dx, 24);
  EXPECT_EQ(s.peak.dy, 27);
  EXPECT_THROW(predict_instance(o, {std::nan(""), 0}), std::invalid_argument);
}

TEST_F(MotionTest, NetlessRolloutIsExactOnConstantVelocity) {
  std::vector<RgbImage> frames;
  for (int t = 0; t < 13; ++t) {
    std::vector<ObjectInstance> scene{at(1, 5 + 2 * t, 8 + t, {1, 0, 0}), at(4, 45, 2 + 3 * t, {0, 0, 1})};
    frames.push_back(compose(scene, {0, 0, 0}, 64, 64));
  }
  RolloutConfig cfg;
  cfg.use_net = false;
  cfg.horizon = 10;
  const auto ro = rollout(frames, protos, nullptr, cfg);
  ASSERT_EQ(ro.frames.size(), 10u);
  ASSERT_EQ(ro.objects.size(), 10u);
  for (int k = 0; k < 10; ++k)
    EXPECT_LT(mean_squared_error(ro.frames[static_cast<std::size_t>(k)], frames[static_cast<std::size_t>(3 + k)]),
              1e-6)
        << "step " << k + 1;
  EXPECT_LT(mean_squared_error(ro.seed_reconstruction, frames[2]), 1e-6);
}

TEST_F(MotionTest, ZeroHorizonGivesReconstructionOnly) {
  std::vector<RgbImage> frames;
  for (int t = 0; t < 3; ++t)
    frames.push_back(compose(std::vector<ObjectInstance>{at(0, 10 + t, 10)}, {0, 0, 0}, 64, 64));
  RolloutConfig cfg;
  cfg.use_net = false;
  cfg.horizon = 0;
  const auto ro = rollout(frames, protos, nullptr, cfg);
  EXPECT_TRUE(ro.frames.empty());
  EXPECT_FALSE(ro.seed_reconstruction.empty());
  EXPECT_EQ(ro.seed_objects.size(), 1u);
}

TEST(RolloutConfig, Validation) {
  RolloutConfig cfg;
  cfg.seeds = 1;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = RolloutConfig{};
  cfg.horizon = -1;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
}

TEST_F(MotionTest, UnparsableSeedsAreRejected) {
  std::mt19937_64 rng(2);
  std::vector<RgbImage> noise;
  for (int t = 0; t < 3; ++t) {
    RgbImage f(64, 64);
    for (int c = 0; c < 3; ++c) f.channel(c) = test::random_plane(64, 64, rng);
    noise.push_back(f);
  }
  EXPECT_THROW(rollout(noise, protos, nullptr, RolloutConfig{}), std::runtime_error);
  EXPECT_THROW(rollout(std::span(noise).first(2), protos, nullptr, RolloutConfig{}), std::invalid_argument);
}

}  // namespace
}  // namespace vpcd::motion
