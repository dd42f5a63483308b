#include "support.hpp"

#include "vpcd/metrics.hpp"
#include "vpcd/pipeline.hpp"

#include <gtest/gtest.h>

namespace vpcd {
namespace {

metrics::TrackingReport score(const VideoParse& vp, const datagen::Sequence& seq) {
  std::vector<metrics::TrackPoint> pred, gt;
  for (const auto& r : vp.records) pred.push_back({r.frame, r.track_id, r.position});
  for (std::size_t t = 0; t < seq.truth.size(); ++t)
    for (const auto& o : seq.truth[t].objects) gt.push_back({static_cast<int>(t), o.id, o.center, o.visibility});
  return metrics::mot_eval(pred, gt);
}

TEST(Variant, StringRoundTrip) {
  for (auto v : {Variant::FrameIndependent, Variant::Aligned, Variant::StateOnly, Variant::TwoStage, Variant::Full})
    EXPECT_EQ(variant_from_string(to_string(v)), v);
  EXPECT_THROW(variant_from_string("partial"), std::invalid_argument);
}

TEST(Variant, ConfigFlags) {
  const auto fi = parse_config_for(Variant::FrameIndependent);
  EXPECT_FALSE(fi.align);
  EXPECT_FALSE(fi.runs_stage2());
  const auto so = parse_config_for(Variant::StateOnly);
  EXPECT_TRUE(so.state_only);
  EXPECT_FALSE(so.runs_stage2());
  const auto ts = parse_config_for(Variant::TwoStage);
  EXPECT_TRUE(ts.runs_stage2());
  EXPECT_FALSE(ts.use_external_templates);
  const auto full = parse_config_for(Variant::Full);
  EXPECT_TRUE(full.runs_stage2());
  EXPECT_TRUE(full.use_external_templates);
  EXPECT_TRUE(full.align);
}

TEST(ParseConfig, RejectsBadValues) {
  ParseConfig c;
  c.max_objs = 0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = ParseConfig{};
  c.colors = 1;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = ParseConfig{};
  c.err_thr = -1.0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
}

TEST(ResidualChannels, AreClampedAndColourRestricted) {
  RgbImage frame(8, 8), recon(8, 8);
  frame.set_pixel(1, 1, {1, 0, 0});
  frame.set_pixel(2, 2, {0, 1, 0});
  recon.set_pixel(2, 2, {0, 1, 0});  // explained
  recon.set_pixel(3, 3, {1, 0, 0});  // over-explained, residual negative
  const auto q = quantize_colors(frame, 3, 0);
  CandidateOptions opts;
  const auto ch = residual_channels(frame, recon, q, opts);
  for (const auto& m : ch.maps) {
    EXPECT_GE(m.minCoeff(), 0.0);
    EXPECT_LE(m.maxCoeff(), 1.0);
    EXPECT_EQ(m(2, 2), 0.0);
    EXPECT_EQ(m(3, 3), 0.0);
  }
  double total = 0.0;
  for (const auto& m : ch.maps) total += m.sum();
  EXPECT_NEAR(total, 1.0, 1e-12);
}

TEST(ParseVideo, OracleSpritesAreTrackedWithStableIds) {
  const auto spec = datagen::sprites_mot_spec();
  const auto protos = test::oracle_prototypes(spec);
  for (int s = 0; s < 3; ++s) {
    const auto seq = datagen::generate_sequence(spec, 500 + s);
    const auto vp = parse_video(seq.frames, protos, parse_config_for(Variant::Full));
    ASSERT_EQ(vp.frames.size(), seq.frames.size());
    const auto rep = score(vp, seq);
    ASSERT_TRUE(rep.mota.has_value());
    EXPECT_GE(*rep.mota, 0.9) << "sequence " << s;
    EXPECT_EQ(rep.id_switches, 0) << "sequence " << s;
    for (const auto& f : vp.frames) {
      EXPECT_EQ(f.ids.size(), f.objects.size());
      EXPECT_LE(f.residual, 0.05);
    }
  }
}

TEST(ParseVideo, IsDeterministic) {
  const auto spec = datagen::dynamics_bouncing_spec();
  const auto protos = test::oracle_prototypes(spec);
  const auto seq = datagen::generate_sequence(spec, 3);
  const std::span<const RgbImage> frames(seq.frames.data(), 8);
  const auto a = parse_video(frames, protos, parse_config_for(Variant::Full));
  const auto b = parse_video(frames, protos, parse_config_for(Variant::Full));
  ASSERT_EQ(a.records.size(), b.records.size());
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    EXPECT_EQ(a.records[i].track_id, b.records[i].track_id);
    EXPECT_EQ(a.records[i].position, b.records[i].position);
  }
}

TEST(ParseVideo, FrameIndependentIdsAreDepthRanks) {
  const auto spec = datagen::dynamics_bouncing_spec();
  const auto protos = test::oracle_prototypes(spec);
  const auto seq = datagen::generate_sequence(spec, 4);
  const std::span<const RgbImage> frames(seq.frames.data(), 4);
  const auto vp = parse_video(frames, protos, parse_config_for(Variant::FrameIndependent));
  for (const auto& f : vp.frames)
    for (std::size_t i = 0; i < f.ids.size(); ++i) EXPECT_EQ(f.ids[i], static_cast<int>(i) + 1);
}

TEST(ExternalTemplates, OnePerLiveTrackAdvancedByVelocity) {
  const auto spec = datagen::sprites_mot_spec();
  const auto protos = test::oracle_prototypes(spec);
  SceneState s;
  for (int t = 0; t < 2; ++t)
    s.align(std::vector{place_prototype(protos[1], 0, {1, 0, 0}, 10 + 3 * t, 12, 64, 64, EdgeMode::Clip)}, protos, t);
  const auto ext = external_templates(s);
  ASSERT_EQ(ext.size(), 1u);
  EXPECT_TRUE(ext[0].external);
  const Vec2 com = s.tracks()[0].position;
  EXPECT_NEAR(ext[0].center_of_mass.x, com.x + 3.0, 1e-6);
  EXPECT_NEAR(ext[0].center_of_mass.y, com.y, 1e-6);
}

}  // namespace
}  // namespace vpcd
