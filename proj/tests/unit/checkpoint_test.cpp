#include "vpcd/checkpoint.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

namespace vpcd::checkpoint {
namespace {

namespace fs = std::filesystem;

class CheckpointTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir = fs::temp_directory_path() / ("vpcd_ckpt_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) +
                                       "_" + ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::create_directories(dir);
  }
  void TearDown() override { fs::remove_all(dir); }

  std::vector<char> bytes(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(f), {}};
  }
  void write(const fs::path& p, const std::vector<char>& b) {
    std::ofstream f(p, std::ios::binary | std::ios::trunc);
    f.write(b.data(), static_cast<std::streamsize>(b.size()));
  }

  fs::path dir;
};

Checkpoint sample() {
  Checkpoint c;
  c.meta["kind"] = "test";
  c.meta["step"] = "12";
  c.put("raw", {2, 3}, {1, 2, 3, 4, 5, 6});
  Plane p(2, 2);
  p << 0.5, 0.25, -1.0, 2.0;
  c.put("plane", p);
  return c;
}

TEST_F(CheckpointTest, RoundTrip) {
  const Checkpoint c = sample();
  save(c, dir / "a.ckpt");
  const Checkpoint r = load(dir / "a.ckpt");
  EXPECT_EQ(r.meta, c.meta);
  ASSERT_EQ(r.tensors.size(), 2u);
  EXPECT_EQ(r.at("raw").shape, (std::vector<std::int64_t>{2, 3}));
  EXPECT_EQ(r.at("raw").data, c.at("raw").data);
  const Plane p = to_plane(r.at("plane"));
  EXPECT_EQ(p(1, 0), -1.0);
  EXPECT_EQ(p(0, 1), 0.25);
  EXPECT_EQ(r.find("missing"), nullptr);
  EXPECT_THROW(r.at("missing"), std::runtime_error);
  EXPECT_FALSE(fs::exists(dir / "a.ckpt.tmp"));
}

TEST_F(CheckpointTest, DetectsCorruption) {
  save(sample(), dir / "a.ckpt");
  auto b = bytes(dir / "a.ckpt");
  b[b.size() / 2] ^= 0x10;
  write(dir / "bad.ckpt", b);
  EXPECT_THROW(load(dir / "bad.ckpt"), std::runtime_error);
}

TEST_F(CheckpointTest, DetectsTruncationAndBadMagic) {
  save(sample(), dir / "a.ckpt");
  auto b = bytes(dir / "a.ckpt");
  write(dir / "short.ckpt", std::vector<char>(b.begin(), b.begin() + 10));
  EXPECT_THROW(load(dir / "short.ckpt"), std::runtime_error);
  b[0] = 'X';
  write(dir / "magic.ckpt", b);
  EXPECT_THROW(load(dir / "magic.ckpt"), std::runtime_error);
  EXPECT_THROW(load(dir / "absent.ckpt"), std::runtime_error);
}

TEST_F(CheckpointTest, PrototypesAndNetRoundTrip) {
  PrototypeSet protos(2);
  for (int i = 0; i < 2; ++i) {
    protos[static_cast<std::size_t>(i)].id = 3 * i + 1;
    protos[static_cast<std::size_t>(i)].appearance = Plane::Constant(3, 4, 0.25 * (i + 1));
    protos[static_cast<std::size_t>(i)].mask_logits = Plane::Constant(3, 4, -2.0 + i);
  }
  VelocityNet net(3, {5}, 9);
  Eigen::VectorXd p = Eigen::VectorXd::LinSpaced(net.parameter_count(), -1.0, 1.0);
  net.set_parameters(p);
  net.scale.width = 80.0;
  Checkpoint c;
  put_prototypes(c, protos);
  put_net(c, net);
  save(c, dir / "m.ckpt");
  const Checkpoint r = load(dir / "m.ckpt");
  const PrototypeSet back = get_prototypes(r);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[1].id, 4);
  EXPECT_EQ(back[1].appearance(2, 3), 0.5);
  EXPECT_EQ(back[0].mask_logits(0, 0), -2.0);
  ASSERT_TRUE(has_net(r));
  const VelocityNet n2 = get_net(r);
  EXPECT_EQ(n2.hidden(), net.hidden());
  EXPECT_EQ(n2.history(), 3);
  EXPECT_EQ(n2.scale.width, 80.0);
  // Stored as float32.
  EXPECT_LT((n2.parameters() - p).cwiseAbs().maxCoeff(), 1e-7);
  EXPECT_EQ(r.parameter_count(), 2 * 2 * 12 + net.parameter_count());
}

TEST_F(CheckpointTest, ShapeMismatchIsRejected) {
  Checkpoint c;
  EXPECT_THROW(c.put("x", {2, 2}, {1, 2, 3}), std::invalid_argument);
}

}  // namespace
}  // namespace vpcd::checkpoint
