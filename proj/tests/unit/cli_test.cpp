#include "support.hpp"

#include "vpcd/checkpoint.hpp"
#include "vpcd/cli/commands.hpp"
#include "vpcd/cli/plot.hpp"
#include "vpcd/image_io.hpp"

#include <gtest/gtest.h>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace vpcd::cli {
namespace {

namespace fs = std::filesystem;

TEST(Config, DefaultsFromEmptyText) {
  const RunConfig c = parse_config("");
  EXPECT_EQ(c.variant, Variant::Full);
  EXPECT_EQ(c.data.preset, "dynamics_bouncing");
  EXPECT_EQ(c.eval.seeds, 3);
  EXPECT_EQ(c.eval.horizon, 27);
  EXPECT_EQ(c.motion.history, c.tracker.history);
}

TEST(Config, RejectsUnknownKeysAndBadValues) {
  EXPECT_THROW(parse_config("[run]\nsed = 3\n"), ValidationError);
  EXPECT_THROW(parse_config("[extra]\nx = 1\n"), ValidationError);
  EXPECT_THROW(parse_config("[decomp]\nsteps = many\n"), ValidationError);
  EXPECT_THROW(parse_config("[eval]\nnetless = maybe\n"), ValidationError);
  EXPECT_THROW(parse_config("[data]\npreset = cityscapes\n"), ValidationError);
  EXPECT_THROW(parse_config("[run]\nvariant = half\n"), ValidationError);
  EXPECT_THROW(parse_config("[data]\nmin_objects = 4\nmax_objects = 2\n"), ValidationError);
  EXPECT_THROW(parse_config("[eval]\nhorizon = 40\n"), ValidationError);
  EXPECT_THROW(parse_config("[motion]\npredict_frames = 0\n"), ValidationError);
}

TEST(Config, OverridesAndDerivedSeeds) {
  Overrides o;
  o.seed = 42;
  o.variant = "frame-independent";
  o.horizon = 5;
  o.netless = true;
  const RunConfig c = parse_config("[run]\nseed = 1\nvariant = full\n[eval]\nhorizon = 9\n", o);
  EXPECT_EQ(c.seed, 42u);
  EXPECT_EQ(c.data.spec.seed, 42u);
  EXPECT_EQ(c.decomp.seed, 42u);
  EXPECT_EQ(c.motion.seed, 42u);
  EXPECT_EQ(c.variant, Variant::FrameIndependent);
  EXPECT_FALSE(c.parse.align);
  EXPECT_EQ(c.eval.horizon, 5);
  EXPECT_TRUE(c.eval.netless);
}

TEST(Config, ExplicitParseKeysOverrideVariant) {
  const RunConfig c = parse_config("[run]\nvariant = two-stage\n[parse]\nuse_external_templates = true\n");
  EXPECT_TRUE(c.parse.use_external_templates);
  EXPECT_EQ(c.variant, Variant::TwoStage);
}

TEST(Config, IniSnapshotRoundTrips) {
  const RunConfig a = parse_config("[run]\nseed = 7\n[motion]\nhidden = 32,16\n[data]\npreset = sprites_mot\n");
  const RunConfig b = parse_config(a.to_ini());
  EXPECT_EQ(a.to_ini(), b.to_ini());
  EXPECT_EQ(b.motion.hidden, (std::vector<int>{32, 16}));
}

TEST(Config, BundledConfigsLoad) {
  int n = 0;
  for (const auto& e : fs::directory_iterator(fs::path(VPCD_SOURCE_DIR) / "configs")) {
    if (e.path().extension() != ".ini") continue;
    EXPECT_NO_THROW(load_config(e.path())) << e.path();
    ++n;
  }
  EXPECT_GE(n, 9);
}

TEST(Config, DatasetDirPrecedence) {
  RunConfig c = parse_config("[run]\nout = /tmp/r\nseed = 3\n");
  ::unsetenv(kDataRootEnv);
  EXPECT_EQ(dataset_dir(c), fs::path("/tmp/r/data"));
  ::setenv(kDataRootEnv, "/data", 1);
  EXPECT_EQ(dataset_dir(c), fs::path("/data/dynamics_bouncing-seed3"));
  c.data.path = "/elsewhere";
  EXPECT_EQ(dataset_dir(c), fs::path("/elsewhere"));
  ::unsetenv(kDataRootEnv);
}

TEST(Plot, PrototypeSheetHasOneTilePerPrototype) {
  PrototypeSet protos(3);
  for (auto& p : protos) {
    p.appearance = Plane::Ones(5, 5);
    p.mask_logits = Plane::Constant(5, 5, 10.0);
  }
  const RgbImage sheet = plot::prototype_sheet(protos, 4);
  EXPECT_EQ(sheet.height(), 20);
  EXPECT_EQ(sheet.width(), 3 * 20 + 2 * 2);
}

class CliRun : public ::testing::Test {
 protected:
  void SetUp() override {
    dir = fs::temp_directory_path() /
          ("vpcd_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir);
    fs::create_directories(dir);
    config = dir / "tiny.ini";
    std::ofstream(config) << "[run]\nout = " << (dir / "run").string()
                          << "\n[data]\npreset = dynamics_bouncing\ntrain_count = 4\ntest_count = 2\n"
                          << "[decomp]\nsteps = 8\nprototypes = 8\n[motion]\nsteps = 20\nbatch_size = 8\n"
                          << "[eval]\nstrips = 1\n";
    ::unsetenv(kDataRootEnv);
  }
  void TearDown() override { fs::remove_all(dir); }

  int vpcd(std::vector<std::string> args) {
    args.insert(args.begin(), "vpcd");
    std::vector<char*> argv;
    for (auto& a : args) argv.push_back(a.data());
    out.str("");
    err.str("");
    return run(static_cast<int>(argv.size()), argv.data(), out, err);
  }
  int with_config(std::vector<std::string> args) {
    args.push_back("--config");
    args.push_back(config.string());
    return vpcd(std::move(args));
  }

  fs::path dir, config;
  std::ostringstream out, err;
};

TEST_F(CliRun, UsageErrorsExitWithOne) {
  EXPECT_EQ(vpcd({}), kExitValidation);
  EXPECT_EQ(vpcd({"gen"}), kExitValidation);
  EXPECT_EQ(vpcd({"gen", "--config", (dir / "absent.ini").string()}), kExitValidation);
  std::ofstream(dir / "bad.ini") << "[data]\nmin_objects = 9\n";
  EXPECT_EQ(vpcd({"gen", "--config", (dir / "bad.ini").string()}), kExitValidation);
  EXPECT_NE(err.str().find("error"), std::string::npos);
  EXPECT_EQ(with_config({"train", "everything"}), kExitValidation);
}

TEST_F(CliRun, StageOrderAndMissingInputs) {
  EXPECT_EQ(with_config({"train", "decomp"}), kExitValidation);  // no dataset yet
  ASSERT_EQ(with_config({"gen"}), kExitOk);
  EXPECT_EQ(with_config({"train", "motion"}), kExitValidation);
  EXPECT_NE(err.str().find("decomp"), std::string::npos);
  EXPECT_EQ(with_config({"track"}), kExitValidation);
  EXPECT_EQ(with_config({"predict"}), kExitValidation);
  EXPECT_EQ(with_config({"train", "decomp", "--resume"}), kExitValidation);
}

TEST_F(CliRun, GenIsReproducible) {
  ASSERT_EQ(with_config({"gen", "--out", (dir / "a").string()}), kExitOk);
  ASSERT_EQ(with_config({"gen", "--out", (dir / "b").string(), "--jobs", "2"}), kExitOk);
  for (const auto* split : {"train", "test"}) {
    const auto a = datagen::list_sequences(dir / "a" / "data" / split);
    ASSERT_EQ(a.size(), std::string(split) == "train" ? 4u : 2u);
    for (const auto& p : a)
      EXPECT_EQ(io::file_checksum(p / "ground_truth.json"),
                io::file_checksum(dir / "b" / "data" / split / p.filename() / "ground_truth.json"));
  }
  EXPECT_TRUE(fs::exists(dir / "a" / "manifest_gen.json"));
}

TEST_F(CliRun, GroundTruthPassthroughScoresPerfectly) {
  ASSERT_EQ(with_config({"gen"}), kExitOk);
  ASSERT_EQ(with_config({"track", "--gt-passthrough"}), kExitOk) << err.str();
  std::ifstream f(dir / "run" / "track" / "report.json");
  const auto report = nlohmann::json::parse(f);
  EXPECT_DOUBLE_EQ(report["aggregate"]["mota"].get<double>(), 1.0);
  EXPECT_EQ(report["aggregate"]["id_switches"].get<int>(), 0);
}

TEST_F(CliRun, FullPipelineProducesArtifacts) {
  ASSERT_EQ(with_config({"gen"}), kExitOk);
  ASSERT_EQ(with_config({"train", "decomp"}), kExitOk) << err.str();
  const fs::path run = dir / "run";
  EXPECT_EQ(checkpoint::load(run / "decomp.ckpt").meta.at("step"), "8");

  // Resume continues the step counter.
  {
    std::ifstream in(config);
    std::stringstream ss;
    ss << in.rdbuf();
    std::string text = ss.str();
    text.replace(text.find("steps = 8"), 9, "steps = 12");
    std::ofstream(config) << text;
  }
  ASSERT_EQ(with_config({"train", "decomp", "--resume"}), kExitOk) << err.str();
  EXPECT_NE(out.str().find("resuming at step 8"), std::string::npos);
  EXPECT_EQ(checkpoint::load(run / "decomp.ckpt").meta.at("step"), "12");
  {
    std::ifstream loss(run / "decomp_loss.csv");
    std::string line;
    int rows = 0;
    while (std::getline(loss, line)) ++rows;
    EXPECT_EQ(rows, 13);  // header + 12 steps
  }

  // A dozen steps cannot learn parseable prototypes; swap in the true shapes so
  // the rollout stages have something to work with.
  {
    auto ck = checkpoint::load(run / "decomp.ckpt");
    ck.tensors.clear();
    checkpoint::put_prototypes(ck, test::oracle_prototypes(datagen::dynamics_bouncing_spec()));
    checkpoint::save(ck, run / "decomp.ckpt");
  }
  const std::string before = io::file_checksum(run / "decomp.ckpt");
  ASSERT_EQ(with_config({"train", "motion"}), kExitOk) << err.str();
  EXPECT_EQ(io::file_checksum(run / "decomp.ckpt"), before);
  EXPECT_LT(checkpoint::load(run / "motion.ckpt").parameter_count(), 25000);

  ASSERT_EQ(with_config({"track"}), kExitOk) << err.str();
  std::ifstream track(run / "track" / "seq_1000000.txt");
  std::string header;
  std::getline(track, header);
  EXPECT_EQ(header, "# frame track_id x y prototype_id r g b");

  ASSERT_EQ(with_config({"predict", "--horizon", "4"}), kExitOk) << err.str();
  std::ifstream csv(run / "predict" / "metrics_per_step.csv");
  std::string line;
  std::getline(csv, line);
  EXPECT_EQ(line, "step,ssim,mse,psnr,ari,position_mse,position_std,unmatched");
  int rows = 0;
  while (std::getline(csv, line)) ++rows;
  EXPECT_EQ(rows, 4);
  ASSERT_TRUE(fs::exists(run / "predict" / "strips" / "seq_1000000.png")) << out.str();
  EXPECT_EQ(io::read_png(run / "predict" / "strips" / "seq_1000000.png").width(), 5 * 64 + 4 * 2);

  ASSERT_EQ(with_config({"predict", "--horizon", "0", "--netless"}), kExitOk) << err.str();

  for (const auto* m : {"gen", "train_decomp", "train_motion", "track", "predict"}) {
    std::ifstream f(run / (std::string("manifest_") + m + ".json"));
    ASSERT_TRUE(f) << m;
    const auto j = nlohmann::json::parse(f);
    EXPECT_EQ(j["seed"].get<int>(), 0);
    EXPECT_FALSE(j["config"].get<std::string>().empty());
    EXPECT_FALSE(j["version"].get<std::string>().empty());
  }

  ASSERT_EQ(vpcd({"plot", run.string()}), kExitOk);
  EXPECT_TRUE(fs::exists(run / "plots" / "decomp_loss_loss.png"));
  EXPECT_TRUE(fs::exists(run / "plots" / "motion_prototypes.png"));
}

TEST_F(CliRun, PlotReportsEmptyDirectory) {
  fs::create_directories(dir / "empty");
  EXPECT_EQ(vpcd({"plot", (dir / "empty").string()}), kExitOk);
  EXPECT_NE(out.str().find("nothing to plot"), std::string::npos);
  EXPECT_EQ(vpcd({"plot", (dir / "absent").string()}), kExitValidation);
}

}  // namespace
}  // namespace vpcd::cli
