#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "cli.hpp"
#include "test_support.hpp"

namespace fs = std::filesystem;
using namespace vtgrasp;

namespace {

struct CliRun {
  int code = -1;
  std::string out, err;
};

CliRun run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "vtgrasp");
  std::ostringstream out, err;
  CliRun r;
  r.code = cli::run(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("vtgrasp_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST(Cli, FilterOnIdenticalFramesIsBlack) {
  const auto dir = scratch("filter");
  std::mt19937_64 rng(51);
  const auto img = vt_test::random_rgb(rng, 64, 48);
  std::vector<std::string> args = {"--out", dir.string(), "filter"};
  for (int i = 0; i < 4; ++i) {
    const auto p = dir / ("f" + std::to_string(i) + ".ppm");
    pnm::save_ppm(p, img);
    args.push_back(p.string());
  }
  const auto r = run_cli(args);
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("brightness 0"), std::string::npos);
  const auto psi = pnm::load_pgm(dir / "psi.pgm");
  EXPECT_EQ(psi.width(), 64);
  EXPECT_EQ(vt_test::count_white(psi), 0u);
}

TEST(Cli, DetectSlipFindsTheMovedWindow) {
  const auto dir = scratch("detect");
  std::vector<std::string> args = {"--out", dir.string(), "detect-slip"};
  for (int i = 0; i < 8; ++i) {
    RgbImage img(64, 64, Rgb8{40, 40, 40});
    const int x0 = i == 7 ? 30 : 10;
    for (int y = 20; y < 44; ++y)
      for (int x = x0; x < x0 + 20; ++x) img(x, y) = {220, 220, 220};
    const auto p = dir / ("f" + std::to_string(i) + ".ppm");
    pnm::save_ppm(p, img);
    args.push_back(p.string());
  }
  const auto r = run_cli(args);
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("slip_events 1"), std::string::npos) << r.out;
  EXPECT_TRUE(fs::exists(dir / "slip.csv"));
}

TEST(Cli, DetectSlipCnnWithoutScoresIsAUsageError) {
  const auto dir = scratch("cnn");
  RgbImage img(8, 8);
  std::vector<std::string> args = {"detect-slip", "--method", "cnn"};
  for (int i = 0; i < 4; ++i) {
    const auto p = dir / ("f" + std::to_string(i) + ".ppm");
    pnm::save_ppm(p, img);
    args.push_back(p.string());
  }
  EXPECT_NE(run_cli(args).code, 0);
}

TEST(Cli, EvalApFixture) {
  const auto r = run_cli({"eval-metrics", "ap", "--detections", vt_test::data_path("metrics/ap_fixture_dets.csv"),
                          "--ground-truth", vt_test::data_path("metrics/ap_fixture_gt.csv")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("AP50,overall,0.50,0.8333333333"), std::string::npos) << r.out;
}

TEST(Cli, EvalCsrFromFieldEpisodes) {
  const auto r = run_cli({"eval-metrics", "csr", "--input", vt_test::data_path("metrics/field_episodes.csv")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("cardboard,14,15,0.9333"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("stone_soil,15,20,0.7500"), std::string::npos) << r.out;
}

TEST(Cli, GraspSimPrintsTraceAndOutcome) {
  const auto r = run_cli({"grasp-sim", "--scores-a", "0,0,1,1,1", "--scores-b", "1,1,1,1,1", "--count", "3"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("iteration,label_A,label_B,fused,gripper_step,event"), std::string::npos);
  EXPECT_NE(r.out.find("outcome grasped iterations 5 steps 2 final_step 2"), std::string::npos) << r.out;
}

TEST(Cli, GraspSimProviderFailureIsADataError) {
  EXPECT_EQ(run_cli({"grasp-sim", "--scores-a", "0,1.5", "--scores-b", "1"}).code, 2);
}

TEST(Cli, RunEpisodeIsReproducible) {
  const auto a = scratch("ep_a"), b = scratch("ep_b");
  const auto cfg = vt_test::data_path("scenarios/nominal_cardboard.json");
  const auto ra = run_cli({"--seed", "7", "--config", cfg, "--out", a.string(), "run-episode"});
  const auto rb = run_cli({"--seed", "7", "--config", cfg, "--out", b.string(), "run-episode"});
  ASSERT_EQ(ra.code, 0) << ra.err;
  ASSERT_EQ(rb.code, 0) << rb.err;
  std::size_t files = 0;
  for (const auto& e : fs::directory_iterator(a)) {
    ++files;
    EXPECT_EQ(slurp(e.path()), slurp(b / e.path().filename())) << e.path().filename();
  }
  EXPECT_GE(files, 4u);
  EXPECT_NE(slurp(a / "summary.csv").find("success,1"), std::string::npos);
}

TEST(Cli, ExitCodes) {
  EXPECT_EQ(run_cli({"--bogus"}).code, 1);
  EXPECT_EQ(run_cli({}).code, 1);
  EXPECT_EQ(run_cli({"--help"}).code, 0);
  EXPECT_EQ(run_cli({"filter", "/nonexistent/a.ppm", "/nonexistent/b.ppm", "/nonexistent/c.ppm", "/nonexistent/d.ppm"}).code, 2);
  EXPECT_EQ(run_cli({"--config", "/nonexistent/s.json", "run-episode"}).code, 2);
  EXPECT_EQ(run_cli({"experiment", "nope"}).code, 1);
}
