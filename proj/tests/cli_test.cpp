// Copyright 2026 The calibfw Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <sys/wait.h>

#include <algorithm>
#include <cstdlib>
#include <memory>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "calibfw/dataset.hpp"
#include "calibfw/image.hpp"
#include "calibfw/nn/checkpoint.hpp"
#include "test_util.hpp"

namespace calibfw {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;
using testing::TempDir;

struct RunResult {
  int code = -1;
  std::string out;
  std::string err;
};

std::string quote(const std::string& s) {
  std::string q = "'";
  for (char c : s) q += c == '\'' ? std::string("'\\''") : std::string(1, c);
  return q + "'";
}

RunResult run_cli(const std::vector<std::string>& args, const std::string& env = {}) {
  static int counter = 0;
  const fs::path dir = fs::temp_directory_path();
  const fs::path out = dir / ("calibfw-cli-out-" + std::to_string(::getpid()) + "-" + std::to_string(counter));
  const fs::path err = dir / ("calibfw-cli-err-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
  std::string cmd = env.empty() ? "" : env + " ";
  cmd += quote(CALIBFW_CLI_PATH);
  for (const auto& a : args) cmd += " " + quote(a);
  cmd += " >" + quote(out.string()) + " 2>" + quote(err.string());
  const int status = std::system(cmd.c_str());
  RunResult r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = testing::read_file(out);
  r.err = testing::read_file(err);
  fs::remove(out);
  fs::remove(err);
  return r;
}

std::size_t lines(const std::string& s) { return std::size_t(std::count(s.begin(), s.end(), '\n')); }

json read_json(const fs::path& p) { return json::parse(testing::read_file(p)); }

std::vector<json> read_jsonl(const fs::path& p) {
  std::vector<json> out;
  std::istringstream is(testing::read_file(p));
  for (std::string line; std::getline(is, line);)
    if (!line.empty()) out.push_back(json::parse(line));
  return out;
}

// Panoramas, two small datasets and a base checkpoint shared by the suite.
class CliTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    root_ = std::make_unique<TempDir>("calibfw-cli");
    const auto r = [](std::vector<std::string> a) {
      const auto res = run_cli(a);
      if (res.code != 0) throw std::runtime_error("setup command failed: " + res.err);
    };
    r({"gen-panos", "--count", "4", "--style", "indoor-like", "--height", "64", "--seed", "1",
       "--out", path("panos_in")});
    r({"gen-panos", "--count", "4", "--style", "outdoor-like", "--height", "64", "--seed", "2",
       "--out", path("panos_out")});
    for (const auto& [src, dst, seed] : {std::tuple{"panos_in", "data_in", "3"},
                                        std::tuple{"panos_out", "data_out", "4"}})
      r({"gen-dataset", "--panos", path(src), "--out", path(dst), "--count", "40", "--test-count",
         "8", "--size", "16", "--seed", seed, "--deterministic"});
    r({"train", "--data", path("data_in"), "--arch", "calibnet-micro", "--epochs", "2", "--seed",
       "5", "--deterministic", "--out", path("base.ckpt")});
    r({"train", "--data", path("data_in"), "--arch", "calibnet-micro", "--head", "cosine",
       "--epochs", "1", "--seed", "5", "--deterministic", "--out", path("base_cos.ckpt")});
  }
  static void TearDownTestSuite() { root_.reset(); }

  static std::string path(const std::string& name) { return (root_->path() / name).string(); }

  static std::unique_ptr<TempDir> root_;
};

std::unique_ptr<TempDir> CliTest::root_;

TEST_F(CliTest, HelpAndUnknownCommand) {
  EXPECT_EQ(run_cli({"--help"}).code, 0);
  const auto r = run_cli({"frobnicate"});
  EXPECT_EQ(r.code, 2);
  EXPECT_EQ(lines(r.err), 1u);
}

TEST_F(CliTest, GenPanosWritesPngs) {
  TempDir a, b;
  ASSERT_EQ(run_cli({"gen-panos", "--count", "4", "--height", "32", "--seed", "8", "--out", a.path()}).code, 0);
  ASSERT_EQ(run_cli({"gen-panos", "--count", "4", "--height", "32", "--seed", "8", "--out", b.path()}).code, 0);
  for (int i = 0; i < 4; ++i) {
    const std::string name = "pano_000" + std::to_string(i) + ".png";
    const RgbImage img = read_png(a / name);
    EXPECT_EQ(img.width, 2 * img.height);
    EXPECT_EQ(testing::read_file(a / name), testing::read_file(b / name));
  }
  EXPECT_EQ(read_json(a / "index.json").size(), 4u);
  EXPECT_EQ(read_json(a / "run_config.json").at("count"), 4);
}

TEST_F(CliTest, GenPanosZeroCountIsUsageError) {
  TempDir a;
  const auto r = run_cli({"gen-panos", "--count", "0", "--out", a.path()});
  EXPECT_EQ(r.code, 2);
  EXPECT_EQ(lines(r.err), 1u);
  EXPECT_NE(r.err.find("usage error"), std::string::npos);
}

TEST_F(CliTest, GenDatasetSplitAndRerun) {
  TempDir a, b;
  const std::vector<std::string> args{"gen-dataset", "--panos", path("panos_in"), "--count", "100",
                                      "--size", "16", "--seed", "6", "--deterministic"};
  auto with_out = [&](const fs::path& out, const std::string& workers) {
    auto v = args;
    v.insert(v.end(), {"--out", out.string(), "--workers", workers});
    return v;
  };
  ASSERT_EQ(run_cli(with_out(a.path(), "1")).code, 0);
  ASSERT_EQ(run_cli(with_out(b.path(), "2")).code, 0);
  const auto m = read_manifest(a / kManifestFileName);
  EXPECT_EQ(m.count(Split::train), 80u);
  EXPECT_EQ(m.count(Split::val), 20u);
  EXPECT_EQ(testing::read_file(a / kManifestFileName), testing::read_file(b / kManifestFileName));
}

TEST_F(CliTest, GenDatasetMissingPanoramas) {
  TempDir a;
  const auto r = run_cli({"gen-dataset", "--panos", (a / "nope").string(), "--out", (a / "d").string()});
  EXPECT_EQ(r.code, 1);
  EXPECT_EQ(lines(r.err), 1u);
}

TEST_F(CliTest, DataDirEnvironmentResolvesRelativePaths) {
  TempDir a;
  const auto r = run_cli({"gen-panos", "--count", "1", "--height", "32", "--out", "rel"},
                         "CALIB_DATA_DIR=" + quote(a.path().string()));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(a / "rel" / "pano_0000.png"));
}

TEST_F(CliTest, TrainOutputsAndDefaults) {
  const auto cfg = read_json(path("base.config.json"));
  EXPECT_EQ(cfg.at("batch"), 16);
  EXPECT_EQ(cfg.at("lr"), 0.003);
  EXPECT_EQ(cfg.at("command"), "train");
  EXPECT_FALSE(cfg.contains("created"));
  const auto history = read_jsonl(path("base.history.jsonl"));
  ASSERT_EQ(history.size(), 2u);
  for (const char* key : {"epoch", "lr", "train_loss", "loss_terms", "val_muMSE"})
    EXPECT_TRUE(history[0].contains(key)) << key;
  EXPECT_NO_THROW(nn::load_checkpoint(path("base.ckpt")));
}

TEST_F(CliTest, TrainInvalidArchListsValidNames) {
  TempDir a;
  const auto r = run_cli({"train", "--data", path("data_in"), "--arch", "resnet50", "--out",
                          (a / "x.ckpt").string()});
  EXPECT_NE(r.code, 0);
  EXPECT_EQ(lines(r.err), 1u);
  EXPECT_NE(r.err.find("calibnet-tiny"), std::string::npos);
}

TEST_F(CliTest, TrainLearningRateDropsOnPlateau) {
  // A vanishing rate leaves the validation error flat.
  TempDir a;
  ASSERT_EQ(run_cli({"train", "--data", path("data_in"), "--arch", "calibnet-micro", "--epochs",
                     "4", "--lr", "1e-12", "--deterministic", "--out", (a / "m.ckpt").string()})
                .code,
            0);
  const auto h = read_jsonl(a / "m.history.jsonl");
  ASSERT_EQ(h.size(), 4u);
  EXPECT_EQ(h[0].at("val_muMSE"), h[2].at("val_muMSE"));
  EXPECT_DOUBLE_EQ(h[2].at("lr").get<double>(), 1e-12);
  EXPECT_DOUBLE_EQ(h[3].at("lr").get<double>(), 1e-13);
}

TEST_F(CliTest, ConfigFilePrecedence) {
  TempDir a;
  testing::write_file(a / "cfg.json", json{{"count", 3}, {"height", 32}, {"seed", 4}}.dump());
  ASSERT_EQ(run_cli({"gen-panos", "--config", (a / "cfg.json").string(), "--count", "2", "--out",
                     (a / "p").string()})
                .code,
            0);
  const auto resolved = read_json(a / "p" / "run_config.json");
  EXPECT_EQ(resolved.at("count"), 2);   // flag wins
  EXPECT_EQ(resolved.at("height"), 32);  // file beats default
  EXPECT_EQ(resolved.at("seed"), 4);
  EXPECT_EQ(read_png(a / "p" / "pano_0001.png").height, 32);

  testing::write_file(a / "bad.json", json{{"colour", 1}}.dump());
  const auto r = run_cli({"gen-panos", "--config", (a / "bad.json").string(), "--count", "1",
                          "--out", (a / "q").string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("colour"), std::string::npos);
}

TEST_F(CliTest, LwfWithZeroLambdaMatchesFinetune) {
  TempDir a;
  const std::vector<std::string> common{"train-incremental", "--base", path("base.ckpt"),
                                        "--old-data", path("data_in"), "--new-data",
                                        path("data_out"), "--epochs", "1", "--seed", "3",
                                        "--deterministic"};
  auto args = common;
  args.insert(args.end(), {"--strategy", "finetune", "--out", (a / "ft.ckpt").string()});
  ASSERT_EQ(run_cli(args).code, 0);
  args = common;
  args.insert(args.end(), {"--strategy", "lwf", "--lambda", "0", "--out", (a / "lwf.ckpt").string()});
  const auto r = run_cli(args);
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(testing::read_file(a / "ft.ckpt"), testing::read_file(a / "lwf.ckpt"));
  EXPECT_EQ(read_json(a / "lwf.config.json").at("equivalent_strategy"), "finetune");
  const auto h = read_jsonl(a / "lwf.history.jsonl");
  ASSERT_EQ(h.size(), 1u);
  EXPECT_TRUE(h[0].contains("val_muMSE_old"));
  EXPECT_TRUE(h[0].contains("val_muMSE_new"));
}

TEST_F(CliTest, LucirNeedsCosineHead) {
  TempDir a;
  const auto r = run_cli({"train-incremental", "--base", path("base.ckpt"), "--new-data",
                          path("data_out"), "--strategy", "lucir", "--out", (a / "x.ckpt").string()});
  EXPECT_NE(r.code, 0);
  EXPECT_EQ(lines(r.err), 1u);
  EXPECT_NE(r.err.find("cosine-head"), std::string::npos);
  const auto ok = run_cli({"train-incremental", "--base", path("base_cos.ckpt"), "--old-data",
                           path("data_in"), "--new-data", path("data_out"), "--strategy", "lucir",
                           "--exemplar-pct", "20", "--epochs", "1", "--out",
                           (a / "y.ckpt").string()});
  EXPECT_EQ(ok.code, 0) << ok.err;
}

TEST_F(CliTest, BiCCheckpointCarriesCorrection) {
  TempDir a;
  const auto r = run_cli({"train-incremental", "--base", path("base.ckpt"), "--old-data",
                          path("data_in"), "--new-data", path("data_out"), "--strategy", "bic",
                          "--exemplar-pct", "20", "--bic-val-fraction", "0.25", "--epochs", "1",
                          "--out", (a / "bic.ckpt").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto ck = nn::load_checkpoint(a / "bic.ckpt");
  ASSERT_TRUE(ck.extra.contains("bic"));
  EXPECT_EQ(ck.extra["bic"].at("alpha").size(), 3u);
  EXPECT_EQ(ck.extra["bic"].at("beta").size(), 3u);

  const auto e = run_cli({"eval", "--model", (a / "bic.ckpt").string(), "--data", path("data_in"),
                          "--split", "val", "--out-dir", a.path().string(), "--name", "rep"});
  ASSERT_EQ(e.code, 0) << e.err;
  const std::string csv = testing::read_file(a / "rep.csv");
  EXPECT_EQ(lines(csv), 3u);
  EXPECT_NE(csv.find("bic+bic"), std::string::npos);
}

TEST_F(CliTest, EvalCrossGrid) {
  TempDir a;
  const auto r = run_cli({"eval", "--model", path("base.ckpt"), "--model", path("base_cos.ckpt"),
                          "--data", path("data_in"), "--data", path("data_out"), "--split", "test",
                          "--deterministic", "--out-dir", a.path().string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const fs::path csv = a / "base+base_cos_data_in-test+data_out-test.csv";
  ASSERT_TRUE(fs::exists(csv));
  EXPECT_EQ(lines(testing::read_file(csv)), 5u);
  EXPECT_TRUE(fs::exists(a / "base+base_cos_data_in-test+data_out-test.svg"));
}

TEST_F(CliTest, EvalEmptyManifestFails) {
  TempDir a;
  fs::create_directories(a / "empty");
  DatasetManifest m;
  write_manifest(m, a / "empty" / kManifestFileName);
  const auto r = run_cli({"eval", "--model", path("base.ckpt"), "--data", (a / "empty").string(),
                          "--out-dir", a.path().string()});
  EXPECT_EQ(r.code, 1);
  EXPECT_EQ(lines(r.err), 1u);
}

TEST_F(CliTest, SweepWritesCsvAndSvg) {
  TempDir a;
  const auto r = run_cli({"sweep-exemplars", "--base", path("base.ckpt"), "--old-data",
                          path("data_in"), "--new-data", path("data_out"), "--pcts", "0,50",
                          "--epochs", "1", "--deterministic", "--out-dir", a.path().string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(testing::read_file(a / "sweep_icarl.csv").substr(0, 35),
            "exemplar_pct,mu_mse_old,mu_mse_new\n");
  EXPECT_EQ(lines(testing::read_file(a / "sweep_icarl.csv")), 3u);
  EXPECT_TRUE(fs::exists(a / "sweep_icarl.svg"));
}

TEST_F(CliTest, DrawHorizonWritesOverlay) {
  TempDir a;
  const auto r = run_cli({"draw-horizon", "--model", path("base.ckpt"), "--data", path("data_in"),
                          "--split", "val", "--index", "2", "--scale", "3", "--out",
                          (a / "o.png").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const RgbImage img = read_png(a / "o.png");
  EXPECT_EQ(img.width, 48);
  EXPECT_EQ(img.height, 48);

  const fs::path crop = root_->path() / "data_in" / "images" / "000000.png";
  const auto g = run_cli({"draw-horizon", "--model", path("base.ckpt"), "--image", crop.string(),
                          "--truth", "200,0,0", "--out", (a / "p.png").string()});
  ASSERT_EQ(g.code, 0) << g.err;
  EXPECT_TRUE(fs::exists(a / "p.png"));
}

}  // namespace
}  // namespace calibfw
