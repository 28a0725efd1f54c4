#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "embseg/commands.hpp"

namespace fs = std::filesystem;
using embseg::cli::run;

namespace {

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome call(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = run(args, out, err);
  return {code, out.str(), err.str()};
}

class CliPipeline : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    root_ = fs::temp_directory_path() / "embseg_test_cli";
    fs::remove_all(root_);
    fs::create_directories(root_);
    std::ofstream(root_ / "spec.json") << R"({"shape": [32, 32], "small_radius": [2, 3], "large_radius": [6, 10],
                                              "max_instances": 3})";
    std::ofstream(root_ / "train.json") << R"({"epochs": 1, "batch_size": 2, "model": {"width": 4}})";
  }
  static void TearDownTestSuite() { fs::remove_all(root_); }
  static std::string p(const std::string& name) { return (root_ / name).string(); }
  static fs::path root_;
};

fs::path CliPipeline::root_;

}  // namespace

TEST_F(CliPipeline, GenerateTrainInferEval) {
  auto r = call({"generate", "--spec", p("spec.json"), "--count", "5", "--out", p("data")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(root_ / "data" / "manifest.json"));

  r = call({"generate", "--spec", p("spec.json"), "--count", "5", "--out", p("data")});
  EXPECT_EQ(r.code, embseg::cli::kExitConfig);

  r = call({"train", "--config", p("train.json"), "--data", p("data"), "--out", p("run")});
  ASSERT_EQ(r.code, 0) << r.err;
  ASSERT_TRUE(fs::exists(root_ / "run" / "model.ckpt"));

  r = call({"infer", "--checkpoint", p("run/model.ckpt"), "--input", p("data/scenes"), "--out", p("pred"),
            "--dump-fields"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto stem = root_ / "pred" / "scene_000000";
  for (const char* suffix : {"_instances.png", "_instances.json", "_offsets.png", "_sigma.png", "_margin.png",
                             "_seed_0.png"}) {
    EXPECT_TRUE(fs::exists(stem.string() + suffix)) << suffix;
  }
  EXPECT_TRUE(fs::exists(root_ / "pred" / "infer.json"));

  for (bool gt : {false, true}) {
    std::vector<std::string> args{"eval", "--pred", p("pred"), "--truth", p("data"), "--report", p("report.json")};
    if (gt) args.push_back("--gt-sampling");
    r = call(args);
    ASSERT_EQ(r.code, 0) << r.err;
    std::ifstream in(root_ / "report.json");
    const auto j = nlohmann::json::parse(in);
    EXPECT_GE(j.at("ap").get<double>(), 0.0);
    EXPECT_LE(j.at("ap").get<double>(), 1.0);
  }
}

TEST_F(CliPipeline, ErrorsMapToExitCodes) {
  EXPECT_EQ(call({}).code, embseg::cli::kExitConfig);
  EXPECT_EQ(call({"generate", "--count", "3"}).code, embseg::cli::kExitConfig);
  EXPECT_EQ(call({"generate", "--count", "0", "--out", p("zero")}).code, embseg::cli::kExitConfig);
  EXPECT_EQ(call({"train", "--data", p("absent"), "--out", p("run2")}).code, embseg::cli::kExitData);
  EXPECT_EQ(call({"eval", "--pred", p("absent"), "--truth", p("absent")}).code, embseg::cli::kExitData);
  std::ofstream(root_ / "bad.json") << R"({"epochs": -1})";
  EXPECT_EQ(call({"train", "--config", p("bad.json"), "--data", p("absent"), "--out", p("run3")}).code,
            embseg::cli::kExitConfig);
  EXPECT_EQ(call({"--help"}).code, 0);
}
