#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "cli/cli.hpp"
#include "fixtures.hpp"
#include "vqg/corpus.hpp"

namespace fs = std::filesystem;

namespace vqg::cli {
namespace {

struct Run {
  int status;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int status = run_cli(std::move(args), out, err);
  return {status, out.str(), err.str()};
}

class Cli : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = fixture::scratch_dir("cli");
    world_ = fixture::make_world(dir_);
  }
  static void TearDownTestSuite() { fs::remove_all(dir_); }

  std::string p(const std::string& name) const { return (dir_ / name).string(); }

  static fs::path dir_;
  static fixture::World world_;
};

fs::path Cli::dir_;
fixture::World Cli::world_;

TEST_F(Cli, VersionAndHelp) {
  EXPECT_EQ(run({"--version"}).status, kExitOk);
  EXPECT_EQ(run({"--help"}).status, kExitOk);
}

TEST_F(Cli, UsageErrors) {
  EXPECT_EQ(run({}).status, kExitUsage);
  EXPECT_EQ(run({"no-such-command"}).status, kExitUsage);
  EXPECT_EQ(run({"score", "--dataset", p("eval.tsv")}).status, kExitUsage);
  EXPECT_EQ(run({"split", "--dataset", p("train.tsv"), "--folds", "1", "-o", p("f.tsv")}).status,
            kExitUsage);
  EXPECT_EQ(run({"prompt", "--dataset", p("eval.tsv"), "--template", "t9", "-o", p("x.tsv")})
                .status,
            kExitUsage);
}

TEST_F(Cli, ScoreIdentity) {
  std::vector<Prediction> preds;
  for (const auto& s : world_.eval) preds.push_back({s.sample_id, *s.gt_box, "gt"});
  {
    std::ofstream out(p("gt_predictions.tsv"));
    write_predictions(preds, out);
  }
  const auto r = run({"score", "--dataset", p("eval.tsv"), "--predictions",
                      p("gt_predictions.tsv")});
  EXPECT_EQ(r.status, kExitOk) << r.err;
  EXPECT_EQ(r.out.substr(0, r.out.find('\n')), "score: 100.0");
}

TEST_F(Cli, ForgeWithZeroTargetWritesEmptyDataset) {
  ASSERT_EQ(run({"mock-answers", "--dataset", p("train.tsv"), "--vocab", "clock,vase",
                 "-o", p("pa.tsv")})
                .status,
            kExitOk);
  auto r = run({"build-table", "--dataset", p("train.tsv"), "--pseudo-answers", p("pa.tsv"),
                "-o", p("table.tsv")});
  ASSERT_EQ(r.status, kExitOk) << r.err;
  r = run({"forge", "--table", p("table.tsv"), "--pool", p("pool.tsv"), "--detections",
           p("pool_detections.tsv"), "--n-target", "0", "-o", p("syn0.tsv")});
  EXPECT_EQ(r.status, kExitOk) << r.err;
  std::ifstream in(p("syn0.tsv"));
  EXPECT_TRUE(parse_dataset(in).empty());
  EXPECT_TRUE(fs::exists(p("syn0.tsv.manifest.json")));
}

TEST_F(Cli, PostprocessMissingIdsIsDataError) {
  std::vector<Prediction> preds;
  for (std::size_t i = 2; i < world_.eval.size(); ++i) {
    preds.push_back({world_.eval[i].sample_id, *world_.eval[i].gt_box, "m"});
  }
  {
    std::ofstream out(p("partial.tsv"));
    write_predictions(preds, out);
  }
  const auto r = run({"postprocess", "--dataset", p("eval.tsv"), "--fold", p("partial.tsv"),
                      "-o", p("post.tsv")});
  EXPECT_EQ(r.status, kExitDataError);
  EXPECT_NE(r.err.find("e0"), std::string::npos) << r.err;
  EXPECT_NE(r.err.find("e1"), std::string::npos) << r.err;
}

TEST_F(Cli, SeedFlagReachesEverySubcommand) {
  ASSERT_EQ(run({"split", "--dataset", p("train.tsv"), "--folds", "3", "--seed", "1", "-o",
                 p("s1.tsv")})
                .status,
            kExitOk);
  ASSERT_EQ(run({"split", "--dataset", p("train.tsv"), "--folds", "3", "--seed", "2", "-o",
                 p("s2.tsv")})
                .status,
            kExitOk);
  EXPECT_NE(fixture::read_file(p("s1.tsv")), fixture::read_file(p("s2.tsv")));
}

TEST_F(Cli, RefusesToOverwriteInput) {
  const auto r = run({"prompt", "--dataset", p("eval.tsv"), "-o", p("eval.tsv")});
  EXPECT_EQ(r.status, kExitUsage);
}

TEST_F(Cli, ReportRows) {
  const auto r = run({"report", "--entry", "Baseline=71.0", "--entry", "Test Private=76.342"});
  EXPECT_EQ(r.status, kExitOk);
  EXPECT_EQ(r.out, "Baseline     71.0\nTest Private 76.342\n");
  EXPECT_EQ(run({"report"}).status, kExitUsage);
}

TEST_F(Cli, PipelineRefusesNonEmptyRunDir) {
  const auto run_dir = dir_ / "busy";
  fs::create_directories(run_dir);
  std::ofstream(run_dir / "keep.txt") << "x";
  const auto r = run({"pipeline", "--config", p("config.json"), "--run-dir", run_dir.string()});
  EXPECT_EQ(r.status, kExitUsage);
}

TEST_F(Cli, InferNeedsModel) {
  EXPECT_EQ(run({"infer", "--dataset", p("eval.tsv"), "-o", p("i.tsv")}).status, kExitUsage);
}

}  // namespace
}  // namespace vqg::cli
