#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "vqg/error.hpp"
#include "vqg/model_adapter.hpp"

namespace fs = std::filesystem;

namespace vqg {
namespace {

class WorkDir : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           (std::string("vqg-adapter-") +
            ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  fs::path dir_;
};

std::vector<GroundingRequest> requests() {
  // The prompt field carries the box so a text-only stub can answer.
  return {{"a", "img/a.jpg", "1 2 30 40"},
          {"b", "img/b.jpg", "5 5 9 9"},
          {"c", "img/c.jpg", "0 0 1 1"}};
}

const char* kEchoStub =
    "awk -F'\\t' 'NR==1{print \"sample_id\\tleft\\ttop\\tright\\tbottom\"; next}"
    " {split($3,b,\" \"); print $1\"\\t\"b[1]\"\\t\"b[2]\"\\t\"b[3]\"\\t\"b[4]}' {in} > {out}";

TEST_F(WorkDir, StubResponsesMirrorFixture) {
  const auto r = run_external(requests(), kEchoStub, dir_);
  ASSERT_EQ(r.size(), 3u);
  EXPECT_EQ(r[0], (GroundingResponse{"a", {1, 2, 30, 40}}));
  EXPECT_EQ(r[2], (GroundingResponse{"c", {0, 0, 1, 1}}));
  EXPECT_TRUE(fs::exists(dir_ / "requests.tsv"));
}

TEST_F(WorkDir, NonzeroExitCarriesStatus) {
  try {
    run_external(requests(), "echo broken model >&2; exit 1 # {in} {out}", dir_);
    FAIL();
  } catch (const ExternalCommandError& e) {
    EXPECT_EQ(e.exit_status(), 1);
    EXPECT_NE(e.diagnostics().find("broken model"), std::string::npos);
  }
}

TEST_F(WorkDir, MissingIdsAreNamed) {
  const std::string cmd = std::string(kEchoStub) + "; sed -i '/^[ab]\\t/d' {out}";
  try {
    run_external(requests(), cmd, dir_);
    FAIL();
  } catch (const MissingIdsError& e) {
    EXPECT_EQ(e.ids(), (std::vector<std::string>{"a", "b"}));
  }
}

TEST_F(WorkDir, TemplateNeedsPlaceholders) {
  EXPECT_THROW(run_external(requests(), "cat {in}", dir_), ValidationError);
}

TEST(Responses, MatchRejectsDuplicatesAndStrangers) {
  const auto req = requests();
  std::vector<GroundingResponse> dup = {{"a", {}}, {"a", {}}, {"b", {}}, {"c", {}}};
  EXPECT_THROW(match_responses(req, dup), ValidationError);
  std::vector<GroundingResponse> extra = {{"a", {}}, {"b", {}}, {"c", {}}, {"z", {}}};
  EXPECT_THROW(match_responses(req, extra), Error);
  std::vector<GroundingResponse> shuffled = {{"c", {}}, {"a", {}}, {"b", {}}};
  const auto m = match_responses(req, shuffled);
  EXPECT_EQ(m[0].sample_id, "a");
  EXPECT_EQ(m[2].sample_id, "c");
}

TEST(Responses, FilesRoundTrip) {
  const auto req = requests();
  std::stringstream rs;
  write_requests(req, rs);
  EXPECT_EQ(read_requests(rs), req);
  const std::vector<GroundingResponse> resp = {{"a", {-5, 3, 700, 9}}, {"b", {0, 0, 0, 0}}};
  std::stringstream ss;
  write_responses(resp, ss);
  EXPECT_EQ(read_responses(ss), resp);
}

TEST(MockGround, NoiseZeroIsExact) {
  const std::map<std::string, BBox> truth = {{"a", BBox(10, 20, 30, 40)}};
  const auto r = mock_ground({"a", "", ""}, truth, 0.0, 7);
  EXPECT_EQ(r.box, (RawBox{10, 20, 30, 40}));
}

TEST(MockGround, DeterministicAndBounded) {
  const std::map<std::string, BBox> truth = {{"a", BBox(100, 100, 200, 200)}};
  EXPECT_EQ(mock_ground({"a", "", ""}, truth, 0.5, 3), mock_ground({"a", "", ""}, truth, 0.5, 3));
  bool moved = false;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const auto r = mock_ground({"a", "", ""}, truth, 0.2, seed).box;
    ASSERT_LE(std::abs(r.left - 100), 20);
    ASSERT_LE(std::abs(r.top - 100), 20);
    ASSERT_LE(std::abs(r.right - 200), 20);
    ASSERT_LE(std::abs(r.bottom - 200), 20);
    moved |= r != RawBox{100, 100, 200, 200};
  }
  EXPECT_TRUE(moved);
  EXPECT_THROW(mock_ground({"zz", "", ""}, truth, 0.1, 1), Error);
}

std::vector<Sample> samples(int n) {
  std::vector<Sample> s;
  for (int i = 0; i < n; ++i) {
    s.push_back({"s" + std::to_string(i), "img", "q", ImageDims(10, 10), std::nullopt, std::nullopt});
  }
  return s;
}

TEST(MockAnswers, SingleWordVocabulary) {
  const std::vector<std::string> vocab = {"clock"};
  for (const auto& r : mock_pseudo_answers(samples(20), vocab, 1)) {
    EXPECT_EQ(r.pseudo_answer, "clock");
  }
}

TEST(MockAnswers, SeededAssignments) {
  const std::vector<std::string> vocab = {"a", "b", "c", "d", "e", "f", "g", "h", "i", "j"};
  const auto s = samples(1000);
  EXPECT_EQ(mock_pseudo_answers(s, vocab, 1), mock_pseudo_answers(s, vocab, 1));
  EXPECT_NE(mock_pseudo_answers(s, vocab, 1), mock_pseudo_answers(s, vocab, 2));
}

TEST(Conversion, ClampsAndFlagsDegenerate) {
  const auto s = samples(2);
  const std::vector<GroundingResponse> r = {{"s0", {-3, -3, 5, 50}}, {"s1", {20, 20, 30, 30}}};
  const auto c = responses_to_predictions(r, s, "m");
  EXPECT_EQ(c.predictions[0].box, BBox(0, 0, 5, 10));
  EXPECT_EQ(c.predictions[1].box, BBox(9, 9, 10, 10));
  EXPECT_EQ(c.degenerate, 1u);
  EXPECT_EQ(c.predictions[0].source, "m");
}

}  // namespace
}  // namespace vqg
