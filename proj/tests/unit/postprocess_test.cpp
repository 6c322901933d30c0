#include <gtest/gtest.h>

#include <algorithm>

#include "oracles.hpp"
#include "vqg/error.hpp"
#include "vqg/postprocess.hpp"
#include "vqg/rng.hpp"

namespace vqg {
namespace {

Detection cand(double conf, BBox box, std::string detector = "yolor") {
  return {"img", std::move(detector), "thing", conf, box};
}

TEST(Replace, EmptyCandidatesKeepPrediction) {
  const auto r = replace(BBox(0, 0, 10, 10), CandidateSet("img", {}));
  EXPECT_EQ(r.box, BBox(0, 0, 10, 10));
  EXPECT_FALSE(r.replaced);
  EXPECT_FALSE(r.candidate_index);
}

TEST(Replace, IdentityCandidate) {
  const CandidateSet c("img", {cand(0.8, BBox(1, 1, 9, 9)), cand(0.9, BBox(0, 0, 10, 10))});
  const auto r = replace(BBox(0, 0, 10, 10), c);
  EXPECT_EQ(r.box, BBox(0, 0, 10, 10));
  EXPECT_TRUE(r.replaced);
  EXPECT_EQ(r.candidate_index, 0u);
}

TEST(Replace, SkipsLowOverlapTakesNext) {
  const CandidateSet c("img", {cand(0.9, BBox(5, 0, 15, 10)), cand(0.5, BBox(0, 0, 10, 9))});
  EXPECT_EQ(oracle::pixel_iou(BBox(0, 0, 10, 10), BBox(0, 0, 10, 9)), 0.9);
  const auto r = replace(BBox(0, 0, 10, 10), c);
  EXPECT_EQ(r.box, BBox(0, 0, 10, 9));
  EXPECT_TRUE(r.replaced);
  EXPECT_EQ(r.candidate_index, 1u);
}

TEST(Replace, BoundaryIsNotReplaced) {
  // 6x10 inside 10x10: IoU = 60/100 exactly.
  const CandidateSet c("img", {cand(0.9, BBox(0, 0, 6, 10))});
  EXPECT_EQ(iou(BBox(0, 0, 10, 10), BBox(0, 0, 6, 10)), 0.6);
  EXPECT_FALSE(replace(BBox(0, 0, 10, 10), c).replaced);
  EXPECT_TRUE(replace(BBox(0, 0, 10, 10), c, 0.59).replaced);
}

TEST(Candidates, RankOrder) {
  const CandidateSet c("img", {cand(0.5, BBox(0, 0, 2, 2), "b"), cand(0.5, BBox(0, 0, 3, 3), "a"),
                               cand(0.7, BBox(0, 0, 1, 1), "z")});
  EXPECT_EQ(c.candidates()[0].detector, "z");
  EXPECT_EQ(c.candidates()[1].detector, "a");
  EXPECT_EQ(c.candidates()[2].detector, "b");
}

EnsembleInput ensemble(std::vector<BBox> boxes) {
  EnsembleInput in{"s", {}};
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    in.boxes.push_back({boxes[i], "m" + std::to_string(i)});
  }
  return in;
}

TEST(Fuse, OutlierFixture) {
  const BBox a(0, 0, 10, 10), b(2, 0, 12, 10), c(40, 40, 50, 50);
  // Pairwise pixel IoUs: a-b = 80/120, a-c = b-c = 0.
  EXPECT_EQ(oracle::pixel_counts(a, b).inter, 80);
  EXPECT_EQ(oracle::pixel_counts(a, b).uni, 120);
  EXPECT_EQ(fuse(ensemble({a, b, c})), BBox(1, 0, 11, 10));
  EXPECT_EQ(fuse(ensemble({c, b, a})), BBox(1, 0, 11, 10));
}

TEST(Fuse, Identity) {
  EXPECT_EQ(fuse(ensemble({BBox(3, 4, 5, 6)})), BBox(3, 4, 5, 6));
  EXPECT_EQ(fuse(ensemble({BBox(3, 4, 5, 6), BBox(3, 4, 5, 6), BBox(3, 4, 5, 6)})),
            BBox(3, 4, 5, 6));
}

TEST(Fuse, RoundsHalfUp) {
  EXPECT_EQ(fuse(ensemble({BBox(0, 0, 10, 10), BBox(1, 1, 11, 11)}), 0.1), BBox(1, 1, 11, 11));
}

TEST(Fuse, Errors) {
  EXPECT_THROW(fuse(ensemble({})), ValidationError);
  EnsembleInput dup{"s", {{BBox(0, 0, 1, 1), "x"}, {BBox(0, 0, 1, 1), "x"}}};
  EXPECT_THROW(fuse(dup), ValidationError);
}

BBox random_box(Rng& rng) {
  const int l = static_cast<int>(rng.uniform_int(0, 40));
  const int t = static_cast<int>(rng.uniform_int(0, 40));
  return BBox(l, t, l + static_cast<int>(rng.uniform_int(1, 30)),
              t + static_cast<int>(rng.uniform_int(1, 30)));
}

TEST(Fuse, HullAndOrderInvariance) {
  Rng rng(23);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<BBox> boxes;
    const auto k = rng.uniform_int(1, 6);
    for (int i = 0; i < k; ++i) boxes.push_back(random_box(rng));
    auto in = ensemble(boxes);
    const auto fused = fuse(in);
    int l = 1 << 30, t = 1 << 30, r = 0, b = 0;
    for (const auto& m : in.boxes) {
      l = std::min(l, m.box.left());
      t = std::min(t, m.box.top());
      r = std::max(r, m.box.right());
      b = std::max(b, m.box.bottom());
    }
    ASSERT_TRUE(BBox(l, t, r, b).contains(fused));
    rng.shuffle(std::span<EnsembleMember>(in.boxes));
    ASSERT_EQ(fuse(in), fused);
  }
}

TEST(Fuse, ThresholdAboveOneIsMedoid) {
  const auto in = ensemble({BBox(0, 0, 10, 10), BBox(2, 0, 12, 10), BBox(40, 40, 50, 50)});
  EXPECT_EQ(fuse(in, 1.0), BBox(0, 0, 10, 10));
}

Sample sample(std::string id, std::string image, BBox gt) {
  return {std::move(id), std::move(image), "q", ImageDims(100, 100), gt, std::nullopt};
}

TEST(Pipeline, OneFoldNoCandidatesIsClampedInput) {
  const std::vector<Sample> s = {sample("a", "img", BBox(0, 0, 1, 1))};
  const std::vector<std::vector<Prediction>> folds = {{{"a", BBox(90, 90, 150, 150), "f"}}};
  const auto r = run_postprocess(s, folds, {});
  ASSERT_EQ(r.predictions.size(), 1u);
  EXPECT_EQ(r.predictions[0].box, BBox(90, 90, 100, 100));
  EXPECT_EQ(r.stats.images_without_candidates, 1u);
  EXPECT_EQ(r.stats.replacements, 0u);
  EXPECT_FALSE(r.stats.mean_fold_disagreement_iou);
}

TEST(Pipeline, IdenticalFoldsAndCandidate) {
  const std::vector<Sample> s = {sample("a", "img", BBox(0, 0, 1, 1))};
  const Prediction p{"a", BBox(10, 10, 30, 30), "f"};
  const std::vector<std::vector<Prediction>> folds = {{p}, {p}, {p}};
  const auto cands = build_candidate_sets({cand(0.9, BBox(10, 10, 30, 30))});
  const auto r = run_postprocess(s, folds, cands);
  EXPECT_EQ(r.predictions[0].box, p.box);
  EXPECT_EQ(r.stats.replacements, 3u);
  EXPECT_EQ(r.stats.replace_attempts, 3u);
  EXPECT_EQ(*r.stats.mean_fold_disagreement_iou, 1.0);
}

TEST(Pipeline, ThreeFoldFixture) {
  // Fold boxes for one sample; the candidate pulls the first two together.
  //   fold0 (0,0,10,10)  -> candidate (0,0,10,9), IoU 0.9
  //   fold1 (1,0,11,10)  -> IoU with candidate 81/109 > 0.6 -> candidate
  //   fold2 (60,60,70,70) -> no candidate overlap, kept
  // Medoid is the candidate; the outlier is outside the cluster.
  const std::vector<Sample> s = {sample("a", "img", BBox(0, 0, 1, 1))};
  const std::vector<std::vector<Prediction>> folds = {
      {{"a", BBox(0, 0, 10, 10), "f"}},
      {{"a", BBox(1, 0, 11, 10), "f"}},
      {{"a", BBox(60, 60, 70, 70), "f"}}};
  const auto cands = build_candidate_sets({cand(0.9, BBox(0, 0, 10, 9))});
  const auto r = run_postprocess(s, folds, cands);
  EXPECT_EQ(r.predictions[0].box, BBox(0, 0, 10, 9));
  EXPECT_EQ(r.stats.replacements, 2u);

  PostprocessConfig fuse_first;
  fuse_first.order = FuseOrder::kFuseThenReplace;
  // Fused: mean of (0,0,10,10) and (1,0,11,10) = (1,0,11,10) after half-up
  // rounding of 0.5 and 10.5; then IoU 81/109 with the candidate.
  EXPECT_EQ(run_postprocess(s, folds, cands, fuse_first).predictions[0].box,
            BBox(0, 0, 10, 9));
}

TEST(Pipeline, MissingIdsAreListed) {
  const std::vector<Sample> s = {sample("a", "img", BBox(0, 0, 1, 1)),
                                 sample("b", "img", BBox(0, 0, 1, 1)),
                                 sample("c", "img", BBox(0, 0, 1, 1))};
  const std::vector<std::vector<Prediction>> folds = {{{"a", BBox(0, 0, 5, 5), "f"}}};
  try {
    run_postprocess(s, folds, {});
    FAIL();
  } catch (const MissingIdsError& e) {
    EXPECT_EQ(e.ids(), (std::vector<std::string>{"b", "c"}));
  }
}

TEST(Pipeline, UnknownAndDuplicateIds) {
  const std::vector<Sample> s = {sample("a", "img", BBox(0, 0, 1, 1))};
  const std::vector<std::vector<Prediction>> unknown = {
      {{"a", BBox(0, 0, 5, 5), "f"}, {"zz", BBox(0, 0, 5, 5), "f"}}};
  EXPECT_THROW(run_postprocess(s, unknown, {}), MissingIdsError);
  const std::vector<std::vector<Prediction>> dup = {
      {{"a", BBox(0, 0, 5, 5), "f"}, {"a", BBox(0, 0, 5, 5), "f"}}};
  EXPECT_THROW(run_postprocess(s, dup, {}), ValidationError);
}

}  // namespace
}  // namespace vqg
