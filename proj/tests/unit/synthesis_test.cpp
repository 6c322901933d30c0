#include <gtest/gtest.h>

#include <cmath>
#include <set>
#include <sstream>

#include "oracles.hpp"
#include "vqg/error.hpp"
#include "vqg/synthesis.hpp"

namespace vqg {
namespace {

Sample sample(std::string id, std::string q, std::optional<std::string> pa,
              std::optional<BBox> box = std::nullopt, ImageDims dims = {100, 100}) {
  return {std::move(id), "img", std::move(q), dims, box, std::move(pa)};
}

Detection det(std::string cls, double conf, BBox box = BBox(0, 0, 10, 10),
              std::string detector = "yolor") {
  return {"img", std::move(detector), std::move(cls), conf, box};
}

PseudoAnswerTable clock_vase() {
  PseudoAnswerTable t;
  t.add("clock", "q1");
  t.add("clock", "q2");
  t.add("vase", "q3");
  return t;
}

TEST(BuildTable, Examples) {
  const std::vector<Sample> s = {sample("1", "q1", "clock"), sample("2", "q2", "clock"),
                                 sample("3", "q3", "vase")};
  const auto t = build_table(s);
  EXPECT_EQ(t, clock_vase());
  EXPECT_EQ(*t.questions("clock"), (std::vector<std::string>{"q1", "q2"}));

  const std::vector<Sample> dup = {sample("1", "q1", "clock"), sample("2", "q1", "clock")};
  EXPECT_EQ(*build_table(dup).questions("clock"), std::vector<std::string>{"q1"});
  EXPECT_TRUE(build_table({}).empty());
}

TEST(BuildTable, MissingPseudoAnswerNamesSample) {
  const std::vector<Sample> s = {sample("1", "q1", "clock"), sample("s-77", "q2", std::nullopt)};
  try {
    build_table(s);
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("s-77"), std::string::npos);
  }
}

TEST(BuildTable, KeysAreNormalized) {
  const std::vector<Sample> s = {sample("1", "q1", "Roll  Paper")};
  EXPECT_TRUE(build_table(s).contains("roll paper"));
}

TEST(AnswerTable, RoundTrip) {
  auto t = clock_vase();
  t.add("roll paper", "what is\tthis?");
  std::stringstream ss;
  write_answer_table(t, ss);
  EXPECT_EQ(read_answer_table(ss), t);
}

TEST(SelectObject, Examples) {
  const auto table = clock_vase();
  const std::vector<Detection> a = {det("vase", 0.9), det("vase", 0.85), det("clock", 0.8)};
  EXPECT_EQ(select_object(a, table)->class_name, "clock");
  const std::vector<Detection> b = {det("dog", 0.9)};
  EXPECT_FALSE(select_object(b, table));
  const std::vector<Detection> c = {det("clock", 0.5)};
  EXPECT_EQ(select_object(c, table), c[0]);
}

TEST(SelectObject, CountsPoolDetectors) {
  // Two detectors each seeing one clock still make a count of two.
  const std::vector<Detection> d = {det("clock", 0.9, BBox(0, 0, 5, 5), "yolor"),
                                    det("clock", 0.8, BBox(0, 0, 5, 5), "vitdet"),
                                    det("vase", 0.1)};
  EXPECT_EQ(select_object(d, clock_vase())->class_name, "vase");
}

TEST(SelectObject, TieBreaks) {
  const auto table = clock_vase();
  const std::vector<Detection> d = {det("vase", 0.7), det("clock", 0.7)};
  EXPECT_EQ(select_object(d, table)->class_name, "clock");
}

TEST(SelectObject, MatchesRescanOracle) {
  PseudoAnswerTable table;
  const std::vector<std::string> classes = {"a", "b", "c", "d", "e", "f"};
  for (const auto& c : {"a", "b", "c", "d"}) table.add(c, std::string("q-") + c);
  Rng rng(17);
  for (int trial = 0; trial < 2000; ++trial) {
    std::vector<Detection> dets;
    const auto n = rng.uniform_int(0, 8);
    for (int i = 0; i < n; ++i) {
      const int l = static_cast<int>(rng.uniform_int(0, 20));
      const int t = static_cast<int>(rng.uniform_int(0, 20));
      dets.push_back(det(classes[rng.uniform_index(classes.size())],
                         static_cast<double>(rng.uniform_int(1, 4)) / 4,
                         BBox(l, t, l + static_cast<int>(rng.uniform_int(1, 9)),
                              t + static_cast<int>(rng.uniform_int(1, 9)))));
    }
    ASSERT_EQ(select_object(dets, table), oracle::rescan_select(dets, table));
  }
}

TEST(Synthesize, ForcedDraw) {
  const auto table = clock_vase();
  const std::vector<Detection> d = {det("clock", 0.8, BBox(1, 2, 3, 4))};
  std::uint64_t seed = 0;
  while (Rng(seed).uniform_index(2) != 0) ++seed;
  Rng rng(seed);
  const auto s = synthesize("img9", d, table, rng);
  ASSERT_TRUE(s);
  EXPECT_EQ(s->question, "q1");
  EXPECT_EQ(s->pseudo_answer, "clock");
  EXPECT_EQ(s->target_box, BBox(1, 2, 3, 4));
  EXPECT_EQ(s->image_ref, "img9");
  EXPECT_EQ(s->provenance.detector, "yolor");
}

TEST(Synthesize, NoSelectionNoSample) {
  Rng rng(1);
  const std::vector<Detection> d = {det("dog", 0.8)};
  EXPECT_FALSE(synthesize("img", d, clock_vase(), rng));
}

TEST(Synthesize, Deterministic) {
  const std::vector<Detection> d = {det("clock", 0.8)};
  Rng a(5), b(5);
  EXPECT_EQ(synthesize("i", d, clock_vase(), a), synthesize("i", d, clock_vase(), b));
}

std::map<std::string, std::vector<Detection>> clocks_for(const std::vector<PoolImage>& pool) {
  std::map<std::string, std::vector<Detection>> m;
  for (const auto& p : pool) {
    auto d = det("clock", 0.9);
    d.image_ref = p.image_ref;
    m[p.image_ref].push_back(d);
  }
  return m;
}

TEST(Forge, WithoutReplacement) {
  const std::vector<PoolImage> pool = {{"a", {50, 50}}, {"b", {50, 50}}, {"c", {50, 50}}};
  ForgeOptions o;
  o.n_target = 2;
  o.seed = 3;
  const auto r = forge_dataset(pool, clocks_for(pool), clock_vase(), o);
  ASSERT_EQ(r.samples.size(), 2u);
  EXPECT_NE(r.samples[0].image_ref, r.samples[1].image_ref);
  EXPECT_EQ(r.shortfall, 0u);
}

TEST(Forge, ExclusionOfWholePool) {
  const std::vector<PoolImage> pool = {{"a", {50, 50}}, {"b", {50, 50}}};
  ForgeOptions o;
  o.n_target = 5;
  o.exclusion = {"a", "b"};
  const auto r = forge_dataset(pool, clocks_for(pool), clock_vase(), o);
  EXPECT_TRUE(r.samples.empty());
  EXPECT_EQ(r.shortfall, 5u);
  EXPECT_EQ(r.eligible_images, 0u);
}

TEST(Forge, DeterministicAcrossJobsAndPoolOrder) {
  std::vector<PoolImage> pool;
  for (int i = 0; i < 60; ++i) pool.push_back({"img" + std::to_string(i), {50, 50}});
  const auto dets = clocks_for(pool);
  ForgeOptions o;
  o.n_target = 25;
  o.seed = 11;
  const auto a = forge_dataset(pool, dets, clock_vase(), o);
  std::reverse(pool.begin(), pool.end());
  o.jobs = 4;
  const auto b = forge_dataset(pool, dets, clock_vase(), o);
  EXPECT_EQ(a.samples, b.samples);
  o.seed = 12;
  EXPECT_NE(forge_dataset(pool, dets, clock_vase(), o).samples, a.samples);
}

TEST(Forge, DetectionOutsideImageIsError) {
  const std::vector<PoolImage> pool = {{"a", {5, 5}}};
  ForgeOptions o;
  o.n_target = 1;
  EXPECT_THROW(forge_dataset(pool, clocks_for(pool), clock_vase(), o), ValidationError);
}

TEST(BackTranslation, Examples) {
  PseudoAnswerTable t;
  t.add("clock", "q1");
  auto r = apply_back_translation(t, {{"q1", {"q1'"}}});
  EXPECT_EQ(*r.table.questions("clock"), (std::vector<std::string>{"q1", "q1'"}));
  EXPECT_EQ(r.skipped, 0u);

  r = apply_back_translation(t, {{"other", {"x"}}});
  EXPECT_EQ(r.table, t);
  EXPECT_EQ(r.skipped, 1u);

  EXPECT_EQ(apply_back_translation(t, {}).table, t);
}

TEST(Bins, Edges) {
  const ImageDims d(10, 10);
  EXPECT_EQ(area_ratio_bin(BBox(0, 0, 10, 10), d), 9u);
  EXPECT_EQ(area_ratio_bin(BBox(0, 0, 1, 1), d), 0u);
  EXPECT_EQ(area_ratio_bin(BBox(0, 0, 5, 10), d), 5u);
  EXPECT_EQ(aspect_ratio_bin(BBox(0, 0, 100, 1)), 9u);
  EXPECT_EQ(aspect_ratio_bin(BBox(0, 0, 1, 100)), 0u);
  EXPECT_EQ(question_length_bin("what is it"), 2u);
  EXPECT_EQ(question_length_bin("   "), 0u);
  std::string long_q;
  for (int i = 0; i < 25; ++i) long_q += "w ";
  EXPECT_EQ(question_length_bin(long_q), 19u);
}

SyntheticSample syn(BBox box, std::string q, ImageDims dims = {10, 10}) {
  return {"img", std::move(q), "clock", box, dims, {}};
}

TEST(Distribution, IdenticalIsZero) {
  const std::vector<SyntheticSample> s = {syn(BBox(0, 0, 5, 5), "what is it"),
                                          syn(BBox(0, 0, 10, 2), "where")};
  const std::vector<Sample> r = {sample("1", "what is it", std::nullopt, BBox(0, 0, 5, 5), {10, 10}),
                                 sample("2", "where", std::nullopt, BBox(0, 0, 10, 2), {10, 10})};
  for (const auto& h : distribution_report(s, r).histograms) {
    ASSERT_TRUE(h.l1);
    EXPECT_EQ(*h.l1, 0.0) << h.name;
  }
}

TEST(Distribution, DisjointAreaIsTwo) {
  const std::vector<SyntheticSample> s = {syn(BBox(0, 0, 1, 1), "q")};
  const std::vector<Sample> r = {sample("1", "q", std::nullopt, BBox(0, 0, 10, 10), {10, 10})};
  const auto rep = distribution_report(s, r);
  EXPECT_EQ(rep.histograms[0].name, "box_area_ratio");
  EXPECT_EQ(*rep.histograms[0].l1, 2.0);
}

TEST(Distribution, HandComputedMixedCase) {
  // Areas: synthetic bins {0, 9}, reference bins {0, 0, 5, 9}.
  // Normalized: {.5, .5} vs {.5, .25, .25}; L1 = 0 + .25 + .25 = 0.5.
  const std::vector<SyntheticSample> s = {syn(BBox(0, 0, 1, 1), "a b"),
                                          syn(BBox(0, 0, 10, 10), "a b c")};
  const std::vector<Sample> r = {
      sample("1", "a b", std::nullopt, BBox(0, 0, 1, 1), {10, 10}),
      sample("2", "a b", std::nullopt, BBox(0, 0, 2, 2), {10, 10}),
      sample("3", "a b", std::nullopt, BBox(0, 0, 5, 10), {10, 10}),
      sample("4", "a b c d", std::nullopt, BBox(0, 0, 10, 10), {10, 10})};
  const auto rep = distribution_report(s, r);
  EXPECT_DOUBLE_EQ(*rep.histograms[0].l1, 0.5);
  // Question lengths: {2, 3} vs {2, 2, 2, 4}: |.5-.75| + .5 + .25 = 1.0.
  const auto& q = rep.histograms.back();
  EXPECT_EQ(q.name, "question_tokens");
  EXPECT_DOUBLE_EQ(*q.l1, 1.0);
  for (const auto& h : rep.histograms) {
    EXPECT_GT(*h.l1, -1e-12);
    EXPECT_LE(*h.l1, 2.0);
  }
}

TEST(Distribution, EmptySideHasNoDistance) {
  const std::vector<SyntheticSample> s = {syn(BBox(0, 0, 1, 1), "q")};
  const auto rep = distribution_report(s, {});
  EXPECT_FALSE(rep.histograms[0].l1);
  EXPECT_FALSE(format_distribution_report(rep).empty());
}

}  // namespace
}  // namespace vqg
