#include <gtest/gtest.h>

#include "vqg/error.hpp"
#include "vqg/prompting.hpp"

namespace vqg {
namespace {

TEST(Render, Examples) {
  EXPECT_EQ(render("What is lying on the sofa?", std::nullopt, TemplateId::kWhichRegion),
            "which region is lying on the sofa?");
  EXPECT_EQ(render("Where is the cat?", std::nullopt, TemplateId::kVerbatim),
            "Where is the cat?");
  EXPECT_EQ(render("?", "clock", TemplateId::kVgCanonical),
            "which region does the text \"clock\" describe?");
}

TEST(Render, CanonicalFallsBackToQuestion) {
  EXPECT_EQ(render("the red cup", std::nullopt, TemplateId::kVgCanonical),
            "which region does the text \"the red cup\" describe?");
}

TEST(Render, AnswerSuffix) {
  EXPECT_EQ(render("What is it?", "clock", TemplateId::kAnswerSuffix),
            "What is it? answer: clock");
  EXPECT_THROW(render("What is it?", std::nullopt, TemplateId::kAnswerSuffix),
               ValidationError);
}

TEST(Render, WhichRegionKeepsRestVerbatim) {
  EXPECT_EQ(render("find the Red cup", std::nullopt, TemplateId::kWhichRegion),
            "which region the Red cup");
  EXPECT_EQ(render("Who?", std::nullopt, TemplateId::kWhichRegion), "which region");
  EXPECT_EQ(render("  What   is it?", std::nullopt, TemplateId::kWhichRegion),
            "which region is it?");
}

TEST(Render, EmptyQuestion) {
  EXPECT_THROW(render("", "clock", TemplateId::kVerbatim), ValidationError);
  EXPECT_THROW(render("   ", std::nullopt, TemplateId::kWhichRegion), ValidationError);
}

TEST(FirstToken, Examples) {
  EXPECT_EQ(first_token("What is it?"), (SplitToken{"What", "is it?"}));
  EXPECT_EQ(first_token("  Who?"), (SplitToken{"Who?", ""}));
  EXPECT_EQ(first_token("find the red cup"), (SplitToken{"find", "the red cup"}));
}

TEST(TemplateId, Parse) {
  EXPECT_EQ(parse_template_id("t2"), TemplateId::kWhichRegion);
  EXPECT_EQ(parse_template_id("T4"), TemplateId::kVgCanonical);
  EXPECT_EQ(parse_template_id("1"), TemplateId::kVerbatim);
  EXPECT_EQ(parse_template_id("answer_suffix"), TemplateId::kAnswerSuffix);
  EXPECT_FALSE(parse_template_id("t5"));
  for (auto id : {TemplateId::kVerbatim, TemplateId::kWhichRegion,
                  TemplateId::kAnswerSuffix, TemplateId::kVgCanonical}) {
    EXPECT_EQ(parse_template_id(template_name(id)), id);
  }
  EXPECT_EQ(kDefaultTemplate, TemplateId::kWhichRegion);
}

}  // namespace
}  // namespace vqg
