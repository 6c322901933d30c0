#pragma once

#include <optional>
#include <string>
#include <string_view>

namespace vqg {

// Prompt layouts for the grounding model. kWhichRegion is the default.
enum class TemplateId {
  kVerbatim,      // question unchanged
  kWhichRegion,   // first word replaced by "which region"
  kAnswerSuffix,  // question + " answer: " + pseudo answer
  kVgCanonical,   // which region does the text "<answer or question>" describe?
};

inline constexpr TemplateId kDefaultTemplate = TemplateId::kWhichRegion;

// Accepts "t1".."t4", "1".."4" or the names "verbatim", "which_region",
// "answer_suffix", "vg_canonical". Case-insensitive.
std::optional<TemplateId> parse_template_id(std::string_view text);
std::string_view template_name(TemplateId id);

struct SplitToken {
  std::string token;
  std::string rest;

  friend bool operator==(const SplitToken&, const SplitToken&) = default;
};

// Splits off the first whitespace-delimited token. Leading whitespace is
// dropped, punctuation attached to the token stays with it, and the rest
// starts after the first whitespace run.
SplitToken first_token(std::string_view question);

// Throws ValidationError for an empty question, or when kAnswerSuffix has no
// pseudo answer.
std::string render(std::string_view question,
                   const std::optional<std::string>& pseudo_answer,
                   TemplateId id);

}  // namespace vqg
