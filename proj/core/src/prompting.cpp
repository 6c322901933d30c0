#include "vqg/prompting.hpp"

#include <array>
#include <utility>

#include "vqg/error.hpp"
#include "vqg/text.hpp"

namespace vqg {
namespace {

constexpr std::string_view kWhichRegion = "which region";

bool is_space(char c) noexcept {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' ||
         c == '\v';
}

constexpr std::array<std::pair<std::string_view, TemplateId>, 12> kNames = {{
    {"t1", TemplateId::kVerbatim},
    {"1", TemplateId::kVerbatim},
    {"verbatim", TemplateId::kVerbatim},
    {"t2", TemplateId::kWhichRegion},
    {"2", TemplateId::kWhichRegion},
    {"which_region", TemplateId::kWhichRegion},
    {"t3", TemplateId::kAnswerSuffix},
    {"3", TemplateId::kAnswerSuffix},
    {"answer_suffix", TemplateId::kAnswerSuffix},
    {"t4", TemplateId::kVgCanonical},
    {"4", TemplateId::kVgCanonical},
    {"vg_canonical", TemplateId::kVgCanonical},
}};

}  // namespace

std::optional<TemplateId> parse_template_id(std::string_view text) {
  const std::string key = normalize_label(text);
  for (const auto& [name, id] : kNames) {
    if (key == name) return id;
  }
  return std::nullopt;
}

std::string_view template_name(TemplateId id) {
  switch (id) {
    case TemplateId::kVerbatim: return "verbatim";
    case TemplateId::kWhichRegion: return "which_region";
    case TemplateId::kAnswerSuffix: return "answer_suffix";
    case TemplateId::kVgCanonical: return "vg_canonical";
  }
  return "unknown";
}

SplitToken first_token(std::string_view question) {
  std::size_t i = 0;
  while (i < question.size() && is_space(question[i])) ++i;
  const std::size_t start = i;
  while (i < question.size() && !is_space(question[i])) ++i;
  SplitToken out{std::string(question.substr(start, i - start)), {}};
  while (i < question.size() && is_space(question[i])) ++i;
  out.rest = std::string(question.substr(i));
  return out;
}

std::string render(std::string_view question,
                   const std::optional<std::string>& pseudo_answer,
                   TemplateId id) {
  if (trim(question).empty()) throw ValidationError("cannot render an empty question");
  switch (id) {
    case TemplateId::kVerbatim:
      return std::string(question);
    case TemplateId::kWhichRegion: {
      const auto split = first_token(question);
      std::string out(kWhichRegion);
      if (!split.rest.empty()) {
        out.push_back(' ');
        out += split.rest;
      }
      return out;
    }
    case TemplateId::kAnswerSuffix:
      if (!pseudo_answer) {
        throw ValidationError("answer_suffix template needs a pseudo answer");
      }
      return std::string(question) + " answer: " + *pseudo_answer;
    case TemplateId::kVgCanonical: {
      const std::string_view subject =
          pseudo_answer ? std::string_view(*pseudo_answer) : question;
      return std::string("which region does the text \"") +
             std::string(subject) + "\" describe?";
    }
  }
  throw ValidationError("unknown template id");
}

}  // namespace vqg
