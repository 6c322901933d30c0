#include "vqg/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include <fmt/format.h>
#include <json.hpp>

#include "vqg/error.hpp"
#include "vqg/text.hpp"

namespace vqg {
namespace {

std::size_t decile(double v) {
  return std::min<std::size_t>(static_cast<std::size_t>(std::floor(v * 10.0)), 9);
}

}  // namespace

ScoreReport score(std::span<const Prediction> predictions,
                  std::span<const Sample> ground_truth) {
  if (ground_truth.empty()) throw ValidationError("no ground-truth samples to score");

  std::map<std::string, const Prediction*> by_id;
  for (const auto& p : predictions) {
    if (!by_id.emplace(p.sample_id, &p).second) {
      throw ValidationError(
          fmt::format("duplicate prediction for sample '{}'", p.sample_id));
    }
  }

  std::vector<std::string> missing;
  std::set<std::string> truth_ids;
  for (const auto& s : ground_truth) {
    if (!s.gt_box) {
      throw ValidationError(
          fmt::format("sample '{}' has no ground-truth box", s.sample_id));
    }
    truth_ids.insert(s.sample_id);
    if (!by_id.contains(s.sample_id)) missing.push_back(s.sample_id);
  }
  if (!missing.empty()) {
    throw MissingIdsError("predictions missing", std::move(missing));
  }
  std::vector<std::string> extra;
  for (const auto& [id, p] : by_id) {
    if (!truth_ids.contains(id)) extra.push_back(id);
  }
  if (!extra.empty()) {
    throw MissingIdsError("predictions for unknown samples", std::move(extra));
  }

  ScoreReport report;
  report.n_samples = ground_truth.size();
  report.per_sample.reserve(ground_truth.size());
  double sum = 0.0;
  for (const auto& s : ground_truth) {
    const auto clamped = clamp_to_image(by_id.at(s.sample_id)->box.raw(), s.dims);
    const double v = clamped ? iou(*clamped, *s.gt_box) : 0.0;
    report.per_sample.push_back({s.sample_id, v});
    ++report.histogram[decile(v)];
    sum += v;
  }
  report.mean_iou = sum / static_cast<double>(report.n_samples);
  report.score = 100.0 * report.mean_iou;
  return report;
}

std::string format_score(double value, bool full_precision) {
  std::string shortest = format_double(value);
  if (shortest.find_first_of("eE") != std::string::npos) {
    shortest = fmt::format("{:.17g}", value);
  }
  if (full_precision) {
    return shortest.find('.') == std::string::npos ? shortest + ".0" : shortest;
  }
  const auto dot = shortest.find('.');
  const std::size_t decimals =
      dot == std::string::npos ? 0 : shortest.size() - dot - 1;
  return fmt::format("{:.{}f}", value, std::clamp<std::size_t>(decimals, 1, 3));
}

std::string ablation_table(std::span<const AblationRow> rows,
                           bool full_precision) {
  std::size_t width = 0;
  for (const auto& r : rows) width = std::max(width, r.label.size());
  std::string out;
  for (const auto& r : rows) {
    out += fmt::format("{:<{}} {}\n", r.label, width,
                       format_score(r.score, full_precision));
  }
  return out;
}

DeltaReport compare(const ScoreReport& a, const ScoreReport& b) {
  std::map<std::string, double> b_ious;
  for (const auto& s : b.per_sample) b_ious.emplace(s.sample_id, s.iou);

  std::vector<std::string> mismatched;
  std::set<std::string> a_ids;
  for (const auto& s : a.per_sample) {
    a_ids.insert(s.sample_id);
    if (!b_ious.contains(s.sample_id)) mismatched.push_back(s.sample_id);
  }
  for (const auto& [id, v] : b_ious) {
    if (!a_ids.contains(id)) mismatched.push_back(id);
  }
  if (!mismatched.empty()) {
    throw MissingIdsError("reports cover different samples", std::move(mismatched));
  }

  DeltaReport d;
  for (const auto& s : a.per_sample) {
    const double other = b_ious.at(s.sample_id);
    const double delta = other - s.iou;
    d.per_sample.push_back({s.sample_id, s.iou, other, delta});
    if (delta > 0) {
      ++d.improved;
    } else if (delta < 0) {
      ++d.worsened;
    } else {
      ++d.unchanged;
    }
  }
  d.score_delta = b.score - a.score;
  return d;
}

void write_score_report(const ScoreReport& report, std::ostream& out) {
  for (const auto& s : report.per_sample) {
    out << nlohmann::json{{"sample_id", s.sample_id}, {"iou", s.iou}}.dump()
        << '\n';
  }
  nlohmann::json summary = {{"n_samples", report.n_samples},
                            {"mean_iou", report.mean_iou},
                            {"score", report.score},
                            {"histogram", report.histogram}};
  out << nlohmann::json{{"summary", summary}}.dump() << '\n';
}

ScoreReport read_score_report(std::istream& in) {
  ScoreReport report;
  bool have_summary = false;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    if (have_summary) throw ParseError(line_no, "", "record after summary");
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
      if (j.contains("summary")) {
        const auto& s = j.at("summary");
        report.n_samples = s.at("n_samples").get<std::size_t>();
        report.mean_iou = s.at("mean_iou").get<double>();
        report.score = s.at("score").get<double>();
        report.histogram = s.at("histogram").get<std::array<std::size_t, 10>>();
        have_summary = true;
      } else {
        report.per_sample.push_back(
            {j.at("sample_id").get<std::string>(), j.at("iou").get<double>()});
      }
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(line_no, "", e.what());
    }
  }
  if (!have_summary) throw FormatError("score report has no summary record");
  if (report.n_samples != report.per_sample.size()) {
    throw FormatError("score report summary disagrees with its sample count");
  }
  return report;
}

}  // namespace vqg
