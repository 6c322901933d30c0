#include "vqg/postprocess.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <set>

#include <fmt/format.h>

#include "vqg/error.hpp"

namespace vqg {
namespace {

// Mean IoUs closer than this count as tied; sums of the same IoUs taken in a
// different order can differ in the last bits.
constexpr double kTieEpsilon = 1e-12;

int round_half_up_mean(std::int64_t sum, std::int64_t n) {
  // Coordinates are non-negative, so floor((2*sum + n) / (2n)) is exact.
  return static_cast<int>((2 * sum + n) / (2 * n));
}

void check_threshold(double t, const char* what) {
  if (!std::isfinite(t) || t <= 0.0) {
    throw ValidationError(fmt::format("{} must be positive, got {}", what, t));
  }
}

}  // namespace

bool candidate_rank_less(const Detection& a, const Detection& b) {
  if (a.confidence != b.confidence) return a.confidence > b.confidence;
  if (a.detector != b.detector) return a.detector < b.detector;
  if (a.class_name != b.class_name) return a.class_name < b.class_name;
  if (area(a.box) != area(b.box)) return area(a.box) > area(b.box);
  return a.box < b.box;
}

CandidateSet::CandidateSet(std::string image_ref,
                           std::vector<Detection> detections)
    : image_ref_(std::move(image_ref)), candidates_(std::move(detections)) {
  for (const auto& d : candidates_) {
    if (d.image_ref != image_ref_) {
      throw ValidationError(fmt::format(
          "candidate for '{}' placed in set for '{}'", d.image_ref, image_ref_));
    }
  }
  std::stable_sort(candidates_.begin(), candidates_.end(), candidate_rank_less);
}

std::map<std::string, CandidateSet> build_candidate_sets(
    std::vector<Detection> detections) {
  std::map<std::string, CandidateSet> sets;
  for (auto& [ref, group] : group_by_image(std::move(detections))) {
    sets.emplace(ref, CandidateSet(ref, std::move(group)));
  }
  return sets;
}

ReplaceResult replace(const BBox& predicted, const CandidateSet& candidates,
                      double threshold) {
  const auto cands = candidates.candidates();
  for (std::size_t i = 0; i < cands.size(); ++i) {
    if (iou(predicted, cands[i].box) > threshold) {
      return {cands[i].box, true, i};
    }
  }
  return {predicted, false, std::nullopt};
}

BBox fuse(const EnsembleInput& input, double cluster_threshold) {
  if (input.boxes.empty()) {
    throw ValidationError(
        fmt::format("ensemble for '{}' has no boxes", input.sample_id));
  }
  std::vector<const EnsembleMember*> members;
  members.reserve(input.boxes.size());
  for (const auto& m : input.boxes) members.push_back(&m);
  std::sort(members.begin(), members.end(),
            [](const EnsembleMember* a, const EnsembleMember* b) {
              return a->source < b->source;
            });
  for (std::size_t i = 1; i < members.size(); ++i) {
    if (members[i]->source == members[i - 1]->source) {
      throw ValidationError(fmt::format("ensemble for '{}' repeats source '{}'",
                                        input.sample_id, members[i]->source));
    }
  }

  const std::size_t k = members.size();
  std::size_t medoid = 0;
  double best = -1.0;
  for (std::size_t i = 0; i < k; ++i) {
    double sum = 0.0;
    for (std::size_t j = 0; j < k; ++j) sum += iou(members[i]->box, members[j]->box);
    const double mean = sum / static_cast<double>(k);
    if (mean > best + kTieEpsilon) {
      best = mean;
      medoid = i;
    }
  }

  const BBox& center = members[medoid]->box;
  std::array<std::int64_t, 4> sums{};
  std::int64_t n = 0;
  for (const auto* m : members) {
    if (m != members[medoid] && iou(center, m->box) < cluster_threshold) continue;
    sums[0] += m->box.left();
    sums[1] += m->box.top();
    sums[2] += m->box.right();
    sums[3] += m->box.bottom();
    ++n;
  }
  return BBox(round_half_up_mean(sums[0], n), round_half_up_mean(sums[1], n),
              round_half_up_mean(sums[2], n), round_half_up_mean(sums[3], n));
}

PostprocessResult run_postprocess(
    std::span<const Sample> samples,
    std::span<const std::vector<Prediction>> folds,
    const std::map<std::string, CandidateSet>& candidates,
    const PostprocessConfig& config) {
  if (folds.empty()) throw ValidationError("postprocess needs at least one fold");
  check_threshold(config.replace_threshold, "replace threshold");
  check_threshold(config.fuse_threshold, "fuse threshold");

  std::set<std::string> known;
  for (const auto& s : samples) known.insert(s.sample_id);

  // fold -> sample_id -> prediction
  std::vector<std::map<std::string, const Prediction*>> by_fold(folds.size());
  std::vector<std::string> sources(folds.size());
  for (std::size_t f = 0; f < folds.size(); ++f) {
    std::vector<std::string> unknown;
    for (const auto& p : folds[f]) {
      if (!known.contains(p.sample_id)) {
        unknown.push_back(p.sample_id);
        continue;
      }
      if (!by_fold[f].emplace(p.sample_id, &p).second) {
        throw ValidationError(fmt::format("fold {} has two predictions for '{}'",
                                          f, p.sample_id));
      }
    }
    if (!unknown.empty()) {
      throw MissingIdsError(fmt::format("fold {} predicts unknown samples", f),
                            std::move(unknown));
    }
    std::vector<std::string> missing;
    for (const auto& s : samples) {
      if (!by_fold[f].contains(s.sample_id)) missing.push_back(s.sample_id);
    }
    if (!missing.empty()) {
      throw MissingIdsError(fmt::format("fold {} lacks predictions", f),
                            std::move(missing));
    }
    sources[f] = fmt::format("fold{:03}", f);
  }

  static const CandidateSet kNoCandidates;
  PostprocessResult result;
  auto& stats = result.stats;
  stats.samples = samples.size();
  stats.folds = folds.size();
  std::set<std::string> images_missing;
  double disagreement_sum = 0.0;

  for (const auto& s : samples) {
    auto cand_it = candidates.find(s.image_url);
    const CandidateSet* cands = &kNoCandidates;
    if (cand_it != candidates.end()) {
      cands = &cand_it->second;
    } else if (config.replace) {
      images_missing.insert(s.image_url);
    }

    auto snap = [&](const BBox& b) {
      if (!config.replace) return b;
      ++stats.replace_attempts;
      auto r = replace(b, *cands, config.replace_threshold);
      if (r.replaced) ++stats.replacements;
      return r.box;
    };

    EnsembleInput ensemble{s.sample_id, {}};
    for (std::size_t f = 0; f < folds.size(); ++f) {
      const BBox& raw = by_fold[f].at(s.sample_id)->box;
      ensemble.boxes.push_back(
          {config.order == FuseOrder::kReplaceThenFuse ? snap(raw) : raw,
           sources[f]});
    }

    if (folds.size() > 1) {
      double pair_sum = 0.0;
      std::size_t pairs = 0;
      for (std::size_t a = 0; a < folds.size(); ++a) {
        for (std::size_t b = a + 1; b < folds.size(); ++b) {
          pair_sum += iou(by_fold[a].at(s.sample_id)->box,
                          by_fold[b].at(s.sample_id)->box);
          ++pairs;
        }
      }
      disagreement_sum += pair_sum / static_cast<double>(pairs);
    }

    BBox fused = fuse(ensemble, config.fuse_threshold);
    if (config.order == FuseOrder::kFuseThenReplace) fused = snap(fused);

    auto clamped = clamp_to_image(fused.raw(), s.dims);
    if (!clamped) ++stats.outside_image;
    result.predictions.push_back(
        Prediction{s.sample_id, clamped.value_or(fused), "postprocess"});
  }

  stats.images_without_candidates = images_missing.size();
  stats.replacement_rate =
      stats.replace_attempts == 0
          ? 0.0
          : static_cast<double>(stats.replacements) /
                static_cast<double>(stats.replace_attempts);
  if (folds.size() > 1 && !samples.empty()) {
    stats.mean_fold_disagreement_iou =
        disagreement_sum / static_cast<double>(samples.size());
  }
  return result;
}

}  // namespace vqg
