#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vqg/corpus.hpp"
#include "vqg/geometry.hpp"

namespace vqg {

inline constexpr double kDefaultReplaceThreshold = 0.6;
inline constexpr double kDefaultFuseThreshold = 0.5;

// Candidate ranking: confidence descending, then detector name, then class
// name, then larger area first; identical keys fall back to box order.
bool candidate_rank_less(const Detection& a, const Detection& b);

// Detector boxes for one image in candidate rank order. Detections from all
// detectors are pooled into a single list.
class CandidateSet {
 public:
  CandidateSet() = default;
  CandidateSet(std::string image_ref, std::vector<Detection> detections);

  const std::string& image_ref() const noexcept { return image_ref_; }
  std::span<const Detection> candidates() const noexcept { return candidates_; }
  bool empty() const noexcept { return candidates_.empty(); }
  std::size_t size() const noexcept { return candidates_.size(); }

 private:
  std::string image_ref_;
  std::vector<Detection> candidates_;
};

std::map<std::string, CandidateSet> build_candidate_sets(
    std::vector<Detection> detections);

struct ReplaceResult {
  BBox box;
  bool replaced = false;
  std::optional<std::size_t> candidate_index;  // rank of the chosen candidate
};

// First candidate, in rank order, whose IoU with `predicted` is strictly
// greater than `threshold`; otherwise `predicted` itself.
ReplaceResult replace(const BBox& predicted, const CandidateSet& candidates,
                      double threshold = kDefaultReplaceThreshold);

struct EnsembleMember {
  BBox box;
  std::string source;
};

struct EnsembleInput {
  std::string sample_id;
  std::vector<EnsembleMember> boxes;  // non-empty, unique sources
};

// Medoid fusion. Members are first put in source order; the medoid is the box
// with the largest mean IoU to all members (first in source order on ties),
// and the output is the coordinate-wise mean, rounded half up, of every
// member whose IoU with the medoid is at least `cluster_threshold`.
BBox fuse(const EnsembleInput& input,
          double cluster_threshold = kDefaultFuseThreshold);

enum class FuseOrder { kReplaceThenFuse, kFuseThenReplace };

struct PostprocessConfig {
  double replace_threshold = kDefaultReplaceThreshold;
  double fuse_threshold = kDefaultFuseThreshold;
  FuseOrder order = FuseOrder::kReplaceThenFuse;
  bool replace = true;  // false skips candidate replacement entirely
};

struct PostprocessStats {
  std::size_t samples = 0;
  std::size_t folds = 0;
  std::size_t replace_attempts = 0;
  std::size_t replacements = 0;
  double replacement_rate = 0.0;
  // Mean over samples of the mean pairwise IoU between fold boxes; empty
  // with a single fold.
  std::optional<double> mean_fold_disagreement_iou;
  std::size_t images_without_candidates = 0;
  std::size_t outside_image = 0;  // fused boxes left unclamped
};

struct PostprocessResult {
  std::vector<Prediction> predictions;  // dataset order
  PostprocessStats stats;
};

// Per sample: replace each fold box against the image's candidates, fuse the
// results, clamp to the image (or fuse first, then replace, per config).
// Candidates are looked up by Sample::image_url. Throws MissingIdsError when
// a fold lacks a sample or names an unknown one.
PostprocessResult run_postprocess(
    std::span<const Sample> samples,
    std::span<const std::vector<Prediction>> folds,
    const std::map<std::string, CandidateSet>& candidates,
    const PostprocessConfig& config = {});

}  // namespace vqg
