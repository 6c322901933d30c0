#pragma once

#include <cstddef>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "vqg/corpus.hpp"
#include "vqg/geometry.hpp"
#include "vqg/rng.hpp"

namespace vqg {

// Pseudo answer -> the questions that produced it, in first-seen order.
// Keys are normalized labels; no list is empty and no list repeats a question.
class PseudoAnswerTable {
 public:
  // Returns false if the question was already listed under this answer.
  bool add(std::string_view pseudo_answer, const std::string& question);

  bool contains(std::string_view pseudo_answer) const;
  // nullptr when the answer is not a key.
  const std::vector<std::string>* questions(std::string_view pseudo_answer) const;

  const std::map<std::string, std::vector<std::string>, std::less<>>& entries()
      const noexcept {
    return entries_;
  }
  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }

  friend bool operator==(const PseudoAnswerTable&,
                         const PseudoAnswerTable&) = default;

 private:
  std::map<std::string, std::vector<std::string>, std::less<>> entries_;
};

// Throws ValidationError naming the first sample without a pseudo answer.
PseudoAnswerTable build_table(std::span<const Sample> samples);

// Columns: pseudo_answer, question. Keys in sorted order, questions in table
// order.
void write_answer_table(const PseudoAnswerTable& table, std::ostream& out);
PseudoAnswerTable read_answer_table(std::istream& in);

struct SynthesisProvenance {
  std::string detector;
  double confidence = 0.0;
  std::uint64_t seed = 0;
  std::string stream;  // key the per-image generator was derived from

  friend bool operator==(const SynthesisProvenance&,
                         const SynthesisProvenance&) = default;
};

struct SyntheticSample {
  std::string image_ref;
  std::string question;
  std::string pseudo_answer;
  BBox target_box;
  std::optional<ImageDims> dims;
  SynthesisProvenance provenance;

  friend bool operator==(const SyntheticSample&,
                         const SyntheticSample&) = default;
};

// Total order used to rank detections: confidence descending, then class name
// ascending, then larger area first; remaining ties fall to box coordinates
// and detector name.
bool detection_rank_less(const Detection& a, const Detection& b);

// Highest-ranked detection whose class appears exactly once in the image and
// is a key of `table`.
std::optional<Detection> select_object(std::span<const Detection> detections,
                                       const PseudoAnswerTable& table);

// Selects an object and draws one of its questions uniformly with `rng`.
std::optional<SyntheticSample> synthesize(
    std::string_view image_ref, std::span<const Detection> detections,
    const PseudoAnswerTable& table, Rng& rng);

struct ForgeOptions {
  std::size_t n_target = 0;
  std::uint64_t seed = 0;
  std::set<std::string> exclusion;  // image refs never sampled
  unsigned jobs = 1;
};

struct ForgeResult {
  std::vector<SyntheticSample> samples;
  std::size_t images_visited = 0;
  std::size_t eligible_images = 0;
  std::size_t shortfall = 0;  // n_target - samples.size()
};

// Visits pool images (minus the exclusion set) in a seeded random order
// without replacement, synthesizing until n_target samples are collected or
// the pool runs out. Each image's generator is derived from (seed,
// image_ref), so the output does not depend on `jobs` or pool file order.
ForgeResult forge_dataset(
    std::span<const PoolImage> pool,
    const std::map<std::string, std::vector<Detection>>& detections_by_image,
    const PseudoAnswerTable& table, const ForgeOptions& options);

// Dataset rows for a forged set, ids "syn-<index>".
std::vector<Sample> to_samples(std::span<const SyntheticSample> synthetic);

struct BackTranslationResult {
  PseudoAnswerTable table;
  std::size_t skipped = 0;  // paraphrases whose original question is unknown
};

// Appends each paraphrase to every entry that lists its original question.
BackTranslationResult apply_back_translation(const PseudoAnswerTable& table,
                                             const Augmentation& augmentation);

struct HistogramComparison {
  std::string name;
  std::vector<std::string> bin_labels;
  std::vector<std::size_t> synthetic;
  std::vector<std::size_t> reference;
  // Sum of absolute differences of the normalized histograms, in [0, 2].
  // Empty when either side has no observations.
  std::optional<double> l1;
};

struct DistributionReport {
  std::vector<HistogramComparison> histograms;
};

// Bin index helpers behind distribution_report().
// Box area over image area: 10 uniform bins on [0, 1].
std::size_t area_ratio_bin(const BBox& box, const ImageDims& dims);
// width / height: 10 log-spaced bins on [1/8, 8], out-of-range values clamp.
std::size_t aspect_ratio_bin(const BBox& box);
// Whitespace token count: bins 1..19, then 20+.
std::size_t question_length_bin(std::string_view question);

// Compares normalized box area, box aspect ratio and question length
// distributions. Reference samples without ground truth only contribute to
// the question length histogram.
DistributionReport distribution_report(std::span<const SyntheticSample> synthetic,
                                       std::span<const Sample> reference);

std::string format_distribution_report(const DistributionReport& report);

}  // namespace vqg
