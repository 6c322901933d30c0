#pragma once

#include <cstdint>
#include <functional>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "vqg/geometry.hpp"
#include "vqg/table.hpp"

namespace vqg {

// One dataset row.
struct Sample {
  std::string sample_id;
  std::string image_url;
  std::string question;
  ImageDims dims;
  std::optional<BBox> gt_box;
  std::optional<std::string> pseudo_answer;

  friend bool operator==(const Sample&, const Sample&) = default;
};

struct Detection {
  std::string image_ref;
  std::string detector;
  std::string class_name;  // normalized, see normalize_label()
  double confidence = 0.0;
  BBox box;

  friend bool operator==(const Detection&, const Detection&) = default;
};

struct Prediction {
  std::string sample_id;
  BBox box;
  std::string source;

  friend bool operator==(const Prediction&, const Prediction&) = default;
};

struct SplitManifest {
  int fold_count = 0;
  std::map<std::string, int> assignments;

  std::vector<std::string> fold_members(int fold) const;
  std::vector<std::size_t> fold_sizes() const;

  friend bool operator==(const SplitManifest&, const SplitManifest&) = default;
};

struct PoolImage {
  std::string image_ref;
  ImageDims dims;

  friend bool operator==(const PoolImage&, const PoolImage&) = default;
};

struct PseudoAnswerRecord {
  std::string sample_id;
  std::string pseudo_answer;

  friend bool operator==(const PseudoAnswerRecord&,
                         const PseudoAnswerRecord&) = default;
};

// original question -> paraphrases, in file order.
using Augmentation = std::map<std::string, std::vector<std::string>>;

// ---- dataset table --------------------------------------------------------
//
// Columns: [sample_id|id,] image, question, width, height
//          [, left, top, right, bottom] [, pseudo_answer]
// Tab or comma delimited, sniffed from the header. Without an id column the
// 0-based row index becomes the sample id. A row whose four box fields are
// all empty has no ground truth.

std::vector<Sample> parse_dataset(std::istream& in);
void write_dataset(std::span<const Sample> samples, std::ostream& out,
                   Delimiter delimiter = Delimiter::kTab);

// ---- detections -----------------------------------------------------------
//
// Columns: image_ref, detector, class_name, confidence, left, top, right,
// bottom. One detection per line.

// Streams detections one at a time; `sink` sees each validated record.
void for_each_detection(std::istream& in,
                        const std::function<void(Detection&&)>& sink);
std::vector<Detection> parse_detections(std::istream& in);
void write_detections(std::span<const Detection> detections,
                      std::ostream& out);

// Throws ValidationError for the first detection whose box leaves its image.
// Images absent from `dims` are not checked.
void check_detections_fit(std::span<const Detection> detections,
                          const std::map<std::string, ImageDims>& dims);

// Multiplicity of each class among detections of a single image, pooled over
// every detector. Throws ValidationError when image_refs differ.
std::map<std::string, int> class_counts(std::span<const Detection> detections);

// Groups detections by image_ref, preserving per-image input order.
std::map<std::string, std::vector<Detection>> group_by_image(
    std::vector<Detection> detections);

// ---- predictions ----------------------------------------------------------
//
// Columns: sample_id, left, top, right, bottom [, source].

std::vector<Prediction> read_predictions(std::istream& in);
void write_predictions(std::span<const Prediction> predictions,
                       std::ostream& out);

// ---- folds ----------------------------------------------------------------

// Seeded shuffle of the sorted ids followed by round-robin assignment. Ids in
// `exclusion` are dropped before splitting. Requires 2 <= fold_count and at
// least fold_count remaining ids, so that no fold is empty.
SplitManifest split_folds(std::span<const std::string> sample_ids,
                          int fold_count, std::uint64_t seed,
                          const std::set<std::string>& exclusion = {});

// Columns: sample_id, fold. Written in sample_id order.
void write_split_manifest(const SplitManifest& manifest, std::ostream& out);
SplitManifest read_split_manifest(std::istream& in);

// ---- pseudo answers, augmentations, image pools ---------------------------

// Columns: sample_id, pseudo_answer. Answers are normalized on read.
std::vector<PseudoAnswerRecord> read_pseudo_answers(std::istream& in);
void write_pseudo_answers(std::span<const PseudoAnswerRecord> records,
                          std::ostream& out);

// Sets pseudo_answer on every sample named in `records`. Throws
// MissingIdsError if a record names an unknown sample.
void attach_pseudo_answers(std::vector<Sample>& samples,
                           std::span<const PseudoAnswerRecord> records);

// Columns: original_question, paraphrase.
Augmentation read_augmentation(std::istream& in);
void write_augmentation(const Augmentation& augmentation, std::ostream& out);

// Columns: image, width, height.
std::vector<PoolImage> read_image_pool(std::istream& in);
void write_image_pool(std::span<const PoolImage> pool, std::ostream& out);

}  // namespace vqg
