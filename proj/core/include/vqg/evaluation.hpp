#pragma once

#include <array>
#include <cstddef>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "vqg/corpus.hpp"

namespace vqg {

struct SampleScore {
  std::string sample_id;
  double iou = 0.0;

  friend bool operator==(const SampleScore&, const SampleScore&) = default;
};

// Score = 100 * mean IoU over every ground-truth sample.
struct ScoreReport {
  std::size_t n_samples = 0;
  double mean_iou = 0.0;
  double score = 0.0;
  std::vector<SampleScore> per_sample;  // ground-truth order
  std::array<std::size_t, 10> histogram{};  // IoU deciles, 1.0 in the last

  friend bool operator==(const ScoreReport&, const ScoreReport&) = default;
};

// Each prediction is clamped to its image before the IoU is taken; a box that
// clamps to nothing scores 0. Throws MissingIdsError for ground-truth samples
// without a prediction or predictions for unknown samples, and
// ValidationError for duplicate predictions or samples lacking ground truth.
ScoreReport score(std::span<const Prediction> predictions,
                  std::span<const Sample> ground_truth);

struct AblationRow {
  std::string label;
  double score = 0.0;
};

// Renders a score with at least one decimal and at most three; trailing
// digits beyond the shortest round-trip form are never invented.
// full_precision prints the shortest round-trip form instead.
std::string format_score(double score, bool full_precision = false);

// One "label score" line per row, labels left-aligned to a common width.
std::string ablation_table(std::span<const AblationRow> rows,
                           bool full_precision = false);

struct SampleDelta {
  std::string sample_id;
  double iou_a = 0.0;
  double iou_b = 0.0;
  double delta = 0.0;  // iou_b - iou_a
};

struct DeltaReport {
  std::vector<SampleDelta> per_sample;
  std::size_t improved = 0;
  std::size_t worsened = 0;
  std::size_t unchanged = 0;
  double score_delta = 0.0;  // b.score - a.score
};

// Throws MissingIdsError when the two reports cover different samples.
DeltaReport compare(const ScoreReport& a, const ScoreReport& b);

// Line-delimited JSON: one {"sample_id", "iou"} object per sample followed by
// a {"summary": {...}} record.
void write_score_report(const ScoreReport& report, std::ostream& out);
ScoreReport read_score_report(std::istream& in);

}  // namespace vqg
