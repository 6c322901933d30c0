#pragma once

#include <cstdint>
#include <filesystem>
#include <istream>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "vqg/corpus.hpp"
#include "vqg/geometry.hpp"

namespace vqg {

struct GroundingRequest {
  std::string sample_id;
  std::string image;  // local path or URL
  std::string prompt;

  friend bool operator==(const GroundingRequest&,
                         const GroundingRequest&) = default;
};

// Raw model output; coordinates may be negative or exceed the image.
struct GroundingResponse {
  std::string sample_id;
  RawBox box;

  friend bool operator==(const GroundingResponse&,
                         const GroundingResponse&) = default;
};

// Columns: sample_id, image_path, prompt.
void write_requests(std::span<const GroundingRequest> requests,
                    std::ostream& out);
std::vector<GroundingRequest> read_requests(std::istream& in);

// Columns: sample_id, left, top, right, bottom.
void write_responses(std::span<const GroundingResponse> responses,
                     std::ostream& out);
std::vector<GroundingResponse> read_responses(std::istream& in);

// Checks that every response echoes a request id exactly once and that no
// request went unanswered. Returns responses in request order.
std::vector<GroundingResponse> match_responses(
    std::span<const GroundingRequest> requests,
    std::vector<GroundingResponse> responses);

// Writes <work_dir>/requests.tsv, runs `command_template` through /bin/sh with
// {in} and {out} replaced by the quoted request and response paths, then reads
// and validates <work_dir>/responses.tsv. Runs against the same work_dir are
// serialized with an advisory file lock.
std::vector<GroundingResponse> run_external(
    std::span<const GroundingRequest> requests,
    const std::string& command_template,
    const std::filesystem::path& work_dir);

// Ground truth shifted by a seeded uniform integer jitter of up to
// floor(noise * min(box width, box height)) per coordinate. The jitter for a
// sample depends only on (seed, sample_id).
GroundingResponse mock_ground(const GroundingRequest& request,
                              const std::map<std::string, BBox>& ground_truth,
                              double noise, std::uint64_t seed);

// Seeded pick of one vocabulary word per sample, keyed by sample id.
std::vector<PseudoAnswerRecord> mock_pseudo_answers(
    std::span<const Sample> samples, std::span<const std::string> vocabulary,
    std::uint64_t seed);

struct ResponseConversion {
  std::vector<Prediction> predictions;
  std::size_t degenerate = 0;  // responses that clamped to an empty box
};

// Clamps each response to its sample's image. A response that clamps to an
// empty box becomes the 1x1 pixel nearest its clamped top-left corner.
ResponseConversion responses_to_predictions(
    std::span<const GroundingResponse> responses,
    std::span<const Sample> samples, const std::string& source);

}  // namespace vqg
