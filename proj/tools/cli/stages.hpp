#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "cli/config.hpp"
#include "vqg/corpus.hpp"
#include "vqg/evaluation.hpp"
#include "vqg/postprocess.hpp"
#include "vqg/synthesis.hpp"

// File-level building blocks shared by the subcommands and the pipeline.
// Each stage reads its inputs, writes its outputs atomically and records both
// in a Provenance for the run manifest.
namespace vqg::cli {

namespace fs = std::filesystem;

struct Provenance {
  std::vector<fs::path> inputs;
  std::vector<fs::path> outputs;

  void merge(const Provenance& other);
};

// {"tool", "version", "command", "config", "inputs": [{path, sha256}],
// "outputs": [...]}; inputs are hashed at call time.
nlohmann::json make_manifest(const std::string& command,
                             const nlohmann::json& config,
                             const Provenance& provenance);
void write_manifest(const fs::path& path, const nlohmann::json& manifest);

// Writes through a sibling temp file and renames into place.
void write_file(const fs::path& path,
                const std::function<void(std::ostream&)>& body);

std::vector<Sample> load_dataset(const fs::path& path, Provenance& prov);
std::vector<Detection> load_detections(const std::vector<fs::path>& paths,
                                       Provenance& prov);
std::vector<Prediction> load_predictions(const fs::path& path, Provenance& prov);

// Image references listed in the "image" column of a header-led table, e.g.
// the public test set.
std::set<std::string> load_exclusion(const fs::path& path, Provenance& prov);

struct TableStageResult {
  PseudoAnswerTable table;
  std::size_t samples_used = 0;
  std::size_t samples_excluded = 0;
  std::size_t paraphrases_skipped = 0;
};

TableStageResult stage_build_table(
    const fs::path& dataset, const std::optional<fs::path>& pseudo_answers,
    const std::optional<fs::path>& augmentation,
    const std::set<std::string>& exclusion, const fs::path& out,
    Provenance& prov);

struct ForgeStageOptions {
  std::size_t n_target = 0;
  std::uint64_t seed = 0;
  unsigned jobs = 1;
  std::set<std::string> exclusion;
  std::optional<fs::path> reference;  // dataset for the distribution report
};

// Writes `out` (dataset schema), `out`.provenance.tsv and, with a reference,
// `out`.distribution.txt.
ForgeResult stage_forge(const fs::path& table, const fs::path& pool,
                        const fs::path& detections,
                        const ForgeStageOptions& options, const fs::path& out,
                        Provenance& prov);

SplitManifest stage_split(const fs::path& dataset, int folds,
                          std::uint64_t seed,
                          const std::set<std::string>& exclusion,
                          const fs::path& out, Provenance& prov);

void stage_prompt(const fs::path& dataset,
                  const std::optional<fs::path>& pseudo_answers,
                  TemplateId template_id, const fs::path& out,
                  Provenance& prov);

struct InferStageOptions {
  ModelKind model = ModelKind::kMock;
  double noise = 0.0;
  std::string command;
  std::uint64_t seed = 0;
  std::string source;
  fs::path work_dir;
};

struct InferStageResult {
  std::size_t predictions = 0;
  std::size_t degenerate = 0;
};

InferStageResult stage_infer(const fs::path& dataset, const fs::path& prompts,
                             const InferStageOptions& options,
                             const fs::path& out, Provenance& prov);

PostprocessResult stage_postprocess(const fs::path& dataset,
                                    const std::vector<fs::path>& folds,
                                    const std::vector<fs::path>& candidates,
                                    const PostprocessConfig& config,
                                    const fs::path& out,
                                    const fs::path& stats_out,
                                    Provenance& prov);

ScoreReport stage_score(const fs::path& dataset, const fs::path& predictions,
                        const std::optional<fs::path>& report_out,
                        Provenance& prov);

nlohmann::json stats_to_json(const PostprocessStats& stats);

}  // namespace vqg::cli
