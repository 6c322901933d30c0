#include <fstream>

#include <fmt/format.h>

#include "cli/cli.hpp"
#include "cli/stages.hpp"
#include "vqg/error.hpp"
#include "vqg/evaluation.hpp"
#include "vqg/model_adapter.hpp"
#include "vqg/rng.hpp"

namespace vqg::cli {

namespace {

std::uint64_t fold_seed(std::uint64_t seed, int fold) {
  return Rng::derive(seed, fmt::format("fold/{}", fold)).next();
}

}  // namespace

PipelineResult run_pipeline(const RunConfig& config, const fs::path& run_dir,
                            bool force, std::ostream& log) {
  config.validate();
  const auto eval = config.path("eval");
  if (!eval) throw UsageError("pipeline config needs paths.eval");

  if (fs::exists(run_dir) && !fs::is_empty(run_dir) && !force) {
    throw UsageError(fmt::format(
        "run directory {} is not empty; pass --force to reuse it", run_dir.string()));
  }
  fs::create_directories(run_dir);

  Provenance prov;
  const auto exclusion = load_exclusion(*eval, prov);

  // Coarse-tuning data: answer table and forged synthetic set.
  if (const auto train = config.path("train")) {
    std::optional<fs::path> pseudo = config.path("pseudo_answers");
    if (!pseudo && !config.mock_vocabulary.empty()) {
      const auto samples = load_dataset(*train, prov);
      const auto records =
          mock_pseudo_answers(samples, config.mock_vocabulary, config.seed);
      pseudo = run_dir / "pseudo_answers.tsv";
      write_file(*pseudo, [&](std::ostream& os) { write_pseudo_answers(records, os); });
      prov.outputs.push_back(*pseudo);
    }
    const fs::path table_path = run_dir / "answer_table.tsv";
    const auto table = stage_build_table(*train, pseudo, config.path("augmentation"),
                                         exclusion, table_path, prov);
    log << fmt::format("build-table: {} answers from {} samples ({} excluded)\n",
                       table.table.size(), table.samples_used,
                       table.samples_excluded);

    if (config.folds >= 2) {
      stage_split(*train, config.folds, config.seed, exclusion,
                  run_dir / "folds.tsv", prov);
      log << fmt::format("split: {} folds\n", config.folds);
    }

    const auto pool = config.path("pool");
    const auto pool_detections = config.path("pool_detections");
    if (pool && pool_detections) {
      ForgeStageOptions fo;
      fo.n_target = config.n_target;
      fo.seed = config.seed;
      fo.jobs = config.jobs;
      fo.exclusion = exclusion;
      fo.reference = *train;
      const auto forged = stage_forge(table_path, *pool, *pool_detections, fo,
                                      run_dir / "synthetic.tsv", prov);
      log << fmt::format("forge: {} synthetic samples (shortfall {})\n",
                         forged.samples.size(), forged.shortfall);
    }
  }

  // Fine-tuned model inference over the evaluation set, one run per fold.
  const fs::path prompts = run_dir / "prompts.tsv";
  stage_prompt(*eval, config.path("eval_pseudo_answers"), config.template_id,
               prompts, prov);

  std::vector<fs::path> fold_files;
  for (int f = 0; f < config.folds; ++f) {
    const fs::path fold_dir = run_dir / fmt::format("fold_{:03}", f);
    InferStageOptions io;
    io.model = config.model;
    io.noise = config.noise;
    io.command = config.command;
    io.seed = fold_seed(config.seed, f);
    io.source = fmt::format("fold{:03}", f);
    io.work_dir = fold_dir / "work";
    const fs::path out = fold_dir / "predictions.tsv";
    const auto r = stage_infer(*eval, prompts, io, out, prov);
    if (r.degenerate) {
      log << fmt::format("infer fold {}: {} degenerate responses\n", f, r.degenerate);
    }
    fold_files.push_back(out);
  }

  const fs::path final_path = run_dir / "final_predictions.tsv";
  if (config.postprocess) {
    PostprocessConfig pc;
    pc.replace_threshold = config.replace_threshold;
    pc.fuse_threshold = config.fuse_threshold;
    pc.order = config.fuse_order;
    const auto post = stage_postprocess(*eval, fold_files, config.candidates, pc,
                                        final_path, run_dir / "postprocess_stats.json",
                                        prov);
    log << fmt::format("postprocess: {} of {} boxes replaced\n",
                       post.stats.replacements, post.stats.replace_attempts);
  } else {
    auto preds = load_predictions(fold_files.front(), prov);
    write_file(final_path, [&](std::ostream& os) { write_predictions(preds, os); });
    prov.outputs.push_back(final_path);
  }

  auto report = stage_score(*eval, final_path, run_dir / "score.jsonl", prov);
  write_file(run_dir / "score.txt", [&](std::ostream& os) {
    os << "score: " << format_score(report.score) << '\n';
  });
  prov.outputs.push_back(run_dir / "score.txt");

  // Only external inputs are hashed; run-dir artifacts are listed as outputs.
  Provenance external;
  for (const auto& p : prov.inputs) {
    const auto rel = fs::weakly_canonical(p).lexically_relative(fs::weakly_canonical(run_dir));
    if (rel.empty() || *rel.begin() == "..") external.inputs.push_back(p);
  }
  for (const auto& p : prov.outputs) {
    external.outputs.push_back(fs::weakly_canonical(p).lexically_relative(
        fs::weakly_canonical(run_dir)));
  }
  auto manifest = make_manifest("pipeline", config_to_json(config), external);
  write_manifest(run_dir / "manifest.json", manifest);

  log << "score: " << format_score(report.score) << '\n';
  return {std::move(report), run_dir};
}

}  // namespace vqg::cli
