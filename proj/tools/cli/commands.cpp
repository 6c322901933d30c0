#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "cli/cli.hpp"
#include "cli/stages.hpp"
#include "vqg/error.hpp"
#include "vqg/image_cache.hpp"
#include "vqg/model_adapter.hpp"
#include "vqg/text.hpp"

namespace vqg::cli {

using nlohmann::json;

namespace {

// Flags shared by subcommands that read RunConfig values. A flag given on the
// command line beats the config file, which beats the built-in default.
struct ConfigFlags {
  std::string config_path;
  std::uint64_t seed = 0;
  std::string template_text;
  double replace_threshold = kDefaultReplaceThreshold;
  double fuse_threshold = kDefaultFuseThreshold;
  std::string fuse_order;
  int folds = 0;
  double noise = 0.0;
  unsigned jobs = 1;
  std::size_t n_target = 0;

  // Several subcommands register the same flag name; any of them counts.
  struct OptionList {
    std::vector<CLI::Option*> items;
    OptionList& operator=(CLI::Option* o) {
      items.push_back(o);
      return *this;
    }
  };
  std::map<std::string, OptionList> opts;

  void add_config(CLI::App* app) {
    app->add_option("--config", config_path, "JSON run config; flags override it")
        ->check(CLI::ExistingFile);
  }
  void add_seed(CLI::App* app) {
    opts["seed"] = app->add_option("--seed", seed, "random seed");
  }
  void add_jobs(CLI::App* app) {
    opts["jobs"] = app->add_option("--jobs", jobs, "worker threads")
                       ->check(CLI::PositiveNumber);
  }

  bool given(const std::string& name) const {
    auto it = opts.find(name);
    if (it == opts.end()) return false;
    return std::any_of(it->second.items.begin(), it->second.items.end(),
                       [](const CLI::Option* o) { return o->count() > 0; });
  }

  RunConfig resolve() const {
    RunConfig c = config_path.empty() ? RunConfig{} : load_config(config_path);
    if (given("seed")) c.seed = seed;
    if (given("template")) {
      auto id = parse_template_id(template_text);
      if (!id) throw UsageError(fmt::format("unknown template '{}'", template_text));
      c.template_id = *id;
    }
    if (given("replace_threshold")) c.replace_threshold = replace_threshold;
    if (given("fuse_threshold")) c.fuse_threshold = fuse_threshold;
    if (given("fuse_order")) c.fuse_order = parse_fuse_order(fuse_order);
    if (given("folds")) c.folds = folds;
    if (given("noise")) c.noise = noise;
    if (given("jobs")) c.jobs = jobs;
    if (given("n_target")) c.n_target = n_target;
    return c;
  }
};

std::set<std::string> maybe_exclusion(const std::string& path, Provenance& prov) {
  if (path.empty()) return {};
  return load_exclusion(path, prov);
}

std::optional<fs::path> opt_path(const std::string& p) {
  if (p.empty()) return std::nullopt;
  return fs::path(p);
}

// Refuses to write any output over an input file.
void guard_outputs(const std::vector<std::string>& inputs,
                   const std::vector<std::string>& outputs) {
  for (const auto& o : outputs) {
    if (o.empty() || !fs::exists(o)) continue;
    for (const auto& i : inputs) {
      if (!i.empty() && fs::exists(i) && fs::equivalent(i, o)) {
        throw UsageError(fmt::format("output {} would overwrite input {}", o, i));
      }
    }
  }
}

void finish(const std::string& command, const json& config,
            const Provenance& prov, const fs::path& primary_output) {
  write_manifest(primary_output.string() + ".manifest.json",
                 make_manifest(command, config, prov));
}

std::vector<std::string> split_vocabulary(const std::vector<std::string>& raw) {
  std::vector<std::string> words;
  for (const auto& item : raw) {
    std::stringstream ss(item);
    std::string w;
    while (std::getline(ss, w, ',')) {
      auto norm = normalize_label(w);
      if (!norm.empty()) words.push_back(norm);
    }
  }
  return words;
}

struct ReportEntry {
  std::string label;
  double score;
};

ReportEntry parse_report_entry(const std::string& spec) {
  const auto eq = spec.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw UsageError(fmt::format("--entry expects LABEL=REPORT_OR_SCORE, got '{}'", spec));
  }
  const std::string label = spec.substr(0, eq);
  const std::string value = spec.substr(eq + 1);
  if (auto number = parse_double(value)) return {label, *number};
  std::ifstream in(value);
  if (!in) throw Error(fmt::format("cannot open score report {}", value));
  return {label, read_score_report(in).score};
}

}  // namespace

int run_cli(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
  CLI::App app{"vqg: visual question grounding toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", VQG_VERSION_STRING);

  std::string dataset, pseudo_path, aug_path, exclude_path, output, table_path,
      pool_path, detections_path, reference_path, prompts_path, command,
      source = "model", work_dir, stats_path, predictions_path, report_path,
      run_dir, cache_dir, paths_out;
  std::vector<std::string> fold_paths, candidate_paths, entries, compare_paths,
      vocabulary;
  bool mock = false, no_replace = false, force = false, full_precision = false,
       no_postprocess = false, strict_dims = false, no_dims_check = false;
  int retries = 3;
  long backoff_ms = 1000;
  std::size_t in_flight = 8;
  ConfigFlags flags;

  // build-table
  auto* build = app.add_subcommand("build-table", "group questions by pseudo answer");
  build->add_option("--dataset", dataset, "training table")->required()->check(CLI::ExistingFile);
  build->add_option("--pseudo-answers", pseudo_path, "sample_id/pseudo_answer file")
      ->check(CLI::ExistingFile);
  build->add_option("--augmentation", aug_path, "back-translated paraphrases")
      ->check(CLI::ExistingFile);
  build->add_option("--exclude", exclude_path, "table whose images must not be used")
      ->check(CLI::ExistingFile);
  build->add_option("-o,--out", output, "answer table")->required();
  flags.add_config(build);

  // forge
  auto* forge = app.add_subcommand("forge", "forge the synthetic coarse-tuning set");
  forge->add_option("--table", table_path, "answer table")->required()->check(CLI::ExistingFile);
  forge->add_option("--pool", pool_path, "image pool (image, width, height)")
      ->required()->check(CLI::ExistingFile);
  forge->add_option("--detections", detections_path, "detections on pool images")
      ->required()->check(CLI::ExistingFile);
  flags.opts["n_target"] = forge->add_option("--n-target", flags.n_target, "samples wanted");
  forge->add_option("--exclude", exclude_path, "table whose images must not be sampled")
      ->check(CLI::ExistingFile);
  forge->add_option("--reference", reference_path, "dataset for the distribution report")
      ->check(CLI::ExistingFile);
  forge->add_option("-o,--out", output, "synthetic dataset")->required();
  flags.add_config(forge);
  flags.add_seed(forge);
  flags.add_jobs(forge);

  // prompt
  auto* prompt = app.add_subcommand("prompt", "render model prompts");
  prompt->add_option("--dataset", dataset, "dataset table")->required()->check(CLI::ExistingFile);
  prompt->add_option("--pseudo-answers", pseudo_path, "sample_id/pseudo_answer file")
      ->check(CLI::ExistingFile);
  flags.opts["template"] = prompt->add_option(
      "--template", flags.template_text, "t1|t2|t3|t4 or verbatim|which_region|answer_suffix|vg_canonical");
  prompt->add_option("-o,--out", output, "sample_id/prompt file")->required();
  flags.add_config(prompt);

  // split
  auto* split = app.add_subcommand("split", "assign samples to folds");
  split->add_option("--dataset", dataset, "dataset table")->required()->check(CLI::ExistingFile);
  flags.opts["folds"] = split->add_option("--folds", flags.folds, "number of folds (>= 2)");
  split->add_option("--exclude", exclude_path, "table whose images must not be assigned")
      ->check(CLI::ExistingFile);
  split->add_option("-o,--out", output, "split manifest")->required();
  flags.add_config(split);
  flags.add_seed(split);

  // infer
  auto* infer = app.add_subcommand("infer", "run the grounding model");
  infer->add_option("--dataset", dataset, "dataset table")->required()->check(CLI::ExistingFile);
  infer->add_option("--prompts", prompts_path, "sample_id/prompt file")
      ->required()->check(CLI::ExistingFile);
  auto* mock_flag = infer->add_flag("--mock", mock, "use the ground-truth mock model");
  auto* command_opt = infer->add_option("--command", command,
                                        "external command template with {in} and {out}");
  mock_flag->excludes(command_opt);
  flags.opts["noise"] = infer->add_option("--noise", flags.noise, "mock jitter fraction");
  infer->add_option("--source", source, "source tag for the predictions");
  infer->add_option("--work-dir", work_dir, "directory for request/response files");
  infer->add_option("-o,--out", output, "predictions file")->required();
  flags.add_config(infer);
  flags.add_seed(infer);

  // postprocess
  auto* post = app.add_subcommand("postprocess", "snap to detector boxes and fuse folds");
  post->add_option("--dataset", dataset, "dataset table")->required()->check(CLI::ExistingFile);
  post->add_option("--fold", fold_paths, "per-fold predictions (repeatable)")
      ->required()->check(CLI::ExistingFile);
  post->add_option("--candidates", candidate_paths, "detections file (repeatable)")
      ->check(CLI::ExistingFile);
  flags.opts["replace_threshold"] =
      post->add_option("--replace-threshold", flags.replace_threshold, "IoU needed to replace");
  flags.opts["fuse_threshold"] =
      post->add_option("--fuse-threshold", flags.fuse_threshold, "IoU to join the medoid cluster");
  flags.opts["fuse_order"] =
      post->add_option("--fuse-order", flags.fuse_order, "replace_then_fuse|fuse_then_replace");
  post->add_flag("--no-replace", no_replace, "skip candidate replacement");
  post->add_option("--stats", stats_path, "stats JSON (default <out>.stats.json)");
  post->add_option("-o,--out", output, "final predictions")->required();
  flags.add_config(post);

  // score
  auto* score_cmd = app.add_subcommand("score", "score predictions against ground truth");
  score_cmd->add_option("--dataset", dataset, "ground-truth table")
      ->required()->check(CLI::ExistingFile);
  score_cmd->add_option("--predictions", predictions_path, "predictions file")
      ->required()->check(CLI::ExistingFile);
  score_cmd->add_option("--report", report_path, "per-sample report (JSON lines)");

  // report
  auto* report = app.add_subcommand("report", "render an ablation table or compare two runs");
  report->add_option("--entry", entries, "LABEL=score_report.jsonl or LABEL=number (repeatable)");
  report->add_option("--compare", compare_paths, "two score reports A B")->expected(2);
  report->add_flag("--full-precision", full_precision, "print scores at full precision");
  report->add_option("-o,--out", output, "write the table here instead of stdout");

  // pipeline
  auto* pipe = app.add_subcommand("pipeline", "run every stage from a config file");
  pipe->add_option("--config", flags.config_path, "JSON run config")
      ->required()->check(CLI::ExistingFile);
  pipe->add_option("--run-dir", run_dir, "output directory")->required();
  pipe->add_flag("--force", force, "reuse a non-empty run directory");
  pipe->add_flag("--no-postprocess", no_postprocess, "score fold 0 predictions directly");
  flags.add_seed(pipe);
  flags.add_jobs(pipe);
  flags.opts["noise"] = pipe->add_option("--noise", flags.noise, "mock jitter fraction");
  flags.opts["folds"] = pipe->add_option("--folds", flags.folds, "fold models to run");
  flags.opts["template"] = pipe->add_option("--template", flags.template_text, "prompt template");
  flags.opts["replace_threshold"] =
      pipe->add_option("--replace-threshold", flags.replace_threshold, "IoU needed to replace");
  flags.opts["fuse_threshold"] =
      pipe->add_option("--fuse-threshold", flags.fuse_threshold, "IoU to join the medoid cluster");
  flags.opts["fuse_order"] =
      pipe->add_option("--fuse-order", flags.fuse_order, "replace_then_fuse|fuse_then_replace");

  // fetch
  auto* fetch = app.add_subcommand("fetch", "download dataset images into the cache");
  fetch->add_option("--dataset", dataset, "dataset table")->required()->check(CLI::ExistingFile);
  fetch->add_option("--cache-dir", cache_dir, "cache directory (default $VQG_CACHE_DIR)");
  fetch->add_option("--retries", retries, "attempts per image")->check(CLI::PositiveNumber);
  fetch->add_option("--backoff-ms", backoff_ms, "first retry delay, doubled each retry");
  fetch->add_option("--in-flight", in_flight, "concurrent downloads")->check(CLI::PositiveNumber);
  auto* strict_flag = fetch->add_flag("--strict-dims", strict_dims, "fail on a size mismatch");
  fetch->add_flag("--no-dims-check", no_dims_check, "skip size checks")->excludes(strict_flag);
  fetch->add_option("--paths-out", paths_out, "write sample_id/image/path table");

  // mock-answers
  auto* answers = app.add_subcommand("mock-answers", "assign seeded mock pseudo answers");
  answers->add_option("--dataset", dataset, "dataset table")->required()->check(CLI::ExistingFile);
  answers->add_option("--vocab", vocabulary, "answer words (repeatable or comma separated)")
      ->required();
  answers->add_option("-o,--out", output, "pseudo-answer file")->required();
  flags.add_seed(answers);

  try {
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::CallForHelp& e) {
    app.exit(e, out, err);
    return kExitOk;
  } catch (const CLI::CallForVersion& e) {
    app.exit(e, out, err);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitUsage;
  }

  try {
    if (build->parsed()) {
      guard_outputs({dataset, pseudo_path, aug_path, exclude_path}, {output});
      Provenance prov;
      const auto exclusion = maybe_exclusion(exclude_path, prov);
      auto r = stage_build_table(dataset, opt_path(pseudo_path), opt_path(aug_path),
                                 exclusion, output, prov);
      out << fmt::format("answers: {}\nsamples: {} ({} excluded)\n", r.table.size(),
                         r.samples_used, r.samples_excluded);
      if (r.paraphrases_skipped) {
        err << fmt::format("warning: {} paraphrase(s) for unknown questions skipped\n",
                           r.paraphrases_skipped);
      }
      finish("build-table", json::object(), prov, output);
    } else if (forge->parsed()) {
      const RunConfig c = flags.resolve();
      guard_outputs({table_path, pool_path, detections_path, exclude_path, reference_path},
                    {output});
      Provenance prov;
      ForgeStageOptions fo;
      fo.n_target = c.n_target;
      fo.seed = c.seed;
      fo.jobs = c.jobs;
      fo.exclusion = maybe_exclusion(exclude_path, prov);
      fo.reference = opt_path(reference_path);
      auto r = stage_forge(table_path, pool_path, detections_path, fo, output, prov);
      out << fmt::format("forged: {}\nimages visited: {} of {}\n", r.samples.size(),
                         r.images_visited, r.eligible_images);
      if (r.shortfall) {
        err << fmt::format("warning: shortfall of {} sample(s); pool exhausted\n",
                           r.shortfall);
      }
      finish("forge", {{"seed", c.seed}, {"n_target", c.n_target}}, prov, output);
    } else if (prompt->parsed()) {
      const RunConfig c = flags.resolve();
      guard_outputs({dataset, pseudo_path}, {output});
      Provenance prov;
      stage_prompt(dataset, opt_path(pseudo_path), c.template_id, output, prov);
      finish("prompt", {{"template", std::string(template_name(c.template_id))}}, prov,
             output);
    } else if (split->parsed()) {
      RunConfig c = flags.resolve();
      if (c.folds < 2) throw UsageError("split needs --folds >= 2");
      guard_outputs({dataset, exclude_path}, {output});
      Provenance prov;
      const auto exclusion = maybe_exclusion(exclude_path, prov);
      auto m = stage_split(dataset, c.folds, c.seed, exclusion, output, prov);
      out << fmt::format("folds: {}\nassigned: {}\n", m.fold_count, m.assignments.size());
      finish("split", {{"seed", c.seed}, {"folds", c.folds}}, prov, output);
    } else if (infer->parsed()) {
      RunConfig c = flags.resolve();
      if (!mock && command.empty()) {
        if (c.model == ModelKind::kExternal && !c.command.empty()) {
          command = c.command;
        } else if (c.model != ModelKind::kMock || flags.config_path.empty()) {
          throw UsageError("infer needs --mock or --command");
        }
      }
      guard_outputs({dataset, prompts_path}, {output});
      InferStageOptions io;
      io.model = command.empty() ? ModelKind::kMock : ModelKind::kExternal;
      io.noise = c.noise;
      io.command = command;
      io.seed = c.seed;
      io.source = source;
      io.work_dir = work_dir.empty() ? fs::path(output + ".work") : fs::path(work_dir);
      Provenance prov;
      auto r = stage_infer(dataset, prompts_path, io, output, prov);
      out << fmt::format("predictions: {}\n", r.predictions);
      if (r.degenerate) {
        err << fmt::format("warning: {} response(s) clamped to an empty box\n",
                           r.degenerate);
      }
      finish("infer",
             {{"model", io.model == ModelKind::kMock ? "mock" : "external"},
              {"noise", io.noise},
              {"seed", io.seed},
              {"command", io.command},
              {"source", io.source}},
             prov, output);
    } else if (post->parsed()) {
      RunConfig c = flags.resolve();
      c.validate();
      std::vector<std::string> inputs = fold_paths;
      inputs.insert(inputs.end(), candidate_paths.begin(), candidate_paths.end());
      inputs.push_back(dataset);
      const std::string stats_out = stats_path.empty() ? output + ".stats.json" : stats_path;
      guard_outputs(inputs, {output, stats_out});
      PostprocessConfig pc;
      pc.replace_threshold = c.replace_threshold;
      pc.fuse_threshold = c.fuse_threshold;
      pc.order = c.fuse_order;
      pc.replace = !no_replace;
      Provenance prov;
      std::vector<fs::path> folds(fold_paths.begin(), fold_paths.end());
      std::vector<fs::path> cands(candidate_paths.begin(), candidate_paths.end());
      auto r = stage_postprocess(dataset, folds, cands, pc, output, stats_out, prov);
      out << fmt::format("samples: {}\nreplaced: {} of {}\n", r.stats.samples,
                         r.stats.replacements, r.stats.replace_attempts);
      if (r.stats.images_without_candidates) {
        err << fmt::format("warning: {} image(s) had no candidates\n",
                           r.stats.images_without_candidates);
      }
      finish("postprocess",
             {{"replace_threshold", pc.replace_threshold},
              {"fuse_threshold", pc.fuse_threshold},
              {"fuse_order", fuse_order_name(pc.order)},
              {"replace", pc.replace}},
             prov, output);
    } else if (score_cmd->parsed()) {
      guard_outputs({dataset, predictions_path}, {report_path});
      Provenance prov;
      auto r = stage_score(dataset, predictions_path, opt_path(report_path), prov);
      out << "score: " << format_score(r.score) << '\n'
          << "samples: " << r.n_samples << '\n';
      if (!report_path.empty()) finish("score", json::object(), prov, report_path);
    } else if (report->parsed()) {
      std::ostringstream text;
      if (!compare_paths.empty()) {
        std::ifstream a_in(compare_paths[0]), b_in(compare_paths[1]);
        if (!a_in || !b_in) throw Error("cannot open compared score reports");
        const auto d = compare(read_score_report(a_in), read_score_report(b_in));
        text << fmt::format("score delta: {:+.3f}\nimproved: {}\nworsened: {}\nunchanged: {}\n",
                            d.score_delta, d.improved, d.worsened, d.unchanged);
      }
      if (!entries.empty()) {
        std::vector<AblationRow> rows;
        for (const auto& e : entries) {
          auto parsed = parse_report_entry(e);
          rows.push_back({parsed.label, parsed.score});
        }
        text << ablation_table(rows, full_precision);
      }
      if (entries.empty() && compare_paths.empty()) {
        throw UsageError("report needs --entry or --compare");
      }
      if (output.empty()) {
        out << text.str();
      } else {
        write_file(output, [&](std::ostream& os) { os << text.str(); });
      }
    } else if (pipe->parsed()) {
      RunConfig c = flags.resolve();
      if (no_postprocess) c.postprocess = false;
      run_pipeline(c, run_dir, force, out);
    } else if (fetch->parsed()) {
      FetchPolicy policy;
      policy.max_retries = retries;
      policy.initial_backoff = std::chrono::milliseconds(backoff_ms);
      policy.max_in_flight = in_flight;
      policy.dims_check = strict_dims     ? DimsCheck::kStrict
                          : no_dims_check ? DimsCheck::kOff
                                          : DimsCheck::kWarn;
      Provenance prov;
      const auto samples = load_dataset(dataset, prov);
      ImageCache cache(cache_dir.empty() ? ImageCache::default_dir() : fs::path(cache_dir),
                       policy);
      std::vector<FetchRequest> requests;
      for (const auto& s : samples) requests.push_back({s.image_url, s.dims});
      const auto outcomes = cache.fetch_all(requests);
      std::size_t failed = 0, hits = 0;
      for (const auto& o : outcomes) {
        if (!o.result) {
          ++failed;
          err << "error: " << o.error << '\n';
          continue;
        }
        if (o.result->cache_hit) ++hits;
        if (o.result->warning) err << "warning: " << *o.result->warning << '\n';
      }
      if (!paths_out.empty()) {
        write_file(paths_out, [&](std::ostream& os) {
          const std::vector<std::string> header = {"sample_id", "image", "path"};
          TableWriter writer(os, Delimiter::kTab, header);
          for (std::size_t i = 0; i < samples.size(); ++i) {
            writer.write_row({samples[i].sample_id, samples[i].image_url,
                              outcomes[i].result ? outcomes[i].result->path.string()
                                                 : std::string()});
          }
        });
      }
      out << fmt::format("fetched: {}\ncache hits: {}\nfailed: {}\n",
                         outcomes.size() - failed, hits, failed);
      if (failed) return kExitDataError;
    } else if (answers->parsed()) {
      guard_outputs({dataset}, {output});
      const RunConfig c = flags.resolve();
      Provenance prov;
      const auto samples = load_dataset(dataset, prov);
      const auto words = split_vocabulary(vocabulary);
      const auto records = mock_pseudo_answers(samples, words, c.seed);
      write_file(output, [&](std::ostream& os) { write_pseudo_answers(records, os); });
      prov.outputs.push_back(output);
      finish("mock-answers", {{"seed", c.seed}, {"vocabulary", words}}, prov, output);
    }
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitDataError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitDataError;
  }
  return kExitOk;
}

}  // namespace vqg::cli
