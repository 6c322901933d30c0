#include "cli/stages.hpp"

#include <fstream>
#include <map>

#include <fmt/format.h>

#include "vqg/digest.hpp"
#include "vqg/error.hpp"
#include "vqg/model_adapter.hpp"
#include "vqg/prompting.hpp"
#include "vqg/table.hpp"

#ifndef VQG_VERSION_STRING
#define VQG_VERSION_STRING "unknown"
#endif

namespace vqg::cli {

using nlohmann::json;

namespace {

std::ifstream open_input(const fs::path& path, Provenance& prov) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(fmt::format("cannot open {}", path.string()));
  prov.inputs.push_back(path);
  return in;
}

// Prefixes errors with the file they came from.
template <typename F>
auto with_file(const fs::path& path, F&& f) {
  try {
    return f();
  } catch (const MissingIdsError&) {
    throw;
  } catch (const Error& e) {
    throw Error(fmt::format("{}: {}", path.string(), e.what()));
  }
}

std::map<std::string, std::string> load_prompts(const fs::path& path,
                                                Provenance& prov) {
  auto in = open_input(path, prov);
  return with_file(path, [&] {
    TableReader reader(in);
    const auto id_col = reader.require_column("sample_id");
    const auto prompt_col = reader.require_column("prompt");
    std::map<std::string, std::string> prompts;
    TableRow row;
    while (reader.next(row)) {
      reader.expect_arity(row);
      prompts[row.fields[id_col]] = row.fields[prompt_col];
    }
    return prompts;
  });
}

}  // namespace

void Provenance::merge(const Provenance& other) {
  inputs.insert(inputs.end(), other.inputs.begin(), other.inputs.end());
  outputs.insert(outputs.end(), other.outputs.begin(), other.outputs.end());
}

json make_manifest(const std::string& command, const json& config,
                   const Provenance& provenance) {
  json inputs = json::array();
  std::set<fs::path> seen;
  for (const auto& p : provenance.inputs) {
    if (!seen.insert(p).second) continue;
    inputs.push_back({{"path", p.string()}, {"sha256", sha256_file(p)}});
  }
  json outputs = json::array();
  for (const auto& p : provenance.outputs) outputs.push_back(p.generic_string());
  return {{"tool", "vqg"},
          {"version", VQG_VERSION_STRING},
          {"command", command},
          {"config", config},
          {"inputs", inputs},
          {"outputs", outputs}};
}

void write_manifest(const fs::path& path, const json& manifest) {
  write_file(path, [&](std::ostream& out) { out << manifest.dump(2) << '\n'; });
}

void write_file(const fs::path& path,
                const std::function<void(std::ostream&)>& body) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(fmt::format("cannot write {}", path.string()));
    body(out);
    out.flush();
    if (!out) throw Error(fmt::format("write failed for {}", path.string()));
  }
  fs::rename(tmp, path);
}

std::vector<Sample> load_dataset(const fs::path& path, Provenance& prov) {
  auto in = open_input(path, prov);
  return with_file(path, [&] { return parse_dataset(in); });
}

std::vector<Detection> load_detections(const std::vector<fs::path>& paths,
                                       Provenance& prov) {
  std::vector<Detection> all;
  for (const auto& path : paths) {
    auto in = open_input(path, prov);
    with_file(path, [&] {
      for_each_detection(in, [&](Detection&& d) { all.push_back(std::move(d)); });
      return 0;
    });
  }
  return all;
}

std::vector<Prediction> load_predictions(const fs::path& path,
                                         Provenance& prov) {
  auto in = open_input(path, prov);
  return with_file(path, [&] { return read_predictions(in); });
}

std::set<std::string> load_exclusion(const fs::path& path, Provenance& prov) {
  auto in = open_input(path, prov);
  return with_file(path, [&] {
    TableReader reader(in);
    const auto col = reader.require_column("image");
    std::set<std::string> refs;
    TableRow row;
    while (reader.next(row)) {
      if (col >= row.fields.size()) {
        throw ParseError(row.line, "image", "missing field");
      }
      refs.insert(row.fields[col]);
    }
    return refs;
  });
}

TableStageResult stage_build_table(const fs::path& dataset,
                                   const std::optional<fs::path>& pseudo_answers,
                                   const std::optional<fs::path>& augmentation,
                                   const std::set<std::string>& exclusion,
                                   const fs::path& out, Provenance& prov) {
  auto samples = load_dataset(dataset, prov);
  if (pseudo_answers) {
    auto in = open_input(*pseudo_answers, prov);
    auto records = with_file(*pseudo_answers, [&] { return read_pseudo_answers(in); });
    attach_pseudo_answers(samples, records);
  }

  TableStageResult result;
  std::vector<Sample> kept;
  for (auto& s : samples) {
    if (exclusion.contains(s.image_url)) {
      ++result.samples_excluded;
    } else {
      kept.push_back(std::move(s));
    }
  }
  result.samples_used = kept.size();
  result.table = build_table(kept);

  if (augmentation) {
    auto in = open_input(*augmentation, prov);
    auto aug = with_file(*augmentation, [&] { return read_augmentation(in); });
    auto bt = apply_back_translation(result.table, aug);
    result.table = std::move(bt.table);
    result.paraphrases_skipped = bt.skipped;
  }

  write_file(out, [&](std::ostream& os) { write_answer_table(result.table, os); });
  prov.outputs.push_back(out);
  return result;
}

ForgeResult stage_forge(const fs::path& table_path, const fs::path& pool_path,
                        const fs::path& detections_path,
                        const ForgeStageOptions& options, const fs::path& out,
                        Provenance& prov) {
  PseudoAnswerTable table;
  {
    auto in = open_input(table_path, prov);
    table = with_file(table_path, [&] { return read_answer_table(in); });
  }
  std::vector<PoolImage> pool;
  {
    auto in = open_input(pool_path, prov);
    pool = with_file(pool_path, [&] { return read_image_pool(in); });
  }
  auto by_image = group_by_image(load_detections({detections_path}, prov));

  ForgeOptions fo;
  fo.n_target = options.n_target;
  fo.seed = options.seed;
  fo.exclusion = options.exclusion;
  fo.jobs = options.jobs;
  auto result = forge_dataset(pool, by_image, table, fo);

  const auto rows = to_samples(result.samples);
  write_file(out, [&](std::ostream& os) { write_dataset(rows, os); });
  prov.outputs.push_back(out);

  const fs::path provenance_path = out.string() + ".provenance.tsv";
  write_file(provenance_path, [&](std::ostream& os) {
    const std::vector<std::string> header = {"sample_id", "detector",
                                             "confidence", "seed", "stream"};
    TableWriter writer(os, Delimiter::kTab, header);
    for (std::size_t i = 0; i < result.samples.size(); ++i) {
      const auto& p = result.samples[i].provenance;
      writer.write_row({rows[i].sample_id, p.detector,
                        fmt::format("{}", p.confidence), std::to_string(p.seed),
                        p.stream});
    }
  });
  prov.outputs.push_back(provenance_path);

  if (options.reference) {
    const auto reference = load_dataset(*options.reference, prov);
    if (!result.samples.empty() && !reference.empty()) {
      const fs::path report_path = out.string() + ".distribution.txt";
      const auto report = distribution_report(result.samples, reference);
      write_file(report_path, [&](std::ostream& os) {
        os << format_distribution_report(report);
      });
      prov.outputs.push_back(report_path);
    }
  }
  return result;
}

SplitManifest stage_split(const fs::path& dataset, int folds,
                          std::uint64_t seed,
                          const std::set<std::string>& exclusion,
                          const fs::path& out, Provenance& prov) {
  const auto samples = load_dataset(dataset, prov);
  std::vector<std::string> ids;
  std::set<std::string> excluded_ids;
  for (const auto& s : samples) {
    ids.push_back(s.sample_id);
    if (exclusion.contains(s.image_url)) excluded_ids.insert(s.sample_id);
  }
  auto manifest = split_folds(ids, folds, seed, excluded_ids);
  write_file(out, [&](std::ostream& os) { write_split_manifest(manifest, os); });
  prov.outputs.push_back(out);
  return manifest;
}

void stage_prompt(const fs::path& dataset,
                  const std::optional<fs::path>& pseudo_answers,
                  TemplateId template_id, const fs::path& out,
                  Provenance& prov) {
  auto samples = load_dataset(dataset, prov);
  if (pseudo_answers) {
    auto in = open_input(*pseudo_answers, prov);
    auto records = with_file(*pseudo_answers, [&] { return read_pseudo_answers(in); });
    attach_pseudo_answers(samples, records);
  }
  write_file(out, [&](std::ostream& os) {
    const std::vector<std::string> header = {"sample_id", "prompt"};
    TableWriter writer(os, Delimiter::kTab, header);
    for (const auto& s : samples) {
      std::string prompt;
      try {
        prompt = render(s.question, s.pseudo_answer, template_id);
      } catch (const ValidationError& e) {
        throw ValidationError(fmt::format("sample '{}': {}", s.sample_id, e.what()));
      }
      writer.write_row({s.sample_id, prompt});
    }
  });
  prov.outputs.push_back(out);
}

InferStageResult stage_infer(const fs::path& dataset, const fs::path& prompts_path,
                             const InferStageOptions& options,
                             const fs::path& out, Provenance& prov) {
  const auto samples = load_dataset(dataset, prov);
  const auto prompts = load_prompts(prompts_path, prov);

  std::vector<GroundingRequest> requests;
  std::vector<std::string> missing;
  for (const auto& s : samples) {
    auto it = prompts.find(s.sample_id);
    if (it == prompts.end()) {
      missing.push_back(s.sample_id);
      continue;
    }
    requests.push_back({s.sample_id, s.image_url, it->second});
  }
  if (!missing.empty()) throw MissingIdsError("prompts missing", std::move(missing));

  std::vector<GroundingResponse> responses;
  if (options.model == ModelKind::kMock) {
    std::map<std::string, BBox> truth;
    for (const auto& s : samples) {
      if (!s.gt_box) {
        throw ValidationError(fmt::format(
            "mock model needs ground truth; sample '{}' has none", s.sample_id));
      }
      truth.emplace(s.sample_id, *s.gt_box);
    }
    for (const auto& r : requests) {
      responses.push_back(mock_ground(r, truth, options.noise, options.seed));
    }
  } else {
    responses = run_external(requests, options.command, options.work_dir);
  }

  auto converted = responses_to_predictions(responses, samples, options.source);
  write_file(out, [&](std::ostream& os) { write_predictions(converted.predictions, os); });
  prov.outputs.push_back(out);
  return {converted.predictions.size(), converted.degenerate};
}

json stats_to_json(const PostprocessStats& s) {
  json j = {{"samples", s.samples},
            {"folds", s.folds},
            {"replace_attempts", s.replace_attempts},
            {"replacements", s.replacements},
            {"replacement_rate", s.replacement_rate},
            {"images_without_candidates", s.images_without_candidates},
            {"outside_image", s.outside_image}};
  j["mean_fold_disagreement_iou"] =
      s.mean_fold_disagreement_iou ? json(*s.mean_fold_disagreement_iou) : json(nullptr);
  return j;
}

PostprocessResult stage_postprocess(const fs::path& dataset,
                                    const std::vector<fs::path>& folds,
                                    const std::vector<fs::path>& candidates,
                                    const PostprocessConfig& config,
                                    const fs::path& out,
                                    const fs::path& stats_out,
                                    Provenance& prov) {
  const auto samples = load_dataset(dataset, prov);
  std::vector<std::vector<Prediction>> fold_preds;
  for (const auto& f : folds) fold_preds.push_back(load_predictions(f, prov));
  const auto sets = build_candidate_sets(load_detections(candidates, prov));

  auto result = run_postprocess(samples, fold_preds, sets, config);
  write_file(out, [&](std::ostream& os) { write_predictions(result.predictions, os); });
  write_file(stats_out, [&](std::ostream& os) {
    os << stats_to_json(result.stats).dump(2) << '\n';
  });
  prov.outputs.push_back(out);
  prov.outputs.push_back(stats_out);
  return result;
}

ScoreReport stage_score(const fs::path& dataset, const fs::path& predictions,
                        const std::optional<fs::path>& report_out,
                        Provenance& prov) {
  const auto samples = load_dataset(dataset, prov);
  const auto preds = load_predictions(predictions, prov);
  auto report = score(preds, samples);
  if (report_out) {
    write_file(*report_out, [&](std::ostream& os) { write_score_report(report, os); });
    prov.outputs.push_back(*report_out);
  }
  return report;
}

}  // namespace vqg::cli
