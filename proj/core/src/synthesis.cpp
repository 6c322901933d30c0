#include "vqg/synthesis.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <sstream>

#include <fmt/format.h>

#include "vqg/error.hpp"
#include "vqg/table.hpp"
#include "vqg/text.hpp"

namespace vqg {

// ---- pseudo-answer table --------------------------------------------------

bool PseudoAnswerTable::add(std::string_view pseudo_answer,
                            const std::string& question) {
  std::string key = normalize_label(pseudo_answer);
  if (key.empty()) throw ValidationError("empty pseudo answer");
  if (trim(question).empty()) throw ValidationError("empty question");
  auto& list = entries_[std::move(key)];
  if (std::find(list.begin(), list.end(), question) != list.end()) return false;
  list.push_back(question);
  return true;
}

bool PseudoAnswerTable::contains(std::string_view pseudo_answer) const {
  return entries_.find(pseudo_answer) != entries_.end();
}

const std::vector<std::string>* PseudoAnswerTable::questions(
    std::string_view pseudo_answer) const {
  auto it = entries_.find(pseudo_answer);
  return it == entries_.end() ? nullptr : &it->second;
}

PseudoAnswerTable build_table(std::span<const Sample> samples) {
  PseudoAnswerTable table;
  for (const auto& s : samples) {
    if (!s.pseudo_answer || s.pseudo_answer->empty()) {
      throw ValidationError(
          fmt::format("sample '{}' has no pseudo answer", s.sample_id));
    }
    table.add(*s.pseudo_answer, s.question);
  }
  return table;
}

void write_answer_table(const PseudoAnswerTable& table, std::ostream& out) {
  const std::vector<std::string> header = {"pseudo_answer", "question"};
  TableWriter writer(out, Delimiter::kTab, header);
  for (const auto& [answer, questions] : table.entries()) {
    for (const auto& q : questions) writer.write_row({answer, q});
  }
}

PseudoAnswerTable read_answer_table(std::istream& in) {
  TableReader reader(in);
  const std::size_t answer_col = reader.require_column("pseudo_answer");
  const std::size_t question_col = reader.require_column("question");
  PseudoAnswerTable table;
  TableRow row;
  while (reader.next(row)) {
    reader.expect_arity(row);
    try {
      table.add(row.fields[answer_col], row.fields[question_col]);
    } catch (const ValidationError& e) {
      throw ParseError(row.line, "", e.what());
    }
  }
  return table;
}

// ---- selection ------------------------------------------------------------

bool detection_rank_less(const Detection& a, const Detection& b) {
  if (a.confidence != b.confidence) return a.confidence > b.confidence;
  if (a.class_name != b.class_name) return a.class_name < b.class_name;
  if (area(a.box) != area(b.box)) return area(a.box) > area(b.box);
  if (a.box != b.box) return a.box < b.box;
  return a.detector < b.detector;
}

std::optional<Detection> select_object(std::span<const Detection> detections,
                                       const PseudoAnswerTable& table) {
  const auto counts = class_counts(detections);
  std::vector<const Detection*> ranked;
  ranked.reserve(detections.size());
  for (const auto& d : detections) ranked.push_back(&d);
  std::sort(ranked.begin(), ranked.end(),
            [](const Detection* a, const Detection* b) {
              return detection_rank_less(*a, *b);
            });
  for (const Detection* d : ranked) {
    if (counts.at(d->class_name) == 1 && table.contains(d->class_name)) {
      return *d;
    }
  }
  return std::nullopt;
}

std::optional<SyntheticSample> synthesize(
    std::string_view image_ref, std::span<const Detection> detections,
    const PseudoAnswerTable& table, Rng& rng) {
  auto chosen = select_object(detections, table);
  if (!chosen) return std::nullopt;
  const auto& questions = *table.questions(chosen->class_name);
  const auto pick = rng.uniform_index(questions.size());
  return SyntheticSample{std::string(image_ref),
                         questions[pick],
                         chosen->class_name,
                         chosen->box,
                         std::nullopt,
                         {chosen->detector, chosen->confidence, 0, ""}};
}

// ---- forging --------------------------------------------------------------

ForgeResult forge_dataset(
    std::span<const PoolImage> pool,
    const std::map<std::string, std::vector<Detection>>& detections_by_image,
    const PseudoAnswerTable& table, const ForgeOptions& options) {
  std::vector<const PoolImage*> eligible;
  eligible.reserve(pool.size());
  for (const auto& img : pool) {
    if (!options.exclusion.contains(img.image_ref)) eligible.push_back(&img);
  }
  std::sort(eligible.begin(), eligible.end(),
            [](const PoolImage* a, const PoolImage* b) {
              return a->image_ref < b->image_ref;
            });
  eligible.erase(std::unique(eligible.begin(), eligible.end(),
                             [](const PoolImage* a, const PoolImage* b) {
                               return a->image_ref == b->image_ref;
                             }),
                 eligible.end());

  Rng order_rng = Rng::derive(options.seed, std::string_view("forge/order"));
  order_rng.shuffle(std::span<const PoolImage*>(eligible));

  ForgeResult result;
  result.eligible_images = eligible.size();

  auto run_one = [&](const PoolImage* img) -> std::optional<SyntheticSample> {
    auto it = detections_by_image.find(img->image_ref);
    if (it == detections_by_image.end()) return std::nullopt;
    for (const auto& d : it->second) {
      if (!d.box.fits_within(img->dims)) {
        throw ValidationError(fmt::format(
            "detection {} on {} exceeds image {}x{}", d.class_name,
            img->image_ref, img->dims.width(), img->dims.height()));
      }
    }
    Rng rng = Rng::derive(options.seed, std::string_view(img->image_ref));
    auto sample = synthesize(img->image_ref, it->second, table, rng);
    if (sample) {
      sample->dims = img->dims;
      sample->provenance.seed = options.seed;
      sample->provenance.stream = img->image_ref;
    }
    return sample;
  };

  const std::size_t jobs = std::max(1u, options.jobs);
  const std::size_t batch = jobs == 1 ? 1 : jobs * 16;
  std::size_t cursor = 0;
  while (result.samples.size() < options.n_target && cursor < eligible.size()) {
    const std::size_t end = std::min(eligible.size(), cursor + batch);
    std::vector<std::optional<SyntheticSample>> out(end - cursor);
    if (jobs == 1) {
      for (std::size_t i = cursor; i < end; ++i) out[i - cursor] = run_one(eligible[i]);
    } else {
      std::vector<std::future<void>> tasks;
      const std::size_t per = (end - cursor + jobs - 1) / jobs;
      for (std::size_t lo = cursor; lo < end; lo += per) {
        const std::size_t hi = std::min(end, lo + per);
        tasks.push_back(std::async(std::launch::async, [&, lo, hi] {
          for (std::size_t i = lo; i < hi; ++i) out[i - cursor] = run_one(eligible[i]);
        }));
      }
      for (auto& t : tasks) t.get();
    }
    for (auto& s : out) {
      if (result.samples.size() == options.n_target) break;
      ++result.images_visited;
      if (s) result.samples.push_back(std::move(*s));
    }
    cursor = end;
  }
  result.shortfall = options.n_target - result.samples.size();
  return result;
}

std::vector<Sample> to_samples(std::span<const SyntheticSample> synthetic) {
  std::vector<Sample> out;
  out.reserve(synthetic.size());
  for (std::size_t i = 0; i < synthetic.size(); ++i) {
    const auto& s = synthetic[i];
    if (!s.dims) {
      throw ValidationError(
          fmt::format("synthetic sample on '{}' has no image dims", s.image_ref));
    }
    out.push_back(Sample{fmt::format("syn-{}", i), s.image_ref, s.question,
                         *s.dims, s.target_box, s.pseudo_answer});
  }
  return out;
}

// ---- back translation -----------------------------------------------------

BackTranslationResult apply_back_translation(const PseudoAnswerTable& table,
                                             const Augmentation& augmentation) {
  // question -> answers listing it, taken before any paraphrase is added
  std::map<std::string, std::vector<std::string>> owners;
  for (const auto& [answer, questions] : table.entries()) {
    for (const auto& q : questions) owners[q].push_back(answer);
  }
  BackTranslationResult result{table, 0};
  for (const auto& [original, paraphrases] : augmentation) {
    auto it = owners.find(original);
    if (it == owners.end()) {
      result.skipped += paraphrases.size();
      continue;
    }
    for (const auto& answer : it->second) {
      for (const auto& p : paraphrases) result.table.add(answer, p);
    }
  }
  return result;
}

// ---- distribution report --------------------------------------------------

namespace {

constexpr std::size_t kAreaBins = 10;
constexpr std::size_t kAspectBins = 10;
constexpr std::size_t kLengthBins = 20;

std::optional<double> l1_distance(const std::vector<std::size_t>& a,
                                  const std::vector<std::size_t>& b) {
  std::size_t na = 0, nb = 0;
  for (auto v : a) na += v;
  for (auto v : b) nb += v;
  if (na == 0 || nb == 0) return std::nullopt;
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sum += std::abs(static_cast<double>(a[i]) / static_cast<double>(na) -
                    static_cast<double>(b[i]) / static_cast<double>(nb));
  }
  return sum;
}

}  // namespace

std::size_t area_ratio_bin(const BBox& box, const ImageDims& dims) {
  const double ratio =
      static_cast<double>(area(box)) / static_cast<double>(dims.area());
  const auto bin = static_cast<std::size_t>(std::floor(ratio * kAreaBins));
  return std::min(bin, kAreaBins - 1);
}

std::size_t aspect_ratio_bin(const BBox& box) {
  // log2 of the ratio spans [-3, 3]; each bin covers 0.6 in log space.
  const double lg = std::log2(static_cast<double>(box.width()) / box.height());
  const double pos = (lg + 3.0) / 6.0 * kAspectBins;
  if (pos <= 0.0) return 0;
  return std::min(static_cast<std::size_t>(std::floor(pos)), kAspectBins - 1);
}

std::size_t question_length_bin(std::string_view question) {
  std::size_t tokens = 0;
  bool in_token = false;
  for (char c : question) {
    const bool space = c == ' ' || c == '\t' || c == '\n' || c == '\r';
    if (!space && !in_token) ++tokens;
    in_token = !space;
  }
  return std::clamp<std::size_t>(tokens, 1, kLengthBins) - 1;
}

DistributionReport distribution_report(std::span<const SyntheticSample> synthetic,
                                       std::span<const Sample> reference) {
  HistogramComparison areas{"box_area_ratio", {}, std::vector<std::size_t>(kAreaBins),
                            std::vector<std::size_t>(kAreaBins), {}};
  HistogramComparison aspects{"box_aspect_ratio", {}, std::vector<std::size_t>(kAspectBins),
                              std::vector<std::size_t>(kAspectBins), {}};
  HistogramComparison lengths{"question_tokens", {}, std::vector<std::size_t>(kLengthBins),
                              std::vector<std::size_t>(kLengthBins), {}};

  for (std::size_t i = 0; i < kAreaBins; ++i) {
    areas.bin_labels.push_back(fmt::format("[{:.1f},{:.1f})", i / 10.0, (i + 1) / 10.0));
  }
  for (std::size_t i = 0; i < kAspectBins; ++i) {
    aspects.bin_labels.push_back(fmt::format(
        "[{:.3g},{:.3g})", std::exp2(-3.0 + 0.6 * i), std::exp2(-3.0 + 0.6 * (i + 1))));
  }
  for (std::size_t i = 1; i <= kLengthBins; ++i) {
    lengths.bin_labels.push_back(i == kLengthBins ? "20+" : std::to_string(i));
  }

  for (const auto& s : synthetic) {
    if (s.dims) ++areas.synthetic[area_ratio_bin(s.target_box, *s.dims)];
    ++aspects.synthetic[aspect_ratio_bin(s.target_box)];
    ++lengths.synthetic[question_length_bin(s.question)];
  }
  for (const auto& s : reference) {
    if (s.gt_box) {
      ++areas.reference[area_ratio_bin(*s.gt_box, s.dims)];
      ++aspects.reference[aspect_ratio_bin(*s.gt_box)];
    }
    ++lengths.reference[question_length_bin(s.question)];
  }

  DistributionReport report;
  for (auto* h : {&areas, &aspects, &lengths}) {
    h->l1 = l1_distance(h->synthetic, h->reference);
    report.histograms.push_back(std::move(*h));
  }
  return report;
}

std::string format_distribution_report(const DistributionReport& report) {
  std::ostringstream out;
  for (const auto& h : report.histograms) {
    out << h.name << "  L1="
        << (h.l1 ? fmt::format("{:.4f}", *h.l1) : std::string("n/a")) << '\n';
    for (std::size_t i = 0; i < h.bin_labels.size(); ++i) {
      out << fmt::format("  {:>16}  {:>8}  {:>8}\n", h.bin_labels[i],
                         h.synthetic[i], h.reference[i]);
    }
  }
  return out.str();
}

}  // namespace vqg
