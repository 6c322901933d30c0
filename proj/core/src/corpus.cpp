#include "vqg/corpus.hpp"

#include <algorithm>
#include <array>

#include <fmt/format.h>

#include "vqg/error.hpp"
#include "vqg/rng.hpp"
#include "vqg/text.hpp"

namespace vqg {
namespace {

// Resolved header positions plus typed field access with row/column errors.
class RowView {
 public:
  RowView(const TableReader& reader, const TableRow& row)
      : reader_(reader), row_(row) {}

  const std::string& text(std::size_t col) const { return row_.fields[col]; }

  int integer(std::size_t col) const {
    auto v = parse_int(row_.fields[col]);
    if (!v) fail(col, fmt::format("'{}' is not an integer", row_.fields[col]));
    return *v;
  }

  double real(std::size_t col) const {
    auto v = parse_double(row_.fields[col]);
    if (!v) fail(col, fmt::format("'{}' is not a number", row_.fields[col]));
    return *v;
  }

  BBox box(const std::array<std::size_t, 4>& cols) const {
    const int l = integer(cols[0]);
    const int t = integer(cols[1]);
    const int r = integer(cols[2]);
    const int b = integer(cols[3]);
    if (l < 0) fail(cols[0], "negative coordinate");
    if (t < 0) fail(cols[1], "negative coordinate");
    if (r <= l) fail(cols[2], fmt::format("right {} <= left {}", r, l));
    if (b <= t) fail(cols[3], fmt::format("bottom {} <= top {}", b, t));
    return BBox(l, t, r, b);
  }

  [[noreturn]] void fail(std::size_t col, const std::string& what) const {
    throw ParseError(row_.line, reader_.header()[col], what);
  }
  [[noreturn]] void fail(const std::string& what) const {
    throw ParseError(row_.line, "", what);
  }

 private:
  const TableReader& reader_;
  const TableRow& row_;
};

std::array<std::size_t, 4> require_box_columns(const TableReader& reader) {
  return {reader.require_column("left"), reader.require_column("top"),
          reader.require_column("right"), reader.require_column("bottom")};
}

std::vector<std::string> box_fields(const BBox& b) {
  return {std::to_string(b.left()), std::to_string(b.top()),
          std::to_string(b.right()), std::to_string(b.bottom())};
}

}  // namespace

// ---- dataset --------------------------------------------------------------

std::vector<Sample> parse_dataset(std::istream& in) {
  TableReader reader(in);
  const auto id_col = reader.column("sample_id") ? reader.column("sample_id")
                                                 : reader.column("id");
  const std::size_t image_col = reader.require_column("image");
  const std::size_t question_col = reader.require_column("question");
  const std::size_t width_col = reader.require_column("width");
  const std::size_t height_col = reader.require_column("height");
  const auto pseudo_col = reader.column("pseudo_answer");

  const bool has_any_box = reader.column("left") || reader.column("top") ||
                           reader.column("right") || reader.column("bottom");
  std::array<std::size_t, 4> box_cols{};
  if (has_any_box) box_cols = require_box_columns(reader);

  std::vector<Sample> samples;
  TableRow row;
  std::size_t index = 0;
  while (reader.next(row)) {
    reader.expect_arity(row);
    RowView v(reader, row);

    const int width = v.integer(width_col);
    const int height = v.integer(height_col);
    if (width < 1) v.fail(width_col, "width must be positive");
    if (height < 1) v.fail(height_col, "height must be positive");
    ImageDims dims(width, height);

    const std::string& question = v.text(question_col);
    if (trim(question).empty()) v.fail(question_col, "empty question");

    std::optional<BBox> gt;
    if (has_any_box) {
      std::size_t empty = 0;
      for (auto c : box_cols) empty += trim(v.text(c)).empty() ? 1 : 0;
      if (empty != 0 && empty != 4) v.fail("partially filled box columns");
      if (empty == 0) {
        gt = v.box(box_cols);
        if (!gt->fits_within(dims)) {
          v.fail(fmt::format("box {},{},{},{} exceeds image {}x{}",
                             gt->left(), gt->top(), gt->right(), gt->bottom(),
                             width, height));
        }
      }
    }

    std::optional<std::string> pseudo;
    if (pseudo_col) {
      std::string answer = normalize_label(v.text(*pseudo_col));
      if (!answer.empty()) pseudo = std::move(answer);
    }

    std::string id = id_col ? v.text(*id_col) : std::to_string(index);
    if (id_col && trim(id).empty()) v.fail(*id_col, "empty sample id");

    samples.push_back(Sample{std::move(id), v.text(image_col), question, dims,
                             gt, std::move(pseudo)});
    ++index;
  }
  return samples;
}

void write_dataset(std::span<const Sample> samples, std::ostream& out,
                   Delimiter delimiter) {
  const bool with_box = std::any_of(samples.begin(), samples.end(),
                                    [](const Sample& s) { return s.gt_box; });
  const bool with_pseudo =
      std::any_of(samples.begin(), samples.end(),
                  [](const Sample& s) { return s.pseudo_answer; });

  std::vector<std::string> header = {"sample_id", "image", "question", "width",
                                     "height"};
  if (with_box) header.insert(header.end(), {"left", "top", "right", "bottom"});
  if (with_pseudo) header.push_back("pseudo_answer");

  TableWriter writer(out, delimiter, header);
  for (const auto& s : samples) {
    std::vector<std::string> row = {s.sample_id, s.image_url, s.question,
                                    std::to_string(s.dims.width()),
                                    std::to_string(s.dims.height())};
    if (with_box) {
      if (s.gt_box) {
        auto b = box_fields(*s.gt_box);
        row.insert(row.end(), b.begin(), b.end());
      } else {
        row.insert(row.end(), 4, std::string());
      }
    }
    if (with_pseudo) row.push_back(s.pseudo_answer.value_or(""));
    writer.write_row(row);
  }
}

// ---- detections -----------------------------------------------------------

void for_each_detection(std::istream& in,
                        const std::function<void(Detection&&)>& sink) {
  TableReader reader(in);
  const std::size_t ref_col = reader.require_column("image_ref");
  const std::size_t det_col = reader.require_column("detector");
  const std::size_t class_col = reader.require_column("class_name");
  const std::size_t conf_col = reader.require_column("confidence");
  const auto box_cols = require_box_columns(reader);

  TableRow row;
  while (reader.next(row)) {
    reader.expect_arity(row);
    RowView v(reader, row);
    const double conf = v.real(conf_col);
    if (conf < 0.0 || conf > 1.0) {
      v.fail(conf_col, fmt::format("confidence {} outside [0,1]",
                                   v.text(conf_col)));
    }
    std::string class_name = normalize_label(v.text(class_col));
    if (class_name.empty()) v.fail(class_col, "empty class name");
    if (v.text(ref_col).empty()) v.fail(ref_col, "empty image_ref");
    sink(Detection{v.text(ref_col), v.text(det_col), std::move(class_name),
                   conf, v.box(box_cols)});
  }
}

std::vector<Detection> parse_detections(std::istream& in) {
  std::vector<Detection> out;
  for_each_detection(in, [&](Detection&& d) { out.push_back(std::move(d)); });
  return out;
}

void write_detections(std::span<const Detection> detections,
                      std::ostream& out) {
  const std::vector<std::string> header = {
      "image_ref", "detector", "class_name", "confidence",
      "left",      "top",      "right",      "bottom"};
  TableWriter writer(out, Delimiter::kTab, header);
  for (const auto& d : detections) {
    std::vector<std::string> row = {d.image_ref, d.detector, d.class_name,
                                    format_double(d.confidence)};
    auto b = box_fields(d.box);
    row.insert(row.end(), b.begin(), b.end());
    writer.write_row(row);
  }
}

void check_detections_fit(std::span<const Detection> detections,
                          const std::map<std::string, ImageDims>& dims) {
  for (const auto& d : detections) {
    auto it = dims.find(d.image_ref);
    if (it != dims.end() && !d.box.fits_within(it->second)) {
      throw ValidationError(fmt::format(
          "detection {} on {} exceeds image {}x{}", d.class_name, d.image_ref,
          it->second.width(), it->second.height()));
    }
  }
}

std::map<std::string, int> class_counts(
    std::span<const Detection> detections) {
  std::map<std::string, int> counts;
  if (detections.empty()) return counts;
  const std::string& ref = detections.front().image_ref;
  for (const auto& d : detections) {
    if (d.image_ref != ref) {
      throw ValidationError(fmt::format(
          "class_counts: mixed image refs '{}' and '{}'", ref, d.image_ref));
    }
    ++counts[d.class_name];
  }
  return counts;
}

std::map<std::string, std::vector<Detection>> group_by_image(
    std::vector<Detection> detections) {
  std::map<std::string, std::vector<Detection>> groups;
  for (auto& d : detections) {
    auto& bucket = groups[d.image_ref];
    bucket.push_back(std::move(d));
  }
  return groups;
}

// ---- predictions ----------------------------------------------------------

std::vector<Prediction> read_predictions(std::istream& in) {
  TableReader reader(in);
  const std::size_t id_col = reader.require_column("sample_id");
  const auto box_cols = require_box_columns(reader);
  const auto source_col = reader.column("source");

  std::vector<Prediction> out;
  TableRow row;
  while (reader.next(row)) {
    reader.expect_arity(row);
    RowView v(reader, row);
    if (v.text(id_col).empty()) v.fail(id_col, "empty sample id");
    out.push_back(Prediction{v.text(id_col), v.box(box_cols),
                             source_col ? v.text(*source_col) : std::string()});
  }
  return out;
}

void write_predictions(std::span<const Prediction> predictions,
                       std::ostream& out) {
  const std::vector<std::string> header = {"sample_id", "left",   "top",
                                           "right",     "bottom", "source"};
  TableWriter writer(out, Delimiter::kTab, header);
  for (const auto& p : predictions) {
    std::vector<std::string> row = {p.sample_id};
    auto b = box_fields(p.box);
    row.insert(row.end(), b.begin(), b.end());
    row.push_back(p.source);
    writer.write_row(row);
  }
}

// ---- folds ----------------------------------------------------------------

std::vector<std::string> SplitManifest::fold_members(int fold) const {
  std::vector<std::string> ids;
  for (const auto& [id, f] : assignments) {
    if (f == fold) ids.push_back(id);
  }
  return ids;
}

std::vector<std::size_t> SplitManifest::fold_sizes() const {
  std::vector<std::size_t> sizes(static_cast<std::size_t>(fold_count), 0);
  for (const auto& [id, f] : assignments) ++sizes[static_cast<std::size_t>(f)];
  return sizes;
}

SplitManifest split_folds(std::span<const std::string> sample_ids,
                          int fold_count, std::uint64_t seed,
                          const std::set<std::string>& exclusion) {
  if (fold_count < 2) {
    throw ValidationError(
        fmt::format("fold_count must be >= 2, got {}", fold_count));
  }
  std::vector<std::string> ids;
  ids.reserve(sample_ids.size());
  for (const auto& id : sample_ids) {
    if (!exclusion.contains(id)) ids.push_back(id);
  }
  std::sort(ids.begin(), ids.end());
  if (auto dup = std::adjacent_find(ids.begin(), ids.end()); dup != ids.end()) {
    throw ValidationError(fmt::format("duplicate sample id '{}'", *dup));
  }
  if (ids.size() < static_cast<std::size_t>(fold_count)) {
    throw ValidationError(fmt::format("{} ids cannot fill {} folds",
                                      ids.size(), fold_count));
  }

  Rng rng(seed);
  rng.shuffle(std::span<std::string>(ids));

  SplitManifest manifest;
  manifest.fold_count = fold_count;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    manifest.assignments.emplace(ids[i],
                                 static_cast<int>(i % static_cast<std::size_t>(fold_count)));
  }
  return manifest;
}

void write_split_manifest(const SplitManifest& manifest, std::ostream& out) {
  const std::vector<std::string> header = {"sample_id", "fold"};
  TableWriter writer(out, Delimiter::kTab, header);
  for (const auto& [id, fold] : manifest.assignments) {
    writer.write_row({id, std::to_string(fold)});
  }
}

SplitManifest read_split_manifest(std::istream& in) {
  TableReader reader(in);
  const std::size_t id_col = reader.require_column("sample_id");
  const std::size_t fold_col = reader.require_column("fold");

  SplitManifest manifest;
  TableRow row;
  while (reader.next(row)) {
    reader.expect_arity(row);
    RowView v(reader, row);
    const int fold = v.integer(fold_col);
    if (fold < 0) v.fail(fold_col, "negative fold index");
    if (!manifest.assignments.emplace(v.text(id_col), fold).second) {
      v.fail(id_col, fmt::format("duplicate sample id '{}'", v.text(id_col)));
    }
    manifest.fold_count = std::max(manifest.fold_count, fold + 1);
  }
  if (manifest.assignments.empty()) return manifest;
  const auto sizes = manifest.fold_sizes();
  const auto [lo, hi] = std::minmax_element(sizes.begin(), sizes.end());
  if (*lo == 0 || *hi - *lo > 1) {
    throw FormatError("split manifest folds are empty or unbalanced");
  }
  return manifest;
}

// ---- pseudo answers, augmentations, pools ---------------------------------

std::vector<PseudoAnswerRecord> read_pseudo_answers(std::istream& in) {
  TableReader reader(in);
  const std::size_t id_col = reader.require_column("sample_id");
  const std::size_t answer_col = reader.require_column("pseudo_answer");
  std::vector<PseudoAnswerRecord> out;
  TableRow row;
  while (reader.next(row)) {
    reader.expect_arity(row);
    RowView v(reader, row);
    std::string answer = normalize_label(v.text(answer_col));
    if (answer.empty()) v.fail(answer_col, "empty pseudo answer");
    out.push_back({v.text(id_col), std::move(answer)});
  }
  return out;
}

void write_pseudo_answers(std::span<const PseudoAnswerRecord> records,
                          std::ostream& out) {
  const std::vector<std::string> header = {"sample_id", "pseudo_answer"};
  TableWriter writer(out, Delimiter::kTab, header);
  for (const auto& r : records) writer.write_row({r.sample_id, r.pseudo_answer});
}

void attach_pseudo_answers(std::vector<Sample>& samples,
                           std::span<const PseudoAnswerRecord> records) {
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    index.emplace(samples[i].sample_id, i);
  }
  std::vector<std::string> unknown;
  for (const auto& r : records) {
    auto it = index.find(r.sample_id);
    if (it == index.end()) {
      unknown.push_back(r.sample_id);
      continue;
    }
    samples[it->second].pseudo_answer = r.pseudo_answer;
  }
  if (!unknown.empty()) {
    throw MissingIdsError("pseudo answers name unknown samples",
                          std::move(unknown));
  }
}

Augmentation read_augmentation(std::istream& in) {
  TableReader reader(in);
  const std::size_t orig_col = reader.require_column("original_question");
  const std::size_t para_col = reader.require_column("paraphrase");
  Augmentation aug;
  TableRow row;
  while (reader.next(row)) {
    reader.expect_arity(row);
    RowView v(reader, row);
    if (trim(v.text(para_col)).empty()) v.fail(para_col, "empty paraphrase");
    aug[v.text(orig_col)].push_back(v.text(para_col));
  }
  return aug;
}

void write_augmentation(const Augmentation& augmentation, std::ostream& out) {
  const std::vector<std::string> header = {"original_question", "paraphrase"};
  TableWriter writer(out, Delimiter::kTab, header);
  for (const auto& [question, paraphrases] : augmentation) {
    for (const auto& p : paraphrases) writer.write_row({question, p});
  }
}

std::vector<PoolImage> read_image_pool(std::istream& in) {
  TableReader reader(in);
  const std::size_t image_col = reader.require_column("image");
  const std::size_t width_col = reader.require_column("width");
  const std::size_t height_col = reader.require_column("height");
  std::vector<PoolImage> pool;
  TableRow row;
  while (reader.next(row)) {
    reader.expect_arity(row);
    RowView v(reader, row);
    const int w = v.integer(width_col);
    const int h = v.integer(height_col);
    if (w < 1) v.fail(width_col, "width must be positive");
    if (h < 1) v.fail(height_col, "height must be positive");
    if (v.text(image_col).empty()) v.fail(image_col, "empty image ref");
    pool.push_back({v.text(image_col), ImageDims(w, h)});
  }
  return pool;
}

void write_image_pool(std::span<const PoolImage> pool, std::ostream& out) {
  const std::vector<std::string> header = {"image", "width", "height"};
  TableWriter writer(out, Delimiter::kTab, header);
  for (const auto& p : pool) {
    writer.write_row({p.image_ref, std::to_string(p.dims.width()),
                      std::to_string(p.dims.height())});
  }
}

}  // namespace vqg
