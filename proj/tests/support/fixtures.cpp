#include "fixtures.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>
#include <unistd.h>

#include "vqg/rng.hpp"

namespace fs = std::filesystem;

namespace vqg::fixture {
namespace {

BBox random_box(Rng& rng, const ImageDims& dims, int min_side) {
  const int w = static_cast<int>(rng.uniform_int(min_side, dims.width() / 2));
  const int h = static_cast<int>(rng.uniform_int(min_side, dims.height() / 2));
  const int l = static_cast<int>(rng.uniform_int(0, dims.width() - w));
  const int t = static_cast<int>(rng.uniform_int(0, dims.height() - h));
  return BBox(l, t, l + w, t + h);
}

ImageDims random_dims(Rng& rng) {
  return ImageDims(static_cast<int>(rng.uniform_int(120, 320)),
                   static_cast<int>(rng.uniform_int(100, 240)));
}

const char* kWords[] = {"What", "Where", "Which", "Who", "Find"};

std::string random_question(Rng& rng, int i) {
  std::string q = kWords[rng.uniform_index(5)];
  const auto extra = rng.uniform_int(1, 8);
  for (int k = 0; k < extra; ++k) q += " w" + std::to_string(rng.uniform_index(30));
  return q + " item" + std::to_string(i) + "?";
}

template <typename F>
void write(const fs::path& path, F&& body) {
  std::ofstream out(path, std::ios::binary);
  body(out);
}

}  // namespace

World make_world(const fs::path& dir, const WorldOptions& o) {
  fs::create_directories(dir);
  World w;
  w.dir = dir;
  w.vocabulary = {"clock", "vase", "cup", "chair", "dog", "roll paper", "book", "lamp"};
  Rng rng(o.seed);

  for (int i = 0; i < o.n_eval; ++i) {
    const auto dims = random_dims(rng);
    Sample s{"e" + std::to_string(i), "https://img.test/eval/" + std::to_string(i) + ".jpg",
             random_question(rng, i), dims, random_box(rng, dims, 30), std::nullopt};
    w.eval_candidates.push_back({s.image_url, "gt", "object", 0.95, *s.gt_box});
    for (int k = 0; k < 2; ++k) {
      w.eval_candidates.push_back({s.image_url, "noise", "object",
                                   static_cast<double>(rng.uniform_int(1, 9)) / 10,
                                   random_box(rng, dims, 10)});
    }
    w.eval.push_back(std::move(s));
  }
  for (int i = 0; i < o.n_train; ++i) {
    const auto dims = random_dims(rng);
    w.train.push_back({"t" + std::to_string(i),
                       "https://img.test/train/" + std::to_string(i) + ".jpg",
                       random_question(rng, i), dims, random_box(rng, dims, 10),
                       std::nullopt});
  }
  // The last training sample shares an image with the eval set and must be
  // kept out of every coarse-tuning artifact.
  if (!w.train.empty() && !w.eval.empty()) {
    w.train.back().image_url = w.eval.front().image_url;
    w.train.back().dims = w.eval.front().dims;
    w.train.back().gt_box = w.eval.front().gt_box;
  }

  for (int i = 0; i < o.n_pool; ++i) {
    w.pool.push_back({"https://img.test/pool/" + std::to_string(i) + ".jpg", random_dims(rng)});
  }
  for (const auto& e : w.eval) w.pool.push_back({e.image_url, e.dims});
  for (const auto& p : w.pool) {
    const auto n = rng.uniform_int(1, 5);
    for (int k = 0; k < n; ++k) {
      w.pool_detections.push_back(
          {p.image_ref, k % 2 ? "vitdet" : "yolor",
           w.vocabulary[rng.uniform_index(w.vocabulary.size())],
           static_cast<double>(rng.uniform_int(1, 100)) / 100, random_box(rng, p.dims, 5)});
    }
  }

  write(dir / "eval.tsv", [&](std::ostream& os) { write_dataset(w.eval, os); });
  write(dir / "train.tsv", [&](std::ostream& os) { write_dataset(w.train, os); });
  write(dir / "pool.tsv", [&](std::ostream& os) { write_image_pool(w.pool, os); });
  write(dir / "pool_detections.tsv",
        [&](std::ostream& os) { write_detections(w.pool_detections, os); });
  write(dir / "eval_candidates.tsv",
        [&](std::ostream& os) { write_detections(w.eval_candidates, os); });

  nlohmann::json config = {
      {"seed", o.seed},
      {"template", "t2"},
      {"folds", o.folds},
      {"n_target", o.n_target},
      {"mock_vocabulary", w.vocabulary},
      {"model", {{"kind", "mock"}, {"noise", o.noise}}},
      {"paths",
       {{"train", "train.tsv"},
        {"pool", "pool.tsv"},
        {"pool_detections", "pool_detections.tsv"},
        {"eval", "eval.tsv"},
        {"candidates", "eval_candidates.tsv"}}}};
  write(dir / "config.json", [&](std::ostream& os) { os << config.dump(2) << '\n'; });
  return w;
}

fs::path scratch_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() /
                   ("vqg-" + name + "-" + std::to_string(::getpid()));
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace vqg::fixture
