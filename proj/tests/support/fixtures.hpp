#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "vqg/corpus.hpp"

namespace vqg::fixture {

// A small synthetic world written to disk:
//   eval.tsv             evaluation set with ground truth ("test public")
//   eval_candidates.tsv  detector boxes on eval images; the ground-truth box
//                        is the top candidate of each image
//   train.tsv            training set without pseudo answers
//   pool.tsv             image pool; also lists every eval image
//   pool_detections.tsv  detections on every pool image
//   config.json          mock-model pipeline config over the files above
struct World {
  std::filesystem::path dir;
  std::vector<Sample> eval;
  std::vector<Sample> train;
  std::vector<PoolImage> pool;
  std::vector<Detection> pool_detections;
  std::vector<Detection> eval_candidates;
  std::vector<std::string> vocabulary;
};

struct WorldOptions {
  int n_eval = 40;
  int n_train = 60;
  int n_pool = 200;
  std::uint64_t seed = 1;
  double noise = 0.0;
  int folds = 3;
  std::size_t n_target = 100;
};

World make_world(const std::filesystem::path& dir, const WorldOptions& options = {});

// Fresh empty directory under the system temp dir.
std::filesystem::path scratch_dir(const std::string& name);

std::string read_file(const std::filesystem::path& path);

}  // namespace vqg::fixture
