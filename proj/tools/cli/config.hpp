#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "vqg/postprocess.hpp"
#include "vqg/prompting.hpp"

namespace vqg::cli {

// Bad flags, bad config values, unusable combinations. Exit status 2.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class ModelKind { kMock, kExternal };

struct RunConfig {
  std::uint64_t seed = 0;
  TemplateId template_id = kDefaultTemplate;
  double replace_threshold = kDefaultReplaceThreshold;
  double fuse_threshold = kDefaultFuseThreshold;
  FuseOrder fuse_order = FuseOrder::kReplaceThenFuse;
  int folds = 1;
  bool postprocess = true;
  std::size_t n_target = 0;
  unsigned jobs = 1;

  ModelKind model = ModelKind::kMock;
  double noise = 0.0;
  std::string command;  // external model command template

  std::vector<std::string> mock_vocabulary;

  // Named input locations, resolved against the config file's directory.
  // Keys: train, pseudo_answers, augmentation, pool, pool_detections, eval,
  // eval_pseudo_answers. "candidates" may list several files.
  std::map<std::string, std::filesystem::path> paths;
  std::vector<std::filesystem::path> candidates;

  // Throws UsageError when an invariant is broken.
  void validate() const;

  std::optional<std::filesystem::path> path(const std::string& key) const;
};

RunConfig load_config(const std::filesystem::path& file);
RunConfig config_from_json(const nlohmann::json& j,
                           const std::filesystem::path& base_dir);
// Paths are written as given (already resolved); used for run manifests.
nlohmann::json config_to_json(const RunConfig& config);

FuseOrder parse_fuse_order(const std::string& text);
std::string fuse_order_name(FuseOrder order);

}  // namespace vqg::cli
