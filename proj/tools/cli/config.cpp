#include "cli/config.hpp"

#include <fstream>

#include <fmt/format.h>

namespace vqg::cli {

namespace fs = std::filesystem;
using nlohmann::json;

FuseOrder parse_fuse_order(const std::string& text) {
  if (text == "replace_then_fuse") return FuseOrder::kReplaceThenFuse;
  if (text == "fuse_then_replace") return FuseOrder::kFuseThenReplace;
  throw UsageError(fmt::format(
      "unknown fuse order '{}' (replace_then_fuse|fuse_then_replace)", text));
}

std::string fuse_order_name(FuseOrder order) {
  return order == FuseOrder::kReplaceThenFuse ? "replace_then_fuse"
                                              : "fuse_then_replace";
}

void RunConfig::validate() const {
  auto open_unit = [](double v, const char* name) {
    if (!(v > 0.0 && v < 1.0)) {
      throw UsageError(fmt::format("{} must be in (0,1), got {}", name, v));
    }
  };
  open_unit(replace_threshold, "replace_threshold");
  open_unit(fuse_threshold, "fuse_threshold");
  if (folds < 1) throw UsageError(fmt::format("folds must be >= 1, got {}", folds));
  if (noise < 0.0) throw UsageError("noise must be >= 0");
  if (jobs < 1) throw UsageError("jobs must be >= 1");
  if (model == ModelKind::kExternal && command.empty()) {
    throw UsageError("external model needs a command template");
  }
}

std::optional<fs::path> RunConfig::path(const std::string& key) const {
  auto it = paths.find(key);
  if (it == paths.end()) return std::nullopt;
  return it->second;
}

RunConfig config_from_json(const json& j, const fs::path& base_dir) {
  RunConfig c;
  auto resolve = [&](const std::string& p) {
    fs::path path(p);
    return path.is_absolute() ? path : (base_dir / path).lexically_normal();
  };
  try {
    c.seed = j.value("seed", c.seed);
    if (j.contains("template")) {
      const auto text = j.at("template").get<std::string>();
      auto id = parse_template_id(text);
      if (!id) throw UsageError(fmt::format("unknown template '{}'", text));
      c.template_id = *id;
    }
    c.replace_threshold = j.value("replace_threshold", c.replace_threshold);
    c.fuse_threshold = j.value("fuse_threshold", c.fuse_threshold);
    if (j.contains("fuse_order")) {
      c.fuse_order = parse_fuse_order(j.at("fuse_order").get<std::string>());
    }
    c.folds = j.value("folds", c.folds);
    c.postprocess = j.value("postprocess", c.postprocess);
    c.n_target = j.value("n_target", c.n_target);
    c.jobs = j.value("jobs", c.jobs);
    c.mock_vocabulary = j.value("mock_vocabulary", c.mock_vocabulary);

    if (j.contains("model")) {
      const auto& m = j.at("model");
      const auto kind = m.value("kind", std::string("mock"));
      if (kind == "mock") {
        c.model = ModelKind::kMock;
      } else if (kind == "external") {
        c.model = ModelKind::kExternal;
      } else {
        throw UsageError(fmt::format("unknown model kind '{}'", kind));
      }
      c.noise = m.value("noise", c.noise);
      c.command = m.value("command", c.command);
    }

    if (j.contains("paths")) {
      for (const auto& [key, value] : j.at("paths").items()) {
        if (key == "candidates") {
          if (value.is_string()) {
            c.candidates.push_back(resolve(value.get<std::string>()));
          } else {
            for (const auto& p : value) c.candidates.push_back(resolve(p.get<std::string>()));
          }
        } else {
          c.paths[key] = resolve(value.get<std::string>());
        }
      }
    }
  } catch (const json::exception& e) {
    throw UsageError(fmt::format("bad config: {}", e.what()));
  }
  return c;
}

RunConfig load_config(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw UsageError(fmt::format("cannot open config {}", file.string()));
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw UsageError(fmt::format("config {}: {}", file.string(), e.what()));
  }
  return config_from_json(j, fs::absolute(file).parent_path());
}

json config_to_json(const RunConfig& c) {
  json paths = json::object();
  for (const auto& [key, p] : c.paths) paths[key] = p.string();
  if (!c.candidates.empty()) {
    json list = json::array();
    for (const auto& p : c.candidates) list.push_back(p.string());
    paths["candidates"] = list;
  }
  json model = {{"kind", c.model == ModelKind::kMock ? "mock" : "external"},
                {"noise", c.noise}};
  if (!c.command.empty()) model["command"] = c.command;
  return {{"seed", c.seed},
          {"template", std::string(template_name(c.template_id))},
          {"replace_threshold", c.replace_threshold},
          {"fuse_threshold", c.fuse_threshold},
          {"fuse_order", fuse_order_name(c.fuse_order)},
          {"folds", c.folds},
          {"postprocess", c.postprocess},
          {"n_target", c.n_target},
          {"mock_vocabulary", c.mock_vocabulary},
          {"model", model},
          {"paths", paths}};
}

}  // namespace vqg::cli
