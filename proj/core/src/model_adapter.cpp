#include "vqg/model_adapter.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>

#include <fcntl.h>
#include <sys/file.h>
#include <sys/wait.h>
#include <unistd.h>

#include <fmt/format.h>

#include "vqg/error.hpp"
#include "vqg/rng.hpp"
#include "vqg/table.hpp"
#include "vqg/text.hpp"

namespace fs = std::filesystem;

namespace vqg {
namespace {

std::string shell_quote(const std::string& s) {
  std::string out = "'";
  for (char c : s) {
    if (c == '\'') {
      out += "'\\''";
    } else {
      out.push_back(c);
    }
  }
  out.push_back('\'');
  return out;
}

std::string substitute(std::string command, std::string_view placeholder,
                       const std::string& value) {
  for (auto pos = command.find(placeholder); pos != std::string::npos;
       pos = command.find(placeholder, pos + value.size())) {
    command.replace(pos, placeholder.size(), value);
  }
  return command;
}

class FileLock {
 public:
  explicit FileLock(const fs::path& path)
      : fd_(::open(path.c_str(), O_CREAT | O_RDWR, 0644)) {
    if (fd_ < 0) throw Error(fmt::format("cannot open lock {}", path.string()));
    ::flock(fd_, LOCK_EX);
  }
  ~FileLock() {
    ::flock(fd_, LOCK_UN);
    ::close(fd_);
  }
  FileLock(const FileLock&) = delete;
  FileLock& operator=(const FileLock&) = delete;

 private:
  int fd_;
};

int checked_int(const TableRow& row, const TableReader& reader,
                std::size_t col) {
  auto v = parse_int(row.fields[col]);
  if (!v) {
    throw ParseError(row.line, reader.header()[col],
                     fmt::format("'{}' is not an integer", row.fields[col]));
  }
  return *v;
}

}  // namespace

void write_requests(std::span<const GroundingRequest> requests,
                    std::ostream& out) {
  const std::vector<std::string> header = {"sample_id", "image_path", "prompt"};
  TableWriter writer(out, Delimiter::kTab, header);
  for (const auto& r : requests) writer.write_row({r.sample_id, r.image, r.prompt});
}

std::vector<GroundingRequest> read_requests(std::istream& in) {
  TableReader reader(in);
  const std::size_t id_col = reader.require_column("sample_id");
  const std::size_t image_col = reader.require_column("image_path");
  const std::size_t prompt_col = reader.require_column("prompt");
  std::vector<GroundingRequest> out;
  TableRow row;
  while (reader.next(row)) {
    reader.expect_arity(row);
    if (row.fields[prompt_col].empty()) {
      throw ParseError(row.line, "prompt", "empty prompt");
    }
    out.push_back({row.fields[id_col], row.fields[image_col], row.fields[prompt_col]});
  }
  return out;
}

void write_responses(std::span<const GroundingResponse> responses,
                     std::ostream& out) {
  const std::vector<std::string> header = {"sample_id", "left", "top", "right",
                                           "bottom"};
  TableWriter writer(out, Delimiter::kTab, header);
  for (const auto& r : responses) {
    writer.write_row({r.sample_id, std::to_string(r.box.left),
                      std::to_string(r.box.top), std::to_string(r.box.right),
                      std::to_string(r.box.bottom)});
  }
}

std::vector<GroundingResponse> read_responses(std::istream& in) {
  TableReader reader(in);
  const std::size_t id_col = reader.require_column("sample_id");
  const std::array<std::size_t, 4> cols = {
      reader.require_column("left"), reader.require_column("top"),
      reader.require_column("right"), reader.require_column("bottom")};
  std::vector<GroundingResponse> out;
  TableRow row;
  while (reader.next(row)) {
    reader.expect_arity(row);
    out.push_back({row.fields[id_col],
                   RawBox{checked_int(row, reader, cols[0]),
                          checked_int(row, reader, cols[1]),
                          checked_int(row, reader, cols[2]),
                          checked_int(row, reader, cols[3])}});
  }
  return out;
}

std::vector<GroundingResponse> match_responses(
    std::span<const GroundingRequest> requests,
    std::vector<GroundingResponse> responses) {
  std::map<std::string, GroundingResponse*> by_id;
  std::set<std::string> requested;
  for (const auto& r : requests) requested.insert(r.sample_id);
  std::vector<std::string> unknown;
  for (auto& r : responses) {
    if (!requested.contains(r.sample_id)) {
      unknown.push_back(r.sample_id);
      continue;
    }
    if (!by_id.emplace(r.sample_id, &r).second) {
      throw ValidationError(
          fmt::format("duplicate response for sample '{}'", r.sample_id));
    }
  }
  if (!unknown.empty()) {
    throw MissingIdsError("responses do not echo any request", std::move(unknown));
  }
  std::vector<std::string> missing;
  std::vector<GroundingResponse> ordered;
  ordered.reserve(requests.size());
  for (const auto& req : requests) {
    auto it = by_id.find(req.sample_id);
    if (it == by_id.end()) {
      missing.push_back(req.sample_id);
    } else {
      ordered.push_back(std::move(*it->second));
    }
  }
  if (!missing.empty()) {
    throw MissingIdsError("responses missing", std::move(missing));
  }
  return ordered;
}

std::vector<GroundingResponse> run_external(
    std::span<const GroundingRequest> requests,
    const std::string& command_template, const fs::path& work_dir) {
  if (command_template.find("{in}") == std::string::npos ||
      command_template.find("{out}") == std::string::npos) {
    throw ValidationError("command template needs both {in} and {out}");
  }
  fs::create_directories(work_dir);
  const fs::path in_path = fs::absolute(work_dir / "requests.tsv");
  const fs::path out_path = fs::absolute(work_dir / "responses.tsv");
  FileLock lock(work_dir / ".responses.lock");

  {
    std::ofstream out(in_path, std::ios::binary | std::ios::trunc);
    write_requests(requests, out);
    if (!out) throw Error(fmt::format("cannot write {}", in_path.string()));
  }
  fs::remove(out_path);

  std::string command = substitute(command_template, "{in}", shell_quote(in_path.string()));
  command = substitute(command, "{out}", shell_quote(out_path.string()));

  std::string diagnostics;
  FILE* pipe = ::popen(("{\n" + command + "\n} 2>&1").c_str(), "r");
  if (!pipe) throw ExternalCommandError(-1, "", "cannot start external command");
  std::array<char, 4096> buf{};
  while (std::size_t n = std::fread(buf.data(), 1, buf.size(), pipe)) {
    diagnostics.append(buf.data(), n);
  }
  const int status = ::pclose(pipe);
  const int exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  if (exit_code != 0) {
    throw ExternalCommandError(
        exit_code, diagnostics,
        fmt::format("external command exited with status {}: {}", exit_code,
                    std::string(trim(diagnostics))));
  }

  std::ifstream in(out_path, std::ios::binary);
  if (!in) {
    throw ExternalCommandError(0, diagnostics,
                               "external command wrote no responses file");
  }
  return match_responses(requests, read_responses(in));
}

GroundingResponse mock_ground(const GroundingRequest& request,
                              const std::map<std::string, BBox>& ground_truth,
                              double noise, std::uint64_t seed) {
  auto it = ground_truth.find(request.sample_id);
  if (it == ground_truth.end()) {
    throw ValidationError(
        fmt::format("mock model has no ground truth for '{}'", request.sample_id));
  }
  if (!std::isfinite(noise) || noise < 0.0) {
    throw ValidationError(fmt::format("noise must be >= 0, got {}", noise));
  }
  const BBox& gt = it->second;
  const auto reach = static_cast<std::int64_t>(
      std::floor(noise * std::min(gt.width(), gt.height())));
  Rng rng = Rng::derive(seed, std::string_view(request.sample_id));
  auto jitter = [&](int v) {
    return static_cast<int>(v + rng.uniform_int(-reach, reach));
  };
  RawBox box;
  box.left = jitter(gt.left());
  box.top = jitter(gt.top());
  box.right = jitter(gt.right());
  box.bottom = jitter(gt.bottom());
  return {request.sample_id, box};
}

std::vector<PseudoAnswerRecord> mock_pseudo_answers(
    std::span<const Sample> samples, std::span<const std::string> vocabulary,
    std::uint64_t seed) {
  std::vector<std::string> words;
  for (const auto& w : vocabulary) {
    auto norm = normalize_label(w);
    if (!norm.empty()) words.push_back(std::move(norm));
  }
  if (words.empty()) throw ValidationError("mock vocabulary is empty");
  std::vector<PseudoAnswerRecord> out;
  out.reserve(samples.size());
  for (const auto& s : samples) {
    Rng rng = Rng::derive(seed, std::string_view(s.sample_id));
    out.push_back({s.sample_id, words[rng.uniform_index(words.size())]});
  }
  return out;
}

ResponseConversion responses_to_predictions(
    std::span<const GroundingResponse> responses,
    std::span<const Sample> samples, const std::string& source) {
  std::map<std::string, const Sample*> by_id;
  for (const auto& s : samples) by_id.emplace(s.sample_id, &s);
  ResponseConversion out;
  std::vector<std::string> unknown;
  for (const auto& r : responses) {
    auto it = by_id.find(r.sample_id);
    if (it == by_id.end()) {
      unknown.push_back(r.sample_id);
      continue;
    }
    const ImageDims& dims = it->second->dims;
    auto box = clamp_to_image(r.box, dims);
    if (!box) {
      ++out.degenerate;
      const int l = std::clamp(r.box.left, 0, dims.width() - 1);
      const int t = std::clamp(r.box.top, 0, dims.height() - 1);
      box = BBox(l, t, l + 1, t + 1);
    }
    out.predictions.push_back({r.sample_id, *box, source});
  }
  if (!unknown.empty()) {
    throw MissingIdsError("responses for unknown samples", std::move(unknown));
  }
  return out;
}

}  // namespace vqg
