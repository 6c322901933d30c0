#pragma once

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <mutex>
#include <optional>
#include <semaphore>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "vqg/geometry.hpp"

namespace vqg {

// Reads width and height from a PNG, JPEG, GIF, BMP or WebP header. Returns
// nullopt for anything else or a truncated header.
std::optional<ImageDims> probe_image_dims(std::string_view bytes);

enum class DimsCheck { kOff, kWarn, kStrict };

struct FetchPolicy {
  int max_retries = 3;  // total attempts before giving up
  std::chrono::milliseconds initial_backoff{1000};  // doubles per retry
  DimsCheck dims_check = DimsCheck::kWarn;
  std::size_t max_in_flight = 8;
  std::chrono::seconds timeout{60};
};

struct HttpResponse {
  long status = 0;  // 0 when the transfer itself failed
  std::string body;
  std::string error;
};

// One HTTP GET, following redirects.
using HttpTransport = std::function<HttpResponse(const std::string& url)>;

HttpTransport curl_transport(std::chrono::seconds timeout);

struct FetchResult {
  std::filesystem::path path;
  bool cache_hit = false;
  int attempts = 0;
  std::optional<std::string> warning;
};

struct FetchRequest {
  std::string url;
  std::optional<ImageDims> expected;
};

struct FetchOutcome {
  std::string url;
  std::optional<FetchResult> result;
  std::string error;  // set when result is empty
};

// Content-addressed on-disk image cache. Files are named by the SHA-256 of
// their URL; index.tsv maps each hash back to its URL. Safe for concurrent
// fetches from multiple threads; writes land via temp file + rename.
class ImageCache {
 public:
  explicit ImageCache(std::filesystem::path dir, FetchPolicy policy = {},
                      HttpTransport transport = {});

  // $VQG_CACHE_DIR, else $XDG_CACHE_HOME/vqg/images, else ~/.cache/vqg/images.
  static std::filesystem::path default_dir();

  const std::filesystem::path& dir() const noexcept { return dir_; }
  std::filesystem::path path_for(std::string_view url) const;

  // Throws FetchError after policy.max_retries failed attempts and
  // ValidationError on a strict dimension mismatch.
  FetchResult fetch(const std::string& url,
                    std::optional<ImageDims> expected = std::nullopt);

  // Fetches every request with at most policy.max_in_flight transfers at once.
  // Outcomes are returned in request order; failures do not stop the batch.
  std::vector<FetchOutcome> fetch_all(std::span<const FetchRequest> requests);

 private:
  std::optional<std::string> check_dims(const std::string& url,
                                        const std::filesystem::path& path,
                                        const std::optional<ImageDims>& expected) const;
  // Returns true when this call created the cache file.
  bool store(const std::string& url, const std::filesystem::path& target,
             const std::string& bytes);
  FetchResult fetch_unindexed(const std::string& url,
                              const std::optional<ImageDims>& expected,
                              bool& stored);
  void append_index(std::span<const std::string> urls);

  std::filesystem::path dir_;
  FetchPolicy policy_;
  HttpTransport transport_;
  std::counting_semaphore<> in_flight_;
  std::mutex store_mutex_;
};

}  // namespace vqg
