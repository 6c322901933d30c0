#include "vqg/image_cache.hpp"

#include <atomic>
#include <cstdlib>
#include <fstream>
#include <memory>
#include <mutex>
#include <sstream>
#include <thread>

#include <unistd.h>

#include <curl/curl.h>
#include <fmt/format.h>

#include "vqg/digest.hpp"
#include "vqg/error.hpp"
#include "vqg/rng.hpp"

namespace fs = std::filesystem;

namespace vqg {
namespace {

std::size_t append_body(char* data, std::size_t size, std::size_t n,
                        void* user) {
  static_cast<std::string*>(user)->append(data, size * n);
  return size * n;
}

struct CurlDeleter {
  void operator()(CURL* h) const noexcept { curl_easy_cleanup(h); }
};

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string read_header(const fs::path& path, std::size_t limit) {
  std::ifstream in(path, std::ios::binary);
  std::string buf(limit, '\0');
  in.read(buf.data(), static_cast<std::streamsize>(limit));
  buf.resize(static_cast<std::size_t>(in.gcount()));
  return buf;
}

}  // namespace

HttpTransport curl_transport(std::chrono::seconds timeout) {
  static std::once_flag init;
  std::call_once(init, [] { curl_global_init(CURL_GLOBAL_DEFAULT); });
  return [timeout](const std::string& url) {
    HttpResponse resp;
    std::unique_ptr<CURL, CurlDeleter> h(curl_easy_init());
    if (!h) {
      resp.error = "curl_easy_init failed";
      return resp;
    }
    curl_easy_setopt(h.get(), CURLOPT_URL, url.c_str());
    curl_easy_setopt(h.get(), CURLOPT_HTTPGET, 1L);
    curl_easy_setopt(h.get(), CURLOPT_FOLLOWLOCATION, 1L);
    curl_easy_setopt(h.get(), CURLOPT_MAXREDIRS, 10L);
    curl_easy_setopt(h.get(), CURLOPT_NOSIGNAL, 1L);
    curl_easy_setopt(h.get(), CURLOPT_TIMEOUT, static_cast<long>(timeout.count()));
    curl_easy_setopt(h.get(), CURLOPT_WRITEFUNCTION, &append_body);
    curl_easy_setopt(h.get(), CURLOPT_WRITEDATA, &resp.body);
    const CURLcode rc = curl_easy_perform(h.get());
    if (rc != CURLE_OK) {
      resp.error = curl_easy_strerror(rc);
      resp.body.clear();
      return resp;
    }
    curl_easy_getinfo(h.get(), CURLINFO_RESPONSE_CODE, &resp.status);
    return resp;
  };
}

ImageCache::ImageCache(fs::path dir, FetchPolicy policy, HttpTransport transport)
    : dir_(std::move(dir)),
      policy_(policy),
      transport_(transport ? std::move(transport)
                           : curl_transport(policy.timeout)),
      in_flight_(static_cast<std::ptrdiff_t>(std::max<std::size_t>(1, policy.max_in_flight))) {
  if (policy_.max_retries < 1) {
    throw ValidationError("fetch policy needs at least one attempt");
  }
  fs::create_directories(dir_);
}

fs::path ImageCache::default_dir() {
  if (const char* env = std::getenv("VQG_CACHE_DIR"); env && *env) return env;
  if (const char* xdg = std::getenv("XDG_CACHE_HOME"); xdg && *xdg) {
    return fs::path(xdg) / "vqg" / "images";
  }
  if (const char* home = std::getenv("HOME"); home && *home) {
    return fs::path(home) / ".cache" / "vqg" / "images";
  }
  return fs::path(".vqg-cache") / "images";
}

fs::path ImageCache::path_for(std::string_view url) const {
  return dir_ / sha256_hex(url);
}

std::optional<std::string> ImageCache::check_dims(
    const std::string& url, const fs::path& path,
    const std::optional<ImageDims>& expected) const {
  if (!expected || policy_.dims_check == DimsCheck::kOff) return std::nullopt;
  // Large enough for JPEG files with sizeable EXIF blocks ahead of SOF.
  auto actual = probe_image_dims(read_header(path, 1 << 20));
  if (!actual) actual = probe_image_dims(read_file(path));
  std::string problem;
  if (!actual) {
    problem = fmt::format("{}: cannot read image dimensions", url);
  } else if (*actual != *expected) {
    problem = fmt::format("{}: image is {}x{}, expected {}x{}", url,
                          actual->width(), actual->height(), expected->width(),
                          expected->height());
  } else {
    return std::nullopt;
  }
  if (policy_.dims_check == DimsCheck::kStrict) throw ValidationError(problem);
  return problem;
}

bool ImageCache::store(const std::string& url, const fs::path& target,
                       const std::string& bytes) {
  const auto tag = fnv1a64(fmt::format(
      "{}-{}", ::getpid(),
      std::hash<std::thread::id>{}(std::this_thread::get_id())));
  const fs::path tmp =
      dir_ / fmt::format(".tmp-{}-{:016x}", target.filename().string(), tag);
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw FetchError(url, "cannot write cache file");
  }
  std::lock_guard lock(store_mutex_);
  if (fs::exists(target)) {
    fs::remove(tmp);
    return false;
  }
  fs::rename(tmp, target);
  return true;
}

// Index lines are appended by the caller so that a batch lands in request
// order whatever order its transfers finish in.
void ImageCache::append_index(std::span<const std::string> urls) {
  if (urls.empty()) return;
  std::lock_guard lock(store_mutex_);
  std::ofstream index(dir_ / "index.tsv", std::ios::app);
  for (const auto& url : urls) index << sha256_hex(url) << '\t' << url << '\n';
}

FetchResult ImageCache::fetch(const std::string& url,
                              std::optional<ImageDims> expected) {
  bool stored = false;
  try {
    auto result = fetch_unindexed(url, expected, stored);
    if (stored) append_index(std::span<const std::string>(&url, 1));
    return result;
  } catch (...) {
    // A strict size check can fail after the file landed.
    if (stored) append_index(std::span<const std::string>(&url, 1));
    throw;
  }
}

FetchResult ImageCache::fetch_unindexed(const std::string& url,
                                        const std::optional<ImageDims>& expected,
                                        bool& stored) {
  if (url.empty()) throw FetchError(url, "empty url");
  FetchResult result;
  result.path = path_for(url);
  if (fs::exists(result.path)) {
    result.cache_hit = true;
    result.warning = check_dims(url, result.path, expected);
    return result;
  }

  in_flight_.acquire();
  struct Release {
    std::counting_semaphore<>& s;
    ~Release() { s.release(); }
  } release{in_flight_};

  auto backoff = policy_.initial_backoff;
  std::string last_error;
  for (int attempt = 1; attempt <= policy_.max_retries; ++attempt) {
    result.attempts = attempt;
    HttpResponse resp = transport_(url);
    if (resp.status >= 200 && resp.status < 300) {
      stored = store(url, result.path, resp.body);
      result.warning = check_dims(url, result.path, expected);
      return result;
    }
    last_error = resp.status != 0 ? fmt::format("HTTP {}", resp.status)
                                  : resp.error;
    if (attempt < policy_.max_retries) {
      std::this_thread::sleep_for(backoff);
      backoff *= 2;
    }
  }
  throw FetchError(url, fmt::format("{} after {} attempt(s)", last_error,
                                    policy_.max_retries));
}

std::vector<FetchOutcome> ImageCache::fetch_all(
    std::span<const FetchRequest> requests) {
  std::vector<FetchOutcome> outcomes(requests.size());
  auto stored = std::make_unique<bool[]>(requests.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < requests.size(); i = next++) {
      outcomes[i].url = requests[i].url;
      try {
        outcomes[i].result =
            fetch_unindexed(requests[i].url, requests[i].expected, stored[i]);
      } catch (const std::exception& e) {
        outcomes[i].error = e.what();
      }
    }
  };
  const std::size_t n_workers =
      std::min(requests.size(), std::max<std::size_t>(1, policy_.max_in_flight));
  {
    std::vector<std::jthread> workers;
    workers.reserve(n_workers);
    for (std::size_t i = 0; i < n_workers; ++i) workers.emplace_back(worker);
  }
  std::vector<std::string> new_urls;
  for (std::size_t i = 0; i < requests.size(); ++i) {
    if (stored[i]) new_urls.push_back(requests[i].url);
  }
  append_index(new_urls);
  return outcomes;
}

}  // namespace vqg
