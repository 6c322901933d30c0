#include <cstdint>
#include <cstdlib>

#include "vqg/image_cache.hpp"

namespace vqg {
namespace {

std::uint32_t be16(std::string_view b, std::size_t at) {
  return (std::uint32_t{static_cast<unsigned char>(b[at])} << 8) |
         static_cast<unsigned char>(b[at + 1]);
}
std::uint32_t be32(std::string_view b, std::size_t at) {
  return (be16(b, at) << 16) | be16(b, at + 2);
}
std::uint32_t le16(std::string_view b, std::size_t at) {
  return (std::uint32_t{static_cast<unsigned char>(b[at + 1])} << 8) |
         static_cast<unsigned char>(b[at]);
}
std::uint32_t le24(std::string_view b, std::size_t at) {
  return le16(b, at) | (std::uint32_t{static_cast<unsigned char>(b[at + 2])} << 16);
}
std::uint32_t le32(std::string_view b, std::size_t at) {
  return le16(b, at) | (le16(b, at + 2) << 16);
}

std::optional<ImageDims> make_dims(std::int64_t w, std::int64_t h) {
  if (w < 1 || h < 1 || w > INT32_MAX || h > INT32_MAX) return std::nullopt;
  return ImageDims(static_cast<int>(w), static_cast<int>(h));
}

std::optional<ImageDims> probe_jpeg(std::string_view b) {
  std::size_t i = 2;
  while (i + 4 <= b.size()) {
    if (static_cast<unsigned char>(b[i]) != 0xFF) return std::nullopt;
    const auto marker = static_cast<unsigned char>(b[i + 1]);
    if (marker == 0xFF) {  // fill byte
      ++i;
      continue;
    }
    if (marker == 0x01 || (marker >= 0xD0 && marker <= 0xD9)) {
      i += 2;
      continue;
    }
    const std::uint32_t len = be16(b, i + 2);
    const bool is_sof = marker >= 0xC0 && marker <= 0xCF && marker != 0xC4 &&
                        marker != 0xC8 && marker != 0xCC;
    if (is_sof) {
      if (i + 9 > b.size()) return std::nullopt;
      return make_dims(be16(b, i + 7), be16(b, i + 5));
    }
    i += 2 + len;
  }
  return std::nullopt;
}

std::optional<ImageDims> probe_webp(std::string_view b) {
  if (b.size() < 30) return std::nullopt;
  const auto chunk = b.substr(12, 4);
  if (chunk == "VP8X") return make_dims(le24(b, 24) + 1, le24(b, 27) + 1);
  if (chunk == "VP8L") {
    if (static_cast<unsigned char>(b[20]) != 0x2F) return std::nullopt;
    const std::uint32_t bits = le32(b, 21);
    return make_dims((bits & 0x3FFF) + 1, ((bits >> 14) & 0x3FFF) + 1);
  }
  if (chunk == "VP8 ") {
    return make_dims(le16(b, 26) & 0x3FFF, le16(b, 28) & 0x3FFF);
  }
  return std::nullopt;
}

}  // namespace

std::optional<ImageDims> probe_image_dims(std::string_view b) {
  if (b.size() >= 24 && b.substr(0, 8) == "\x89PNG\r\n\x1a\n" &&
      b.substr(12, 4) == "IHDR") {
    return make_dims(be32(b, 16), be32(b, 20));
  }
  if (b.size() >= 4 && static_cast<unsigned char>(b[0]) == 0xFF &&
      static_cast<unsigned char>(b[1]) == 0xD8) {
    return probe_jpeg(b);
  }
  if (b.size() >= 10 && (b.substr(0, 6) == "GIF87a" || b.substr(0, 6) == "GIF89a")) {
    return make_dims(le16(b, 6), le16(b, 8));
  }
  if (b.size() >= 26 && b.substr(0, 2) == "BM") {
    const auto h = static_cast<std::int32_t>(le32(b, 22));
    return make_dims(static_cast<std::int32_t>(le32(b, 18)), std::llabs(h));
  }
  if (b.size() >= 12 && b.substr(0, 4) == "RIFF" && b.substr(8, 4) == "WEBP") {
    return probe_webp(b);
  }
  return std::nullopt;
}

}  // namespace vqg
