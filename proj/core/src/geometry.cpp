#include "vqg/geometry.hpp"

#include <algorithm>

#include <fmt/format.h>

#include "vqg/error.hpp"

namespace vqg {

ImageDims::ImageDims(int width, int height) : width_(width), height_(height) {
  if (width < 1 || height < 1) {
    throw ValidationError(
        fmt::format("image dims must be positive, got {}x{}", width, height));
  }
}

bool BBox::is_valid(int left, int top, int right, int bottom) noexcept {
  return left >= 0 && top >= 0 && left < right && top < bottom;
}

BBox::BBox(int left, int top, int right, int bottom)
    : left_(left), top_(top), right_(right), bottom_(bottom) {
  if (!is_valid(left, top, right, bottom)) {
    throw ValidationError(fmt::format("invalid box ({},{},{},{})", left, top,
                                      right, bottom));
  }
}

std::optional<BBox> BBox::try_make(int left, int top, int right,
                                   int bottom) noexcept {
  if (!is_valid(left, top, right, bottom)) return std::nullopt;
  return BBox(left, top, right, bottom);
}

std::ostream& operator<<(std::ostream& os, const BBox& b) {
  return os << '(' << b.left() << ',' << b.top() << ',' << b.right() << ','
            << b.bottom() << ')';
}

std::int64_t area(const BBox& b) noexcept {
  return static_cast<std::int64_t>(b.width()) * b.height();
}

std::int64_t intersection_area(const BBox& a, const BBox& b) noexcept {
  const std::int64_t w = std::min(a.right(), b.right()) -
                         static_cast<std::int64_t>(std::max(a.left(), b.left()));
  const std::int64_t h = std::min(a.bottom(), b.bottom()) -
                         static_cast<std::int64_t>(std::max(a.top(), b.top()));
  if (w <= 0 || h <= 0) return 0;
  return w * h;
}

double iou(const BBox& a, const BBox& b) noexcept {
  const std::int64_t inter = intersection_area(a, b);
  if (inter == 0) return 0.0;
  const std::int64_t uni = area(a) + area(b) - inter;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

std::optional<BBox> clamp_to_image(const RawBox& raw,
                                   const ImageDims& dims) noexcept {
  const int left = std::clamp(raw.left, 0, dims.width());
  const int right = std::clamp(raw.right, 0, dims.width());
  const int top = std::clamp(raw.top, 0, dims.height());
  const int bottom = std::clamp(raw.bottom, 0, dims.height());
  return BBox::try_make(left, top, right, bottom);
}

}  // namespace vqg
