#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <ostream>

namespace vqg {

// Image size in pixels. Both sides are at least one.
class ImageDims {
 public:
  ImageDims(int width, int height);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::int64_t area() const noexcept {
    return static_cast<std::int64_t>(width_) * height_;
  }

  friend bool operator==(const ImageDims&, const ImageDims&) = default;

 private:
  int width_;
  int height_;
};

// Unvalidated integer quad as emitted by a model or read from a file.
struct RawBox {
  int left = 0;
  int top = 0;
  int right = 0;
  int bottom = 0;

  friend bool operator==(const RawBox&, const RawBox&) = default;
};

// Integer pixel rectangle covering the half-open region
// [left, right) x [top, bottom). A constructed BBox always has non-negative
// coordinates and strictly positive area.
class BBox {
 public:
  // Throws ValidationError when the quad is not a valid box.
  BBox(int left, int top, int right, int bottom);

  static std::optional<BBox> try_make(int left, int top, int right,
                                      int bottom) noexcept;
  static bool is_valid(int left, int top, int right, int bottom) noexcept;

  int left() const noexcept { return left_; }
  int top() const noexcept { return top_; }
  int right() const noexcept { return right_; }
  int bottom() const noexcept { return bottom_; }
  int width() const noexcept { return right_ - left_; }
  int height() const noexcept { return bottom_ - top_; }

  RawBox raw() const noexcept { return {left_, top_, right_, bottom_}; }

  bool fits_within(const ImageDims& dims) const noexcept {
    return right_ <= dims.width() && bottom_ <= dims.height();
  }
  bool contains(const BBox& other) const noexcept {
    return left_ <= other.left_ && top_ <= other.top_ &&
           right_ >= other.right_ && bottom_ >= other.bottom_;
  }

  friend bool operator==(const BBox&, const BBox&) = default;
  friend auto operator<=>(const BBox&, const BBox&) = default;

 private:
  int left_;
  int top_;
  int right_;
  int bottom_;
};

std::ostream& operator<<(std::ostream& os, const BBox& b);

std::int64_t area(const BBox& b) noexcept;

// Area of the overlap of two boxes, 0 when they are disjoint.
std::int64_t intersection_area(const BBox& a, const BBox& b) noexcept;

// Intersection over union. Areas are exact integers; the only rounding is the
// final division.
double iou(const BBox& a, const BBox& b) noexcept;

// Clips a raw quad to [0,width] x [0,height]. Returns nullopt when the clipped
// quad has zero area or is inverted.
std::optional<BBox> clamp_to_image(const RawBox& raw,
                                   const ImageDims& dims) noexcept;

}  // namespace vqg
