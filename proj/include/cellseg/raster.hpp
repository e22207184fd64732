#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cellseg/error.hpp"

namespace cellseg {

/// Dense 2-D image, row-major, origin at the top-left, y growing downward.
///
/// The pixel type decides the role: `Raster` holds real samples
/// (intensities, logits, distances), `LabelMap` holds instance ids with 0 as
/// background, `BinaryMask` holds 0/1 foreground flags.
template <typename T>
class Image {
 public:
  using value_type = T;

  Image() = default;

  Image(std::size_t width, std::size_t height, T fill = T{})
      : width_(width), height_(height), data_(checked_area(width, height), fill) {}

  Image(std::size_t width, std::size_t height, std::vector<T> data)
      : width_(width), height_(height), data_(std::move(data)) {
    if (data_.size() != checked_area(width, height)) {
      throw Error(ErrorCode::InvalidArgument,
                  "sample count " + std::to_string(data_.size()) + " does not match " +
                      std::to_string(width) + "x" + std::to_string(height));
    }
  }

  std::size_t width() const noexcept { return width_; }
  std::size_t height() const noexcept { return height_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  T& operator()(std::size_t x, std::size_t y) { return data_[y * width_ + x]; }
  const T& operator()(std::size_t x, std::size_t y) const { return data_[y * width_ + x]; }
  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  std::span<T> pixels() noexcept { return data_; }
  std::span<const T> pixels() const noexcept { return data_; }
  const std::vector<T>& data() const noexcept { return data_; }

  auto begin() noexcept { return data_.begin(); }
  auto end() noexcept { return data_.end(); }
  auto begin() const noexcept { return data_.begin(); }
  auto end() const noexcept { return data_.end(); }

  template <typename U>
  bool same_shape(const Image<U>& other) const noexcept {
    return width_ == other.width() && height_ == other.height();
  }

  friend bool operator==(const Image&, const Image&) = default;

 private:
  static std::size_t checked_area(std::size_t width, std::size_t height) {
    if (width == 0 || height == 0) {
      throw Error(ErrorCode::InvalidArgument, "image dimensions must be >= 1");
    }
    // Linear indices are carried as uint32 in the flooding queues.
    constexpr std::size_t kMaxPixels = std::numeric_limits<std::uint32_t>::max();
    if (width > kMaxPixels / height) {
      throw Error(ErrorCode::DimensionOverflow,
                  std::to_string(width) + "x" + std::to_string(height) + " exceeds addressable size");
    }
    return width * height;
  }

  std::size_t width_ = 0;
  std::size_t height_ = 0;
  std::vector<T> data_;
};

using Sample = float;
using Label = std::uint32_t;

using Raster = Image<Sample>;
using LabelMap = Image<Label>;
using BinaryMask = Image<std::uint8_t>;

/// Ordered focal planes of one field of view.
class ZStack {
 public:
  ZStack() = default;
  explicit ZStack(std::vector<Raster> planes) : planes_(std::move(planes)) {
    for (const auto& p : planes_) {
      if (!p.same_shape(planes_.front())) {
        throw Error(ErrorCode::DimensionMismatch, "z-stack planes differ in size");
      }
    }
  }

  const std::vector<Raster>& planes() const noexcept { return planes_; }
  std::size_t depth() const noexcept { return planes_.size(); }

 private:
  std::vector<Raster> planes_;
};

template <typename A, typename B>
void require_same_shape(const Image<A>& a, const Image<B>& b, const char* what) {
  if (!a.same_shape(b)) {
    throw Error(ErrorCode::DimensionMismatch,
                std::string(what) + ": " + std::to_string(a.width()) + "x" + std::to_string(a.height()) +
                    " vs " + std::to_string(b.width()) + "x" + std::to_string(b.height()));
  }
}

inline bool all_finite(const Raster& r) {
  return std::all_of(r.begin(), r.end(), [](Sample v) { return std::isfinite(v); });
}

/// Sorted distinct positive labels.
inline std::vector<Label> distinct_labels(const LabelMap& labels) {
  std::set<Label> seen;
  for (Label l : labels) {
    if (l != 0) seen.insert(l);
  }
  return {seen.begin(), seen.end()};
}

inline std::size_t count_instances(const LabelMap& labels) { return distinct_labels(labels).size(); }

inline BinaryMask foreground(const LabelMap& labels) {
  BinaryMask mask(labels.width(), labels.height());
  for (std::size_t i = 0; i < labels.size(); ++i) mask[i] = labels[i] != 0 ? 1 : 0;
  return mask;
}

inline BinaryMask nonzero(const Raster& r) {
  BinaryMask mask(r.width(), r.height());
  for (std::size_t i = 0; i < r.size(); ++i) mask[i] = r[i] != 0.0f ? 1 : 0;
  return mask;
}

template <typename T>
Raster to_raster(const Image<T>& img) {
  Raster out(img.width(), img.height());
  for (std::size_t i = 0; i < img.size(); ++i) out[i] = static_cast<Sample>(img[i]);
  return out;
}

/// Element-wise maximum over the planes of a stack.
inline Raster max_project(const ZStack& stack) {
  if (stack.depth() == 0) throw Error(ErrorCode::EmptyStack, "max_project needs at least one plane");
  Raster out = stack.planes().front();
  for (std::size_t k = 1; k < stack.depth(); ++k) {
    const Raster& plane = stack.planes()[k];
    require_same_shape(out, plane, "max_project");
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::max(out[i], plane[i]);
  }
  return out;
}

inline Raster max_project(std::vector<Raster> planes) { return max_project(ZStack(std::move(planes))); }

/// Copy of the w x h window whose top-left corner is (x0, y0).
template <typename T>
Image<T> crop(const Image<T>& img, std::size_t x0, std::size_t y0, std::size_t w, std::size_t h) {
  if (x0 + w > img.width() || y0 + h > img.height()) {
    throw Error(ErrorCode::CropTooLarge, "crop window leaves the image");
  }
  Image<T> out(w, h);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) out(x, y) = img(x0 + x, y0 + y);
  }
  return out;
}

}  // namespace cellseg
