#pragma once

// Dataset preparation: random crops, instance filtering, train/test splits,
// and a synthetic cell generator with known ground truth.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <random>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "cellseg/error.hpp"
#include "cellseg/morphology.hpp"
#include "cellseg/raster.hpp"

namespace cellseg {

/// FNV-1a; stable across platforms so string ids can key random streams.
inline std::uint64_t stable_hash(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Engine keyed by (seed, stream, index). The same key yields the same
/// sequence no matter which thread asks or in which order.
inline std::mt19937_64 keyed_engine(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  return std::mt19937_64(seq);
}

/// Uniform integer in [0, bound). Distribution objects are not portable
/// across standard libraries, so draw by rejection from raw engine output.
inline std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t bound) {
  if (bound == 0) throw Error(ErrorCode::InvalidArgument, "uniform_below(0)");
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t v = 0;
  do {
    v = rng();
  } while (v >= limit);
  return v % bound;
}

inline std::int64_t uniform_between(std::mt19937_64& rng, std::int64_t lo, std::int64_t hi) {
  return lo + static_cast<std::int64_t>(uniform_below(rng, static_cast<std::uint64_t>(hi - lo + 1)));
}

// ---------------------------------------------------------------------------
// Cropping

struct CropSpec {
  std::size_t count = 5;
  std::size_t size = 512;
  std::uint64_t seed = 0;
};

struct CropOffset {
  std::size_t index;
  std::size_t x;
  std::size_t y;

  friend bool operator==(const CropOffset&, const CropOffset&) = default;
};

/// Top-left corners of `spec.count` square windows inside a width x height
/// image, drawn uniformly over every valid position. Paired images (raw +
/// labels) share these offsets.
inline std::vector<CropOffset> crop_offsets(std::size_t width, std::size_t height, const CropSpec& spec,
                                            std::string_view image_id) {
  if (spec.count == 0) throw Error(ErrorCode::InvalidArgument, "crop count must be >= 1");
  if (spec.size == 0 || spec.size > width || spec.size > height) {
    throw Error(ErrorCode::CropTooLarge, "crop size " + std::to_string(spec.size) + " does not fit in " +
                                             std::to_string(width) + "x" + std::to_string(height));
  }
  const std::uint64_t stream = stable_hash(image_id);
  std::vector<CropOffset> out;
  out.reserve(spec.count);
  for (std::size_t k = 0; k < spec.count; ++k) {
    auto rng = keyed_engine(spec.seed, stream, k);
    const std::size_t x = uniform_below(rng, width - spec.size + 1);
    const std::size_t y = uniform_below(rng, height - spec.size + 1);
    out.push_back({k, x, y});
  }
  return out;
}

template <typename T>
struct Crop {
  CropOffset offset;
  Image<T> image;
};

template <typename T>
std::vector<Crop<T>> random_crops(const Image<T>& img, const CropSpec& spec, std::string_view image_id) {
  std::vector<Crop<T>> out;
  for (const CropOffset& o : crop_offsets(img.width(), img.height(), spec, image_id)) {
    out.push_back({o, crop(img, o.x, o.y, spec.size, spec.size)});
  }
  return out;
}

inline bool has_instances(const LabelMap& labels) {
  for (Label l : labels) {
    if (l != 0) return true;
  }
  return false;
}

// ---------------------------------------------------------------------------
// Splits

struct Split {
  std::vector<std::string> train;
  std::vector<std::string> test;
};

/// Seeded Fisher-Yates shuffle, then the first `train_count` ids train.
inline Split split_train_test(std::vector<std::string> ids, std::size_t train_count, std::uint64_t seed) {
  if (train_count > ids.size()) {
    throw Error(ErrorCode::BadCount, "train count " + std::to_string(train_count) + " exceeds " +
                                         std::to_string(ids.size()) + " ids");
  }
  auto rng = keyed_engine(seed, stable_hash("split"), 0);
  for (std::size_t i = ids.size(); i > 1; --i) {
    const std::size_t j = uniform_below(rng, i);
    std::swap(ids[i - 1], ids[j]);
  }
  Split s;
  s.train.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(train_count));
  s.test.assign(ids.begin() + static_cast<std::ptrdiff_t>(train_count), ids.end());
  return s;
}

// ---------------------------------------------------------------------------
// Synthetic instances

enum class OverlapPolicy { TouchingAllowed, Disjoint };

struct SynthSpec {
  std::size_t width = 512;
  std::size_t height = 512;
  std::size_t cells = 30;
  int min_radius = 14;
  int max_radius = 24;
  // Accepted range of each cell's distance-map peak; radii whose disc peak
  // falls outside are never drawn.
  double min_peak = 0.0;
  double max_peak = std::numeric_limits<double>::infinity();
  OverlapPolicy policy = OverlapPolicy::TouchingAllowed;
  std::uint64_t seed = 0;
};

struct SynthResult {
  LabelMap labels;
  Raster distance;
  BinaryMask semantic;
};

/// Digital disc of radius r: offsets with dx^2 + dy^2 <= r^2.
inline std::vector<detail::Offset> disc_offsets(int r) {
  std::vector<detail::Offset> out;
  for (int dy = -r; dy <= r; ++dy) {
    for (int dx = -r; dx <= r; ++dx) {
      if (dx * dx + dy * dy <= r * r) out.push_back({dx, dy});
    }
  }
  return out;
}

/// Distance-map peak of an isolated disc of radius r.
inline double disc_peak(int r) {
  const auto side = static_cast<std::size_t>(2 * r + 1);
  LabelMap l(side, side, 0);
  for (const auto& o : disc_offsets(r)) l(static_cast<std::size_t>(r + o.dx), static_cast<std::size_t>(r + o.dy)) = 1;
  const Raster d = distance_map(l);
  return *std::max_element(d.begin(), d.end());
}

inline constexpr int kPlacementAttempts = 1000;

/// Places `cells` non-overlapping discs. With TouchingAllowed, half of the
/// attempts aim the new disc right next to an existing one so touching
/// pairs are common; Disjoint keeps a one-pixel gap around every cell.
inline SynthResult synth_instances(const SynthSpec& spec) {
  if (spec.min_radius < 2 || spec.max_radius < spec.min_radius) {
    throw Error(ErrorCode::InvalidArgument, "radius range must satisfy 2 <= min <= max");
  }
  if (static_cast<std::size_t>(2 * spec.max_radius + 1) > std::min(spec.width, spec.height)) {
    throw Error(ErrorCode::InvalidArgument, "largest disc does not fit in the canvas");
  }
  std::vector<int> radii;
  for (int r = spec.min_radius; r <= spec.max_radius; ++r) {
    const double peak = disc_peak(r);
    if (peak >= spec.min_peak && peak <= spec.max_peak) radii.push_back(r);
  }
  if (radii.empty()) throw Error(ErrorCode::InvalidArgument, "no radius in range yields a peak inside the peak range");

  LabelMap labels(spec.width, spec.height, 0);
  struct Placed {
    std::int64_t cx, cy;
    int r;
  };
  std::vector<Placed> placed;
  const auto w = static_cast<std::int64_t>(spec.width);
  const auto h = static_cast<std::int64_t>(spec.height);
  std::map<int, std::vector<detail::Offset>> discs;
  for (int r : radii) discs[r] = disc_offsets(r);

  auto fits = [&](std::int64_t cx, std::int64_t cy, int r) {
    if (cx - r < 0 || cy - r < 0 || cx + r >= w || cy + r >= h) return false;
    const int guard = spec.policy == OverlapPolicy::Disjoint ? 1 : 0;
    for (const auto& o : discs[r]) {
      for (int gy = -guard; gy <= guard; ++gy) {
        for (int gx = -guard; gx <= guard; ++gx) {
          const std::int64_t x = cx + o.dx + gx;
          const std::int64_t y = cy + o.dy + gy;
          if (x < 0 || y < 0 || x >= w || y >= h) continue;
          if (labels(static_cast<std::size_t>(x), static_cast<std::size_t>(y)) != 0) return false;
        }
      }
    }
    return true;
  };

  const std::uint64_t stream = stable_hash("synth");
  for (std::size_t k = 0; k < spec.cells; ++k) {
    auto rng = keyed_engine(spec.seed, stream, k);
    bool done = false;
    for (int attempt = 0; attempt < kPlacementAttempts && !done; ++attempt) {
      const int r = radii[uniform_below(rng, radii.size())];
      std::int64_t cx = 0;
      std::int64_t cy = 0;
      if (spec.policy == OverlapPolicy::TouchingAllowed && !placed.empty() && (rng() & 1)) {
        const Placed& anchor = placed[uniform_below(rng, placed.size())];
        // Point on the circle of radius r_anchor + r + 1 around the anchor;
        // sqrt is correctly rounded, unlike the trig functions.
        const std::int64_t reach = anchor.r + r + 1;
        const std::int64_t dx = uniform_between(rng, -reach, reach);
        const auto dy = static_cast<std::int64_t>(std::llround(std::sqrt(static_cast<double>(reach * reach - dx * dx))));
        cx = anchor.cx + dx;
        cy = anchor.cy + ((rng() & 1) ? dy : -dy);
      } else {
        cx = uniform_between(rng, r, w - 1 - r);
        cy = uniform_between(rng, r, h - 1 - r);
      }
      if (!fits(cx, cy, r)) continue;
      const auto label = static_cast<Label>(k + 1);
      for (const auto& o : discs[r]) labels(static_cast<std::size_t>(cx + o.dx), static_cast<std::size_t>(cy + o.dy)) = label;
      placed.push_back({cx, cy, r});
      done = true;
    }
    if (!done) {
      throw Error(ErrorCode::PlacementFailure, "could not place cell " + std::to_string(k + 1) + " of " +
                                                   std::to_string(spec.cells) + " in " +
                                                   std::to_string(kPlacementAttempts) + " attempts");
    }
  }

  SynthResult out;
  out.distance = distance_map(labels);
  out.semantic = foreground(labels);
  out.labels = std::move(labels);
  return out;
}

/// Encodes a mask as saturated logits (+40 foreground, -40 background).
inline Raster saturated_logits(const BinaryMask& mask, Sample magnitude = 40.0f) {
  Raster out(mask.width(), mask.height());
  for (std::size_t i = 0; i < mask.size(); ++i) out[i] = mask[i] ? magnitude : -magnitude;
  return out;
}

}  // namespace cellseg
