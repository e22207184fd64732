#pragma once

// Instance post-processing: semantic threshold, h-maxima seeds on the
// distance prediction, then a seeded watershed restricted to the mask.

#include <cmath>
#include <cstdint>
#include <queue>
#include <vector>

#include "cellseg/error.hpp"
#include "cellseg/morphology.hpp"
#include "cellseg/raster.hpp"

namespace cellseg {

enum class Activation {
  Standard,  // 1 / (1 + exp(-v))
  Shifted,   // 1 / (1 + exp(-(v - 0.5)))
};

struct PipelineConfig {
  double h = 10.0;
  Activation activation = Activation::Standard;
  double semantic_threshold = 0.5;
  Connectivity connectivity = Connectivity::Eight;
  // Flood the h-maxima transformed map instead of the raw distance map.
  bool flood_on_hmax = false;

  void validate() const {
    if (!(h >= 0.0) || !std::isfinite(h)) throw Error(ErrorCode::NegativeH, "h must be a finite value >= 0");
    if (!(semantic_threshold > 0.0 && semantic_threshold < 1.0)) {
      throw Error(ErrorCode::InvalidArgument, "semantic threshold must lie in (0, 1)");
    }
  }
};

/// One label per connected seed plateau, dense 1..count.
struct SeedSet {
  LabelMap labels;
  std::size_t count = 0;
};

/// Raw-value cut equivalent to activation(v) >= threshold.
inline double activation_cutoff(const PipelineConfig& cfg) {
  const double t = cfg.semantic_threshold;
  const double logit = std::log(t / (1.0 - t));
  return cfg.activation == Activation::Shifted ? 0.5 + logit : logit;
}

inline BinaryMask threshold_semantic(const Raster& pred, const PipelineConfig& cfg = {}) {
  cfg.validate();
  const double cut = activation_cutoff(cfg);
  BinaryMask mask(pred.width(), pred.height());
  for (std::size_t i = 0; i < pred.size(); ++i) mask[i] = static_cast<double>(pred[i]) >= cut ? 1 : 0;
  return mask;
}

namespace detail {

inline SeedSet seeds_from_hmax(const Raster& hmax, const BinaryMask& mask, Connectivity conn) {
  BinaryMask peaks = regional_maxima(hmax, conn);
  for (std::size_t i = 0; i < peaks.size(); ++i) peaks[i] = peaks[i] && mask[i];
  SeedSet seeds;
  seeds.labels = connected_components(peaks, conn);
  for (Label l : seeds.labels) seeds.count = std::max<std::size_t>(seeds.count, l);
  return seeds;
}

}  // namespace detail

/// Regional maxima of HMAX_h(dist) inside the mask, one label per
/// connected plateau piece.
inline SeedSet extract_seeds(const Raster& dist, const BinaryMask& mask, const PipelineConfig& cfg = {}) {
  cfg.validate();
  require_same_shape(dist, mask, "extract_seeds");
  return detail::seeds_from_hmax(h_maxima(dist, cfg.h, cfg.connectivity), mask, cfg.connectivity);
}

/// Marker-controlled flooding from the seeds, highest relief first.
///
/// A pixel is processed when it is the labeled, unprocessed pixel of
/// greatest relief (ties: smaller row-major index). Processing hands its
/// label to every unlabeled mask neighbor. Mask regions no seed can reach
/// stay 0; there are no watershed-line pixels.
inline LabelMap seeded_watershed(const Raster& relief, const SeedSet& seeds, const BinaryMask& mask,
                                 Connectivity conn = Connectivity::Eight) {
  require_same_shape(relief, seeds.labels, "seeded_watershed");
  require_same_shape(relief, mask, "seeded_watershed");
  const std::size_t w = relief.width();
  const std::size_t h = relief.height();

  struct Entry {
    Sample level;
    std::uint32_t index;
  };
  // priority_queue pops the "largest"; invert the index order so the smaller
  // index comes out first on equal relief.
  auto lower_priority = [](const Entry& a, const Entry& b) {
    if (a.level != b.level) return a.level < b.level;
    return a.index > b.index;
  };
  std::priority_queue<Entry, std::vector<Entry>, decltype(lower_priority)> queue(lower_priority);

  LabelMap out(w, h, 0);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const Label l = seeds.labels[i];
    if (l == 0) continue;
    if (!mask[i]) throw Error(ErrorCode::SeedOutsideMask, "seed pixel outside mask at index " + std::to_string(i));
    out[i] = l;
    queue.push({relief[i], static_cast<std::uint32_t>(i)});
  }

  const auto offs = detail::neighbors(conn);
  while (!queue.empty()) {
    const std::size_t p = queue.top().index;
    queue.pop();
    detail::for_each_neighbor(p, w, h, offs, [&](std::size_t q) {
      if (mask[q] && out[q] == 0) {
        out[q] = out[p];
        queue.push({relief[q], static_cast<std::uint32_t>(q)});
      }
    });
  }
  return out;
}

/// Full post-processing chain from the two network outputs to instances.
inline LabelMap instance_segment(const Raster& dist_pred, const Raster& semantic_pred, const PipelineConfig& cfg = {}) {
  cfg.validate();
  require_same_shape(dist_pred, semantic_pred, "instance_segment");
  const BinaryMask mask = threshold_semantic(semantic_pred, cfg);
  if (!cfg.flood_on_hmax) {
    const SeedSet seeds = extract_seeds(dist_pred, mask, cfg);
    return seeded_watershed(dist_pred, seeds, mask, cfg.connectivity);
  }
  const Raster hmax = h_maxima(dist_pred, cfg.h, cfg.connectivity);
  return seeded_watershed(hmax, detail::seeds_from_hmax(hmax, mask, cfg.connectivity), mask, cfg.connectivity);
}

}  // namespace cellseg
