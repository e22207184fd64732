#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <unordered_map>
#include <vector>

#include "cellseg/error.hpp"
#include "cellseg/raster.hpp"

namespace cellseg {

// ---------------------------------------------------------------------------
// Activations and loss kernels

inline double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }

/// Sigmoid centered at 0.5, for networks whose raw output already lives
/// roughly in [0, 1].
inline double shifted_sigmoid(double v) { return 1.0 / (1.0 + std::exp(-(v - 0.5))); }

/// Binary cross-entropy of logit z against target t, in the overflow-free
/// form max(z, 0) - z t + log(1 + exp(-|z|)).
inline double bce_with_logits(double z, double t) {
  return std::max(z, 0.0) - z * t + std::log1p(std::exp(-std::abs(z)));
}

inline constexpr double kDefaultLossAlpha = 2000.0;

struct LossInputs {
  Raster distance_pred;     // y_d
  Raster semantic_logits;   // y_s
  Raster distance_target;   // t_d
  BinaryMask semantic_target;  // t_s
  double alpha = kDefaultLossAlpha;
};

inline double mse(const Raster& a, const Raster& b) {
  require_same_shape(a, b, "mse");
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    sum += d * d;
  }
  return sum / static_cast<double>(a.size());
}

inline double mean_bce_with_logits(const Raster& logits, const BinaryMask& target) {
  require_same_shape(logits, target, "mean_bce_with_logits");
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) sum += bce_with_logits(logits[i], target[i] ? 1.0 : 0.0);
  return sum / static_cast<double>(logits.size());
}

/// MSE on the distance channel plus alpha times the mean BCE on the
/// semantic channel.
inline double combined_loss(const LossInputs& in) {
  if (!(in.alpha >= 0.0) || !std::isfinite(in.alpha)) {
    throw Error(ErrorCode::InvalidArgument, "alpha must be finite and non-negative");
  }
  require_same_shape(in.distance_pred, in.distance_target, "combined_loss");
  require_same_shape(in.distance_pred, in.semantic_logits, "combined_loss");
  require_same_shape(in.distance_pred, in.semantic_target, "combined_loss");
  return mse(in.distance_pred, in.distance_target) + in.alpha * mean_bce_with_logits(in.semantic_logits, in.semantic_target);
}

// ---------------------------------------------------------------------------
// Pixel-level scores

/// Pearson correlation over all pixels.
inline double pcc(const Raster& x, const Raster& y) {
  require_same_shape(x, y, "pcc");
  const auto n = static_cast<double>(x.size());
  double mx = 0.0;
  double my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0;
  double sxx = 0.0;
  double syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) throw Error(ErrorCode::ConstantImage, "pcc of a constant image is undefined");
  return std::clamp(sxy / (std::sqrt(sxx) * std::sqrt(syy)), -1.0, 1.0);
}

struct PixelOverlap {
  std::uint64_t intersection = 0;
  std::uint64_t union_ = 0;
};

inline PixelOverlap pixel_overlap(const BinaryMask& x, const BinaryMask& y) {
  require_same_shape(x, y, "iou");
  PixelOverlap o;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const bool a = x[i] != 0;
    const bool b = y[i] != 0;
    o.intersection += (a && b) ? 1 : 0;
    o.union_ += (a || b) ? 1 : 0;
  }
  return o;
}

/// Jaccard index; two empty masks score 1.
inline double iou(const BinaryMask& x, const BinaryMask& y) {
  const PixelOverlap o = pixel_overlap(x, y);
  if (o.union_ == 0) return 1.0;
  return static_cast<double>(o.intersection) / static_cast<double>(o.union_);
}

// ---------------------------------------------------------------------------
// Instance matching

/// IoU thresholds 0.50, 0.55, ..., 0.95.
inline const std::array<double, 10>& map_thresholds() {
  static const std::array<double, 10> grid = [] {
    std::array<double, 10> g{};
    for (int i = 0; i < 10; ++i) g[i] = static_cast<double>(50 + 5 * i) / 100.0;
    return g;
  }();
  return grid;
}

struct MatchPair {
  Label gt;
  Label pred;
  double iou;

  friend bool operator==(const MatchPair&, const MatchPair&) = default;
};

struct MatchResult {
  double threshold = 0.5;
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  std::vector<MatchPair> pairs;  // sorted by gt label
};

/// Areas of every instance and of every overlapping (gt, pred) pair,
/// gathered in one pass so several thresholds can be scored cheaply.
class OverlapTable {
 public:
  OverlapTable(const LabelMap& gt, const LabelMap& pred) {
    require_same_shape(gt, pred, "match_instances");
    std::unordered_map<std::uint64_t, std::uint64_t> inter;
    for (std::size_t i = 0; i < gt.size(); ++i) {
      const Label g = gt[i];
      const Label p = pred[i];
      if (g != 0) ++gt_area_[g];
      if (p != 0) ++pred_area_[p];
      if (g != 0 && p != 0) ++inter[(std::uint64_t(g) << 32) | p];
    }
    candidates_.reserve(inter.size());
    for (const auto& [key, count] : inter) {
      const auto g = static_cast<Label>(key >> 32);
      const auto p = static_cast<Label>(key & 0xFFFFFFFFu);
      const std::uint64_t uni = gt_area_.at(g) + pred_area_.at(p) - count;
      candidates_.push_back({g, p, static_cast<double>(count) / static_cast<double>(uni)});
    }
    // Highest IoU first; equal IoU resolved by smaller gt then pred label.
    std::sort(candidates_.begin(), candidates_.end(), [](const MatchPair& a, const MatchPair& b) {
      if (a.iou != b.iou) return a.iou > b.iou;
      if (a.gt != b.gt) return a.gt < b.gt;
      return a.pred < b.pred;
    });
  }

  std::size_t gt_count() const noexcept { return gt_area_.size(); }
  std::size_t pred_count() const noexcept { return pred_area_.size(); }

  MatchResult match(double tau) const {
    if (!(tau >= 0.5)) throw Error(ErrorCode::ThresholdTooLow, "IoU threshold must be >= 0.5");
    MatchResult r;
    r.threshold = tau;
    // Above 0.5 every candidate is automatically one-to-one; at exactly 0.5
    // an instance split into two equal halves ties, and the greedy pass
    // keeps the first pair in candidate order.
    std::unordered_map<Label, bool> gt_used;
    std::unordered_map<Label, bool> pred_used;
    for (const MatchPair& c : candidates_) {
      if (c.iou < tau) break;
      if (gt_used[c.gt] || pred_used[c.pred]) continue;
      gt_used[c.gt] = true;
      pred_used[c.pred] = true;
      r.pairs.push_back(c);
    }
    std::sort(r.pairs.begin(), r.pairs.end(), [](const MatchPair& a, const MatchPair& b) { return a.gt < b.gt; });
    r.tp = r.pairs.size();
    r.fn = gt_count() - r.tp;
    r.fp = pred_count() - r.tp;
    return r;
  }

 private:
  std::unordered_map<Label, std::uint64_t> gt_area_;
  std::unordered_map<Label, std::uint64_t> pred_area_;
  std::vector<MatchPair> candidates_;
};

/// Pairs every gt instance with the prediction it overlaps at IoU >= tau.
inline MatchResult match_instances(const LabelMap& gt, const LabelMap& pred, double tau) {
  if (!(tau >= 0.5)) throw Error(ErrorCode::ThresholdTooLow, "IoU threshold must be >= 0.5");
  return OverlapTable(gt, pred).match(tau);
}

/// TP / (TP + FP + FN); 1 when both maps are empty.
inline double detection_precision(const MatchResult& m) {
  const std::size_t denom = m.tp + m.fp + m.fn;
  if (denom == 0) return 1.0;
  return static_cast<double>(m.tp) / static_cast<double>(denom);
}

inline double precision_at(const LabelMap& gt, const LabelMap& pred, double tau) {
  return detection_precision(match_instances(gt, pred, tau));
}

/// Precision at each threshold of map_thresholds().
inline std::array<double, 10> precision_curve(const LabelMap& gt, const LabelMap& pred) {
  const OverlapTable table(gt, pred);
  std::array<double, 10> out{};
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = detection_precision(table.match(map_thresholds()[i]));
  return out;
}

inline double mean_of(const std::array<double, 10>& values) {
  double sum = 0.0;
  for (double v : values) sum += v;
  return sum / static_cast<double>(values.size());
}

/// Mean of the detection precision over the ten IoU thresholds.
inline double map_score(const LabelMap& gt, const LabelMap& pred) { return mean_of(precision_curve(gt, pred)); }

}  // namespace cellseg
