#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <span>
#include <unordered_map>
#include <vector>

#include "cellseg/error.hpp"
#include "cellseg/raster.hpp"

namespace cellseg {

enum class Connectivity { Four, Eight };

namespace detail {

struct Offset {
  int dx;
  int dy;
};

inline constexpr std::array<Offset, 8> kNeighbors8{{
    {-1, -1}, {0, -1}, {1, -1}, {-1, 0}, {1, 0}, {-1, 1}, {0, 1}, {1, 1},
}};
inline constexpr std::array<Offset, 4> kNeighbors4{{{0, -1}, {-1, 0}, {1, 0}, {0, 1}}};

inline std::span<const Offset> neighbors(Connectivity conn) {
  if (conn == Connectivity::Four) return kNeighbors4;
  return kNeighbors8;
}

// Neighbors that precede a pixel in raster order, and those that follow it.
inline constexpr std::array<Offset, 4> kCausal8{{{-1, -1}, {0, -1}, {1, -1}, {-1, 0}}};
inline constexpr std::array<Offset, 2> kCausal4{{{0, -1}, {-1, 0}}};
inline constexpr std::array<Offset, 4> kAnticausal8{{{1, 0}, {-1, 1}, {0, 1}, {1, 1}}};
inline constexpr std::array<Offset, 2> kAnticausal4{{{1, 0}, {0, 1}}};

inline std::span<const Offset> causal(Connectivity conn) {
  if (conn == Connectivity::Four) return kCausal4;
  return kCausal8;
}

inline std::span<const Offset> anticausal(Connectivity conn) {
  if (conn == Connectivity::Four) return kAnticausal4;
  return kAnticausal8;
}

/// Calls fn(neighbor_index) for every in-frame neighbor of linear index i.
template <typename Fn>
inline void for_each_neighbor(std::size_t i, std::size_t width, std::size_t height, std::span<const Offset> offs,
                              Fn&& fn) {
  const auto x = static_cast<std::ptrdiff_t>(i % width);
  const auto y = static_cast<std::ptrdiff_t>(i / width);
  for (const Offset& o : offs) {
    const std::ptrdiff_t nx = x + o.dx;
    const std::ptrdiff_t ny = y + o.dy;
    if (nx < 0 || ny < 0 || nx >= static_cast<std::ptrdiff_t>(width) || ny >= static_cast<std::ptrdiff_t>(height)) {
      continue;
    }
    fn(static_cast<std::size_t>(ny) * width + static_cast<std::size_t>(nx));
  }
}

inline std::int64_t floor_div(std::int64_t num, std::int64_t den) {
  std::int64_t q = num / den;
  if ((num % den != 0) && ((num < 0) != (den < 0))) --q;
  return q;
}

// Meijster's separable exact EDT on a small binary grid. `member` is 1 for
// pixels whose distance is wanted; every row and column must contain at least
// one non-member. Returns squared distances.
inline std::vector<std::int64_t> squared_edt(const std::vector<std::uint8_t>& member, std::size_t w, std::size_t h) {
  const std::int64_t inf = static_cast<std::int64_t>(w + h);
  std::vector<std::int64_t> g(w * h);
  for (std::size_t x = 0; x < w; ++x) {
    g[x] = member[x] ? inf : 0;
    for (std::size_t y = 1; y < h; ++y) {
      g[y * w + x] = member[y * w + x] ? g[(y - 1) * w + x] + 1 : 0;
    }
    for (std::size_t y = h - 1; y-- > 0;) {
      if (g[(y + 1) * w + x] < g[y * w + x]) g[y * w + x] = g[(y + 1) * w + x] + 1;
    }
  }

  std::vector<std::int64_t> dt(w * h);
  std::vector<std::int64_t> s(w);
  std::vector<std::int64_t> t(w);
  const auto m = static_cast<std::int64_t>(w);
  for (std::size_t y = 0; y < h; ++y) {
    const std::int64_t* gy = g.data() + y * w;
    auto f = [&](std::int64_t x, std::int64_t i) { return (x - i) * (x - i) + gy[i] * gy[i]; };
    auto sep = [&](std::int64_t i, std::int64_t u) {
      return floor_div(u * u - i * i + gy[u] * gy[u] - gy[i] * gy[i], 2 * (u - i));
    };
    std::int64_t q = 0;
    s[0] = 0;
    t[0] = 0;
    for (std::int64_t u = 1; u < m; ++u) {
      while (q >= 0 && f(t[q], s[q]) > f(t[q], u)) --q;
      if (q < 0) {
        q = 0;
        s[0] = u;
      } else {
        const std::int64_t next = 1 + sep(s[q], u);
        if (next < m) {
          ++q;
          s[q] = u;
          t[q] = next;
        }
      }
    }
    for (std::int64_t u = m - 1; u >= 0; --u) {
      dt[y * w + static_cast<std::size_t>(u)] = f(u, s[q]);
      if (u == t[q]) --q;
    }
  }
  return dt;
}

}  // namespace detail

/// Labels the conn-connected foreground regions of `mask` 1..K in the order
/// their first pixel is met by a raster scan.
inline LabelMap connected_components(const BinaryMask& mask, Connectivity conn = Connectivity::Eight) {
  const std::size_t w = mask.width();
  const std::size_t h = mask.height();
  LabelMap labels(w, h, 0);
  const auto offs = detail::neighbors(conn);
  std::vector<std::size_t> stack;
  Label next = 0;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (!mask[i] || labels[i] != 0) continue;
    ++next;
    labels[i] = next;
    stack.push_back(i);
    while (!stack.empty()) {
      const std::size_t p = stack.back();
      stack.pop_back();
      detail::for_each_neighbor(p, w, h, offs, [&](std::size_t q) {
        if (mask[q] && labels[q] == 0) {
          labels[q] = next;
          stack.push_back(q);
        }
      });
    }
  }
  return labels;
}

/// Grayscale reconstruction by dilation of `marker` under `mask`: the limit
/// of geodesic dilations min(dilate(r), mask) starting from the marker.
///
/// Hybrid algorithm: one forward and one backward raster sweep, then a FIFO
/// propagation for the pixels that can still grow.
inline Raster reconstruct_by_dilation(const Raster& marker, const Raster& mask,
                                      Connectivity conn = Connectivity::Eight) {
  require_same_shape(marker, mask, "reconstruct_by_dilation");
  for (std::size_t i = 0; i < marker.size(); ++i) {
    if (marker[i] > mask[i]) {
      throw Error(ErrorCode::MarkerExceedsMask, "marker > mask at index " + std::to_string(i));
    }
  }
  const std::size_t w = marker.width();
  const std::size_t h = marker.height();
  const std::size_t n = marker.size();
  Raster r = marker;

  const auto fwd = detail::causal(conn);
  const auto bwd = detail::anticausal(conn);
  for (std::size_t i = 0; i < n; ++i) {
    Sample v = r[i];
    detail::for_each_neighbor(i, w, h, fwd, [&](std::size_t q) { v = std::max(v, r[q]); });
    r[i] = std::min(v, mask[i]);
  }

  std::deque<std::size_t> fifo;
  for (std::size_t i = n; i-- > 0;) {
    Sample v = r[i];
    detail::for_each_neighbor(i, w, h, bwd, [&](std::size_t q) { v = std::max(v, r[q]); });
    r[i] = std::min(v, mask[i]);
    bool can_grow = false;
    detail::for_each_neighbor(i, w, h, bwd, [&](std::size_t q) {
      if (r[q] < r[i] && r[q] < mask[q]) can_grow = true;
    });
    if (can_grow) fifo.push_back(i);
  }

  const auto all = detail::neighbors(conn);
  while (!fifo.empty()) {
    const std::size_t p = fifo.front();
    fifo.pop_front();
    detail::for_each_neighbor(p, w, h, all, [&](std::size_t q) {
      if (r[q] < r[p] && mask[q] != r[q]) {
        r[q] = std::min(r[p], mask[q]);
        fifo.push_back(q);
      }
    });
  }
  return r;
}

/// h-maxima transform: reconstruction by dilation of f - h under f. The
/// subtraction is not clamped, so the marker may go negative.
inline Raster h_maxima(const Raster& f, double h, Connectivity conn = Connectivity::Eight) {
  if (!(h >= 0.0) || !std::isfinite(h)) throw Error(ErrorCode::NegativeH, "h must be a finite value >= 0");
  Raster marker = f;
  const auto hs = static_cast<Sample>(h);
  for (Sample& v : marker) v -= hs;
  return reconstruct_by_dilation(marker, f, conn);
}

/// Pixels on plateaus whose every outside neighbor is strictly lower. The
/// image frame counts as lower than everything.
inline BinaryMask regional_maxima(const Raster& f, Connectivity conn = Connectivity::Eight) {
  const std::size_t w = f.width();
  const std::size_t h = f.height();
  const auto offs = detail::neighbors(conn);
  BinaryMask out(w, h, 0);
  std::vector<std::uint8_t> seen(f.size(), 0);
  std::vector<std::size_t> plateau;
  std::vector<std::size_t> stack;
  for (std::size_t i = 0; i < f.size(); ++i) {
    if (seen[i]) continue;
    const Sample level = f[i];
    bool is_max = true;
    plateau.clear();
    stack.push_back(i);
    seen[i] = 1;
    while (!stack.empty()) {
      const std::size_t p = stack.back();
      stack.pop_back();
      plateau.push_back(p);
      detail::for_each_neighbor(p, w, h, offs, [&](std::size_t q) {
        if (f[q] > level) {
          is_max = false;
        } else if (f[q] == level && !seen[q]) {
          seen[q] = 1;
          stack.push_back(q);
        }
      });
    }
    if (is_max) {
      for (std::size_t p : plateau) out[p] = 1;
    }
  }
  return out;
}

/// Per-instance exact Euclidean distance map.
///
/// A pixel of instance k gets its distance to the nearest pixel whose label
/// differs from k; background, other instances and everything beyond the
/// image frame count as outside. Background pixels are 0. With `normalize`,
/// each instance is divided by its own maximum.
inline Raster distance_map(const LabelMap& labels, bool normalize = false) {
  const std::size_t w = labels.width();
  const std::size_t h = labels.height();
  Raster out(w, h, 0.0f);

  struct Box {
    std::size_t x0, y0, x1, y1;
  };
  std::unordered_map<Label, Box> boxes;
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      const Label l = labels(x, y);
      if (l == 0) continue;
      auto [it, fresh] = boxes.try_emplace(l, Box{x, y, x, y});
      if (!fresh) {
        Box& b = it->second;
        b.x0 = std::min(b.x0, x);
        b.x1 = std::max(b.x1, x);
        b.y1 = std::max(b.y1, y);
      }
    }
  }

  // Clamping any outside point onto the one-pixel ring around the bounding
  // box never increases its distance, so the nearest non-member of an
  // instance pixel always lies inside the padded box.
  std::vector<std::uint8_t> member;
  for (const auto& [label, b] : boxes) {
    const std::size_t bw = b.x1 - b.x0 + 3;
    const std::size_t bh = b.y1 - b.y0 + 3;
    member.assign(bw * bh, 0);
    for (std::size_t y = 1; y + 1 < bh; ++y) {
      for (std::size_t x = 1; x + 1 < bw; ++x) {
        member[y * bw + x] = labels(b.x0 + x - 1, b.y0 + y - 1) == label ? 1 : 0;
      }
    }
    const auto d2 = detail::squared_edt(member, bw, bh);
    Sample peak = 0.0f;
    for (std::size_t y = 1; y + 1 < bh; ++y) {
      for (std::size_t x = 1; x + 1 < bw; ++x) {
        if (!member[y * bw + x]) continue;
        const auto d = static_cast<Sample>(std::sqrt(static_cast<double>(d2[y * bw + x])));
        out(b.x0 + x - 1, b.y0 + y - 1) = d;
        peak = std::max(peak, d);
      }
    }
    if (normalize && peak > 0.0f) {
      for (std::size_t y = b.y0; y <= b.y1; ++y) {
        for (std::size_t x = b.x0; x <= b.x1; ++x) {
          if (labels(x, y) == label) out(x, y) /= peak;
        }
      }
    }
  }
  return out;
}

}  // namespace cellseg
