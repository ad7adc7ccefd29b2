#pragma once

#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "irmap/grid.hpp"
#include "irmap/parallel.hpp"
#include "irmap/zones.hpp"

namespace irmap::post {

enum class Connectivity : std::uint8_t { Four = 4, Eight = 8 };

template <typename L>
struct Component {
  L label{};
  std::size_t pixels = 0;
  std::size_t seed = 0;  // raster index of the first pixel
};

/// `ids` maps each pixel to its component; components are numbered in
/// raster order of their first pixel.
template <typename L>
struct Components {
  Grid<std::int32_t> ids;
  std::vector<Component<L>> list;
};

namespace detail {

inline std::size_t find_root(std::vector<std::size_t>& parent, std::size_t i) {
  while (parent[i] != i) {
    parent[i] = parent[parent[i]];
    i = parent[i];
  }
  return i;
}

inline void unite(std::vector<std::size_t>& parent, std::size_t a, std::size_t b) {
  a = find_root(parent, a);
  b = find_root(parent, b);
  if (a == b) return;
  if (a < b)
    parent[b] = a;
  else
    parent[a] = b;
}

// Links pixel (x, y) to its already-visited same-label neighbours in rows
// [y0, y]: left, and the row above when it lies in the band.
template <typename L>
void link_pixel(const Grid<L>& g, std::vector<std::size_t>& parent, int x, int y, int y0, bool eight) {
  const std::size_t i = g.index(x, y);
  const L v = g[i];
  if (x > 0 && g(x - 1, y) == v) unite(parent, i, i - 1);
  if (y > y0) {
    if (g(x, y - 1) == v) unite(parent, i, g.index(x, y - 1));
    if (eight) {
      if (x > 0 && g(x - 1, y - 1) == v) unite(parent, i, g.index(x - 1, y - 1));
      if (x + 1 < g.width() && g(x + 1, y - 1) == v) unite(parent, i, g.index(x + 1, y - 1));
    }
  }
}

}  // namespace detail

/// Maximal same-label connected regions. Row bands are labelled
/// independently and merged across band seams with union-find.
template <typename L>
Components<L> connected_components(const Grid<L>& labels, Connectivity conn = Connectivity::Eight) {
  const int w = labels.width(), h = labels.height();
  const bool eight = conn == Connectivity::Eight;
  std::vector<std::size_t> parent(labels.size());
  std::iota(parent.begin(), parent.end(), std::size_t{0});

  constexpr int kBandRows = 64;
  const std::size_t bands = static_cast<std::size_t>((h + kBandRows - 1) / kBandRows);
  parallel_for(
      bands,
      [&](std::size_t b) {
        const int y0 = static_cast<int>(b) * kBandRows;
        const int y1 = std::min(h, y0 + kBandRows);
        for (int y = y0; y < y1; ++y)
          for (int x = 0; x < w; ++x) detail::link_pixel(labels, parent, x, y, y0, eight);
      },
      1);
  for (int y = kBandRows; y < h; y += kBandRows)
    for (int x = 0; x < w; ++x) detail::link_pixel(labels, parent, x, y, y - 1, eight);

  Components<L> out{Grid<std::int32_t>(w, h, -1), {}};
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const std::size_t root = detail::find_root(parent, i);
    std::int32_t& id = out.ids[root];
    if (id < 0) {
      id = static_cast<std::int32_t>(out.list.size());
      out.list.push_back({labels[i], 0, i});
    }
    out.ids[i] = id;
    ++out.list[static_cast<std::size_t>(id)].pixels;
  }
  return out;
}

struct ComponentRecord {
  ZoneLabel label = ZoneLabel::NWA;
  std::size_t pixels = 0;
  double area_mm2 = 0.0;
  bool relabeled = false;
};

/// One record per component of the filter's input map.
struct ComponentReport {
  double pixel_size_mm = 0.0;
  double min_area_mm2 = 0.0;
  int passes = 0;
  std::vector<ComponentRecord> components;
  std::vector<std::string> warnings;

  std::string to_text() const;
};

struct TopologicalResult {
  Grid<ZoneLabel> labels;
  ComponentReport report;
};

/// Relabels components smaller than `min_area_mm2` to the majority label of
/// the pixels bordering them (ties: larger total frame area, then lower
/// label code), smallest first, until none remain or 10 passes ran.
/// `pixel_size` is in meters. A frame smaller than the threshold is
/// returned unchanged with a warning.
TopologicalResult topological_filter(const Grid<ZoneLabel>& labels, double pixel_size, double min_area_mm2,
                                     Connectivity conn = Connectivity::Eight);

/// Per-class box mean over the (2r+1)^2 window, averaging only in-frame
/// pixels. Throws DataError when radius < 0.
ProbabilityMap probabilistic_filter(const ProbabilityMap& probs, int radius);

struct DecisionThresholds {
  double alpha = 0.05;  // target HA false-alarm rate
  double beta = 0.05;   // target HA miss rate
  double theta = 0.5;   // HA iff P(HA | tissue) >= theta
  double alpha_hat = 0.0;
  double beta_hat = 0.0;
  bool beta_met = true;
  bool alpha_met = true;

  std::string to_text() const;
};

/// Sweeps theta over the sorted distinct scores and keeps the largest one
/// whose miss rate on `tumor` is within beta. Throws DataError on an empty
/// class or alpha/beta outside (0, 1).
DecisionThresholds fit_thresholds(std::span<const double> intact, std::span<const double> tumor, double alpha,
                                  double beta);

/// Collects P(HA | tissue) over the reference tissue pixels of each pair.
DecisionThresholds fit_thresholds(std::span<const ProbabilityMap> probs, std::span<const ZoneMask> refs, double alpha,
                                  double beta);

/// A priori delineation: NWA, working area with the layer left open, or a
/// working area with its layer fixed.
enum class PriorZone : std::uint8_t { NWA = 0, WA = 1, DM = 2, BC = 3 };

struct PriorMask {
  Grid<PriorZone> zones;
  double pixel_size = 0.0;
};

/// NWA on a border of `margin` pixels, open working area inside.
PriorMask auto_prior(int width, int height, double pixel_size, int margin = 4);
/// Keeps the WA/NWA split and the layer of every tissue pixel.
PriorMask prior_from_mask(const ZoneMask& mask);

/// Z_ps from smoothed probabilities. Prior NWA stays NWA; elsewhere a pixel
/// is NWA when P(WA) < 0.5. The layer comes from the prior when it names
/// one, else from the mode (In: P(DM | WA) >= 0.5). HA iff P(HA | tissue)
/// >= theta. Throws DataError on a shape mismatch or a prior layer the mode
/// forbids.
ZoneMask lps_decide(const ProbabilityMap& probs, const PriorMask& prior, Mode mode, const DecisionThresholds& th);

}  // namespace irmap::post
