#include "irmap/postprocess.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <queue>

#include "irmap/error.hpp"

namespace irmap::post {

namespace {

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

constexpr std::array<std::array<int, 2>, 8> kOffsets = {
    {{-1, 0}, {1, 0}, {0, -1}, {0, 1}, {-1, -1}, {1, -1}, {-1, 1}, {1, 1}}};

std::size_t neighbour_count(Connectivity c) { return c == Connectivity::Eight ? 8 : 4; }

// Flood fill of the same-label region around `seed`, abandoned once it
// exceeds `limit` pixels. Returns the region, or an oversized partial one.
std::vector<std::size_t> bounded_region(const Grid<ZoneLabel>& g, std::size_t seed, std::size_t limit,
                                        Connectivity conn, Grid<std::uint32_t>& stamp, std::uint32_t mark) {
  const ZoneLabel v = g[seed];
  std::vector<std::size_t> region{seed};
  stamp[seed] = mark;
  const int w = g.width();
  for (std::size_t k = 0; k < region.size() && region.size() <= limit; ++k) {
    const int x = static_cast<int>(region[k] % static_cast<std::size_t>(w));
    const int y = static_cast<int>(region[k] / static_cast<std::size_t>(w));
    for (std::size_t n = 0; n < neighbour_count(conn); ++n) {
      const int nx = x + kOffsets[n][0], ny = y + kOffsets[n][1];
      if (!g.contains(nx, ny)) continue;
      const std::size_t j = g.index(nx, ny);
      if (stamp[j] == mark || g[j] != v) continue;
      stamp[j] = mark;
      region.push_back(j);
    }
  }
  return region;
}

}  // namespace

std::string ComponentReport::to_text() const {
  std::string s = "# irmap-components v1\n";
  s += "pixel_size_mm=" + fmt("%.6g", pixel_size_mm) + "\n";
  s += "min_area_mm2=" + fmt("%.6g", min_area_mm2) + "\n";
  s += "passes=" + std::to_string(passes) + "\n";
  std::size_t relabeled = 0;
  for (const auto& c : components) relabeled += c.relabeled;
  s += "components=" + std::to_string(components.size()) + " relabeled=" + std::to_string(relabeled) + "\n";
  for (std::size_t i = 0; i < components.size(); ++i) {
    const auto& c = components[i];
    s += "component id=" + std::to_string(i) + " label=" + std::string(to_string(c.label)) +
         " pixels=" + std::to_string(c.pixels) + " area_mm2=" + fmt("%.6f", c.area_mm2) +
         " action=" + (c.relabeled ? "relabeled" : "kept") + "\n";
  }
  for (const auto& w : warnings) s += "warning " + w + "\n";
  return s;
}

TopologicalResult topological_filter(const Grid<ZoneLabel>& labels, double pixel_size, double min_area_mm2,
                                     Connectivity conn) {
  if (!(min_area_mm2 >= 0.0) || !std::isfinite(min_area_mm2))
    throw DataError("topological_filter: min_area_mm2 must be a finite value >= 0");
  if (!(pixel_size > 0.0) || !std::isfinite(pixel_size))
    throw DataError("topological_filter: pixel_size must be positive");

  const double pixel_mm = pixel_size * 1000.0;
  const double pixel_area = pixel_mm * pixel_mm;
  TopologicalResult out{labels, {}};
  out.report.pixel_size_mm = pixel_mm;
  out.report.min_area_mm2 = min_area_mm2;

  const auto input = connected_components(labels, conn);
  for (const auto& c : input.list)
    out.report.components.push_back({c.label, c.pixels, static_cast<double>(c.pixels) * pixel_area, false});
  if (labels.empty()) return out;

  const auto small = [&](std::size_t pixels) { return static_cast<double>(pixels) * pixel_area < min_area_mm2; };
  if (small(labels.size())) {
    out.report.warnings.push_back("frame area " + fmt("%.6g", static_cast<double>(labels.size()) * pixel_area) +
                                  " mm2 is below min_area_mm2; mask left unchanged");
    return out;
  }
  // Smallest pixel count that meets the threshold; regions are explored up to it.
  std::size_t limit = 1;
  while (small(limit)) limit *= 2;
  {
    std::size_t lo = limit / 2, hi = limit;
    while (lo + 1 < hi) {
      const std::size_t mid = lo + (hi - lo) / 2;
      (small(mid) ? lo : hi) = mid;
    }
    limit = hi;
  }

  Grid<ZoneLabel>& map = out.labels;
  ZoneCounts totals = count_zones(map);
  Grid<std::uint8_t> touched(map.width(), map.height(), 0);
  Grid<std::uint32_t> stamp(map.width(), map.height(), 0);
  std::uint32_t mark = 0;

  using Item = std::pair<std::size_t, std::size_t>;  // (pixels, seed)
  for (int pass = 0; pass < 10; ++pass) {
    const auto current = pass == 0 ? input : connected_components(map, conn);
    std::priority_queue<Item, std::vector<Item>, std::greater<>> queue;
    for (const auto& c : current.list)
      if (small(c.pixels)) queue.push({c.pixels, c.seed});
    if (queue.empty()) break;
    out.report.passes = pass + 1;

    while (!queue.empty()) {
      const auto [expected, seed] = queue.top();
      queue.pop();
      const auto region = bounded_region(map, seed, limit, conn, stamp, ++mark);
      if (!small(region.size())) continue;
      if (region.size() != expected) {
        queue.push({region.size(), seed});
        continue;
      }
      ZoneCounts border{};
      const int w = map.width();
      ++mark;
      for (std::size_t i : region) stamp[i] = mark;
      for (std::size_t i : region) {
        const int x = static_cast<int>(i % static_cast<std::size_t>(w));
        const int y = static_cast<int>(i / static_cast<std::size_t>(w));
        for (std::size_t n = 0; n < neighbour_count(conn); ++n) {
          const int nx = x + kOffsets[n][0], ny = y + kOffsets[n][1];
          if (!map.contains(nx, ny)) continue;
          const std::size_t j = map.index(nx, ny);
          if (stamp[j] == mark) continue;
          stamp[j] = mark;
          ++border[index_of(map[j])];
        }
      }
      std::size_t best = kZoneCount;
      for (std::size_t z = 0; z < kZoneCount; ++z) {
        if (border[z] == 0) continue;
        if (best == kZoneCount || border[z] > border[best] ||
            (border[z] == border[best] && totals[z] > totals[best]))
          best = z;
      }
      if (best == kZoneCount) continue;
      const ZoneLabel from = map[seed];
      const auto to = static_cast<ZoneLabel>(best);
      for (std::size_t i : region) {
        map[i] = to;
        touched[i] = 1;
      }
      totals[index_of(from)] -= region.size();
      totals[best] += region.size();
      const auto merged = bounded_region(map, seed, limit, conn, stamp, ++mark);
      if (small(merged.size())) queue.push({merged.size(), seed});
    }
  }
  for (std::size_t k = 0; k < input.list.size(); ++k)
    out.report.components[k].relabeled = touched[input.list[k].seed] != 0;

  const auto final_components = connected_components(map, conn);
  for (const auto& c : final_components.list) {
    if (small(c.pixels)) {
      out.report.warnings.push_back("sub-threshold components remain after 10 passes");
      break;
    }
  }
  return out;
}

ProbabilityMap probabilistic_filter(const ProbabilityMap& probs, int radius) {
  if (radius < 0) throw DataError("probabilistic_filter: radius must be >= 0");
  if (radius == 0 || probs.empty()) return probs;
  const int w = probs.width(), h = probs.height();

  ProbabilityMap rows(w, h);
  parallel_for(static_cast<std::size_t>(h), [&](std::size_t yy) {
    const int y = static_cast<int>(yy);
    for (int x = 0; x < w; ++x) {
      LeafProbs s{};
      for (int dx = std::max(0, x - radius); dx <= std::min(w - 1, x + radius); ++dx)
        for (std::size_t z = 0; z < kZoneCount; ++z) s[z] += probs(dx, y)[z];
      rows(x, y) = s;
    }
  }, 8);

  ProbabilityMap out(w, h);
  parallel_for(static_cast<std::size_t>(h), [&](std::size_t yy) {
    const int y = static_cast<int>(yy);
    const int y0 = std::max(0, y - radius), y1 = std::min(h - 1, y + radius);
    for (int x = 0; x < w; ++x) {
      LeafProbs s{};
      for (int dy = y0; dy <= y1; ++dy)
        for (std::size_t z = 0; z < kZoneCount; ++z) s[z] += rows(x, dy)[z];
      double total = 0.0;
      for (double v : s) total += v;
      if (total > 0.0)
        for (double& v : s) v /= total;
      out(x, y) = s;
    }
  }, 8);
  return out;
}

std::string DecisionThresholds::to_text() const {
  std::string s = "# irmap-thresholds v1\n";
  s += "alpha=" + fmt("%.6g", alpha) + "\n";
  s += "beta=" + fmt("%.6g", beta) + "\n";
  s += "theta_ha=" + fmt("%.17g", theta) + "\n";
  s += "alpha_hat=" + fmt("%.6f", alpha_hat) + "\n";
  s += "beta_hat=" + fmt("%.6f", beta_hat) + "\n";
  s += std::string("alpha_met=") + (alpha_met ? "true" : "false") + "\n";
  s += std::string("beta_met=") + (beta_met ? "true" : "false") + "\n";
  return s;
}

DecisionThresholds fit_thresholds(std::span<const double> intact, std::span<const double> tumor, double alpha,
                                  double beta) {
  if (!(alpha > 0.0 && alpha < 1.0) || !(beta > 0.0 && beta < 1.0))
    throw DataError("fit_thresholds: alpha and beta must lie in (0, 1)");
  if (intact.empty() || tumor.empty())
    throw DataError("fit_thresholds: calibration needs both NA and HA pixels (NA=" + std::to_string(intact.size()) +
                    ", HA=" + std::to_string(tumor.size()) + ")");
  std::vector<double> na(intact.begin(), intact.end()), ha(tumor.begin(), tumor.end());
  for (double v : na)
    if (!std::isfinite(v)) throw DataError("fit_thresholds: non-finite score");
  for (double v : ha)
    if (!std::isfinite(v)) throw DataError("fit_thresholds: non-finite score");
  std::sort(na.begin(), na.end());
  std::sort(ha.begin(), ha.end());
  std::vector<double> candidates(na);
  candidates.insert(candidates.end(), ha.begin(), ha.end());
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());

  const auto below = [](const std::vector<double>& v, double t) {
    return static_cast<double>(std::lower_bound(v.begin(), v.end(), t) - v.begin());
  };
  const double n_ha = static_cast<double>(ha.size()), n_na = static_cast<double>(na.size());
  double best_theta = candidates.front();
  double best_fnr = below(ha, best_theta) / n_ha;
  bool met = false;
  for (double t : candidates) {
    const double fnr = below(ha, t) / n_ha;
    if (fnr <= beta) {
      best_theta = t;
      best_fnr = fnr;
      met = true;
    } else if (!met && fnr < best_fnr) {
      best_theta = t;
      best_fnr = fnr;
    }
  }
  DecisionThresholds th;
  th.alpha = alpha;
  th.beta = beta;
  th.theta = std::clamp(best_theta, 0.0, 1.0);
  th.beta_hat = best_fnr;
  th.alpha_hat = (n_na - below(na, best_theta)) / n_na;
  th.beta_met = met;
  th.alpha_met = th.alpha_hat <= alpha;
  return th;
}

DecisionThresholds fit_thresholds(std::span<const ProbabilityMap> probs, std::span<const ZoneMask> refs, double alpha,
                                  double beta) {
  if (probs.size() != refs.size()) throw DataError("fit_thresholds: probability and mask counts differ");
  std::vector<double> intact, tumor;
  for (std::size_t k = 0; k < probs.size(); ++k) {
    if (!probs[k].same_shape(refs[k].labels)) throw DataError("fit_thresholds: shape mismatch");
    for (std::size_t i = 0; i < probs[k].size(); ++i) {
      const ZoneLabel z = refs[k].labels[i];
      if (!is_working(z)) continue;
      (is_tumor(z) ? tumor : intact).push_back(tumor_given_tissue(probs[k][i]));
    }
  }
  return fit_thresholds(intact, tumor, alpha, beta);
}

PriorMask auto_prior(int width, int height, double pixel_size, int margin) {
  if (margin < 0) throw DataError("auto_prior: margin must be >= 0");
  PriorMask p{Grid<PriorZone>(width, height, PriorZone::NWA), pixel_size};
  for (int y = margin; y < height - margin; ++y)
    for (int x = margin; x < width - margin; ++x) p.zones(x, y) = PriorZone::WA;
  return p;
}

PriorMask prior_from_mask(const ZoneMask& mask) {
  PriorMask p{Grid<PriorZone>(mask.width(), mask.height()), mask.pixel_size};
  for (std::size_t i = 0; i < p.zones.size(); ++i) {
    const ZoneLabel z = mask.labels[i];
    p.zones[i] = !is_working(z) ? PriorZone::NWA : is_dura(z) ? PriorZone::DM : PriorZone::BC;
  }
  return p;
}

ZoneMask lps_decide(const ProbabilityMap& probs, const PriorMask& prior, Mode mode, const DecisionThresholds& th) {
  if (!probs.same_shape(prior.zones))
    throw DataError("lps_decide: probabilities are " + std::to_string(probs.width()) + "x" +
                    std::to_string(probs.height()) + ", prior is " + std::to_string(prior.zones.width()) + "x" +
                    std::to_string(prior.zones.height()));
  for (std::size_t i = 0; i < prior.zones.size(); ++i) {
    const PriorZone z = prior.zones[i];
    if ((z == PriorZone::BC && mode == Mode::On) || (z == PriorZone::DM && mode == Mode::Off))
      throw DataError("lps_decide: prior pixel " + std::to_string(i) + " names a layer illegal in mode " +
                      std::string(to_string(mode)));
  }
  ZoneMask out{Grid<ZoneLabel>(probs.width(), probs.height()), prior.pixel_size};
  parallel_for(probs.size(), [&](std::size_t i) {
    const PriorZone z = prior.zones[i];
    const LeafProbs& p = probs[i];
    const double wa = 1.0 - p[index_of(ZoneLabel::NWA)];
    if (z == PriorZone::NWA || wa < 0.5) {
      out.labels[i] = ZoneLabel::NWA;
      return;
    }
    bool dura = false;
    if (z == PriorZone::DM)
      dura = true;
    else if (z == PriorZone::BC)
      dura = false;
    else if (mode == Mode::In)
      dura = p[index_of(ZoneLabel::NA_DM)] + p[index_of(ZoneLabel::HA_DM)] >= 0.5 * wa;
    else
      dura = mode == Mode::On;
    out.labels[i] = make_tissue(!dura, tumor_given_tissue(p) >= th.theta);
  });
  return out;
}

}  // namespace irmap::post
