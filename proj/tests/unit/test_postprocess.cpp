#include <gtest/gtest.h>

#include <random>
#include <set>

#include "irmap/cascade.hpp"
#include "irmap/error.hpp"
#include "irmap/postprocess.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using namespace irmap;
using namespace irmap::post;

namespace {

constexpr double kPixel = 250e-6;  // 0.0625 mm^2 per pixel

Grid<ZoneLabel> filled(int w, int h, ZoneLabel z) { return Grid<ZoneLabel>(w, h, z); }

// Same partition: ids agree up to renaming, which raster-first numbering pins down.
template <typename L>
void expect_matches_flood_fill(const Grid<L>& g, Connectivity conn) {
  const auto cc = connected_components(g, conn);
  const auto oracle = testutil::flood_fill_components(g, conn == Connectivity::Eight);
  ASSERT_TRUE(cc.ids == oracle);
  std::vector<std::size_t> sizes(cc.list.size(), 0);
  for (auto id : oracle.values()) ++sizes[static_cast<std::size_t>(id)];
  for (std::size_t c = 0; c < cc.list.size(); ++c) {
    EXPECT_EQ(cc.list[c].pixels, sizes[c]);
    EXPECT_EQ(cc.list[c].label, g[cc.list[c].seed]);
    EXPECT_EQ(cc.ids[cc.list[c].seed], static_cast<std::int32_t>(c));
  }
}

ProbabilityMap random_probs(int w, int h, Mode mode, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  ProbabilityMap p(w, h);
  for (auto& v : p.values()) v = models::combine_stages(mode, {u(rng), u(rng), u(rng), u(rng)});
  return p;
}

}  // namespace

TEST(ConnectedComponents, SinglePixelInField) {
  auto g = filled(4, 4, ZoneLabel::NA_DM);
  g(1, 1) = ZoneLabel::HA_DM;
  const auto cc = connected_components(g, Connectivity::Eight);
  ASSERT_EQ(cc.list.size(), 2u);
  EXPECT_EQ(cc.list[0].pixels, 15u);
  EXPECT_EQ(cc.list[1].pixels, 1u);
  EXPECT_EQ(cc.list[1].label, ZoneLabel::HA_DM);
  expect_matches_flood_fill(g, Connectivity::Eight);
}

TEST(ConnectedComponents, UniformAndCheckerboard) {
  EXPECT_EQ(connected_components(filled(7, 5, ZoneLabel::NWA)).list.size(), 1u);
  Grid<int> board(6, 6);
  for (int y = 0; y < 6; ++y)
    for (int x = 0; x < 6; ++x) board(x, y) = (x + y) % 2;
  EXPECT_EQ(connected_components(board, Connectivity::Four).list.size(), 36u);
  EXPECT_EQ(connected_components(board, Connectivity::Eight).list.size(), 2u);
}

TEST(ConnectedComponents, DiagonalTouchDependsOnConnectivity) {
  Grid<int> g(3, 3, 0);
  g(0, 0) = 1;
  g(1, 1) = 1;
  EXPECT_EQ(connected_components(g, Connectivity::Four).list.size(), 3u);
  EXPECT_EQ(connected_components(g, Connectivity::Eight).list.size(), 2u);
}

TEST(ConnectedComponents, MatchesFloodFillOnRandomMaps) {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> dim(1, 32), labels(1, 4);
  for (int trial = 0; trial < 300; ++trial) {
    const int w = dim(rng), h = dim(rng), k = labels(rng);
    Grid<int> g(w, h);
    std::uniform_int_distribution<int> pick(0, k - 1);
    for (auto& v : g.values()) v = pick(rng);
    expect_matches_flood_fill(g, Connectivity::Four);
    expect_matches_flood_fill(g, Connectivity::Eight);
  }
}

TEST(ConnectedComponents, SpiralAcrossBandSeams) {
  // Tall maps exercise the band merge: a snake crossing every seam.
  Grid<int> g(9, 300, 0);
  for (int y = 0; y < 300; ++y) g(y % 2 ? 8 : 0, y) = 1;
  for (int y = 0; y < 300; y += 2) {
    const int row_fill = (y / 2) % 2;
    for (int x = 0; x < 9; ++x)
      if (row_fill) g(x, y) = 1;
  }
  expect_matches_flood_fill(g, Connectivity::Four);
  expect_matches_flood_fill(g, Connectivity::Eight);
}

TEST(TopologicalFilter, IsolatedPixelRelabeled) {
  auto g = filled(20, 20, ZoneLabel::NA_DM);
  g(10, 10) = ZoneLabel::HA_DM;
  const auto r = topological_filter(g, kPixel, 2.0);
  EXPECT_TRUE(r.labels == filled(20, 20, ZoneLabel::NA_DM));
  ASSERT_EQ(r.report.components.size(), 2u);
  EXPECT_FALSE(r.report.components[0].relabeled);
  EXPECT_TRUE(r.report.components[1].relabeled);
  EXPECT_DOUBLE_EQ(r.report.components[1].area_mm2, 0.0625);
}

TEST(TopologicalFilter, ThresholdIsInclusive) {
  auto g = filled(20, 20, ZoneLabel::NA_DM);
  for (int y = 5; y < 9; ++y)
    for (int x = 5; x < 13; ++x) g(x, y) = ZoneLabel::HA_DM;  // 32 px = 2.0 mm^2
  const auto r = topological_filter(g, kPixel, 2.0);
  EXPECT_TRUE(r.labels == g);
  g(5, 5) = ZoneLabel::NA_DM;  // 31 px
  EXPECT_TRUE(topological_filter(g, kPixel, 2.0).labels == filled(20, 20, ZoneLabel::NA_DM));
}

TEST(TopologicalFilter, UniformMapUnchanged) {
  const auto g = filled(12, 9, ZoneLabel::NWA);
  const auto r = topological_filter(g, kPixel, 2.0);
  EXPECT_TRUE(r.labels == g);
  ASSERT_EQ(r.report.components.size(), 1u);
  EXPECT_FALSE(r.report.components[0].relabeled);
  EXPECT_EQ(r.report.components[0].pixels, 108u);
}

TEST(TopologicalFilter, MajorityOfBoundary) {
  // A small HA blob bordered mostly by NWA and partly by NA.
  auto g = filled(30, 30, ZoneLabel::NA_DM);
  for (int y = 0; y < 30; ++y)
    for (int x = 0; x < 15; ++x) g(x, y) = ZoneLabel::NWA;
  g(13, 10) = ZoneLabel::HA_DM;
  g(14, 10) = ZoneLabel::HA_DM;
  const auto r = topological_filter(g, kPixel, 2.0);
  EXPECT_EQ(r.labels(13, 10), ZoneLabel::NWA);
  EXPECT_EQ(r.labels(14, 10), ZoneLabel::NWA);
}

TEST(TopologicalFilter, TieGoesToLargerFrameArea) {
  // Pixel (split, 20) sees four NWA and four NA neighbours.
  for (int split : {5, 34}) {
    Grid<ZoneLabel> g(40, 40, ZoneLabel::NA_DM);
    for (int y = 0; y < 40; ++y)
      for (int x = 0; x < 40; ++x)
        if (x < split || (x == split && y < 20)) g(x, y) = ZoneLabel::NWA;
    g(split, 20) = ZoneLabel::HA_DM;
    const ZoneLabel expected = split < 20 ? ZoneLabel::NA_DM : ZoneLabel::NWA;
    EXPECT_EQ(topological_filter(g, kPixel, 0.5).labels(split, 20), expected) << "split " << split;
  }
}

TEST(TopologicalFilter, SmallFrameWarns) {
  auto g = filled(4, 4, ZoneLabel::NA_DM);
  g(1, 1) = ZoneLabel::HA_DM;
  const auto r = topological_filter(g, kPixel, 2.0);  // 1 mm^2 frame
  EXPECT_TRUE(r.labels == g);
  EXPECT_FALSE(r.report.warnings.empty());
  EXPECT_THROW(topological_filter(g, kPixel, -1.0), DataError);
}

TEST(TopologicalFilter, FixedPointAndNoNewLabels) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 60; ++trial) {
    const Mode mode = static_cast<Mode>(trial % 3);
    auto g = testutil::random_labels(32, 24, mode, rng);
    const auto once = topological_filter(g, kPixel, 0.5);
    const auto twice = topological_filter(once.labels, kPixel, 0.5);
    EXPECT_TRUE(twice.labels == once.labels);
    std::set<ZoneLabel> before(g.values().begin(), g.values().end());
    for (ZoneLabel z : once.labels.values()) EXPECT_TRUE(before.count(z));
    for (const auto& c : connected_components(once.labels).list)
      EXPECT_GE(static_cast<double>(c.pixels) * 0.0625, 0.5);
  }
}

TEST(ProbabilisticFilter, RadiusZeroAndUniform) {
  std::mt19937_64 rng(1);
  const auto p = random_probs(10, 8, Mode::In, rng);
  EXPECT_TRUE(probabilistic_filter(p, 0) == p);
  ProbabilityMap u(10, 8, LeafProbs{0.1, 0.2, 0.3, 0.25, 0.15});
  const auto s = probabilistic_filter(u, 2);
  for (std::size_t i = 0; i < s.size(); ++i)
    for (std::size_t c = 0; c < kZoneCount; ++c) EXPECT_NEAR(s[i][c], u[i][c], 1e-15);
  EXPECT_THROW(probabilistic_filter(p, -1), DataError);
}

TEST(ProbabilisticFilter, SinglePixelSpreadsToNinths) {
  ProbabilityMap p(9, 9, LeafProbs{0, 1, 0, 0, 0});
  p(4, 4) = LeafProbs{0, 0, 1, 0, 0};
  const auto s = probabilistic_filter(p, 1);
  for (int y = 0; y < 9; ++y)
    for (int x = 0; x < 9; ++x) {
      const bool near = std::abs(x - 4) <= 1 && std::abs(y - 4) <= 1;
      EXPECT_NEAR(s(x, y)[index_of(ZoneLabel::HA_DM)], near ? 1.0 / 9.0 : 0.0, 1e-12);
    }
}

TEST(ProbabilisticFilter, NormalizedAndWithinNeighbourhoodRange) {
  std::mt19937_64 rng(2);
  const int r = 2;
  const auto p = random_probs(17, 13, Mode::In, rng);
  const auto s = probabilistic_filter(p, r);
  for (int y = 0; y < 13; ++y)
    for (int x = 0; x < 17; ++x) {
      double sum = 0.0;
      for (std::size_t c = 0; c < kZoneCount; ++c) {
        sum += s(x, y)[c];
        double lo = 1.0, hi = 0.0;
        for (int dy = -r; dy <= r; ++dy)
          for (int dx = -r; dx <= r; ++dx)
            if (p.contains(x + dx, y + dy)) {
              lo = std::min(lo, p(x + dx, y + dy)[c]);
              hi = std::max(hi, p(x + dx, y + dy)[c]);
            }
        EXPECT_GE(s(x, y)[c], lo - 1e-12);
        EXPECT_LE(s(x, y)[c], hi + 1e-12);
      }
      EXPECT_NEAR(sum, 1.0, 1e-9);
    }
}

TEST(FitThresholds, Separable) {
  const std::vector<double> na(50, 0.1), ha(20, 0.9);
  const auto t = fit_thresholds(na, ha, 0.05, 0.05);
  EXPECT_EQ(t.alpha_hat, 0.0);
  EXPECT_EQ(t.beta_hat, 0.0);
  EXPECT_TRUE(t.alpha_met);
  EXPECT_TRUE(t.beta_met);
  EXPECT_GT(t.theta, 0.1);
  EXPECT_LE(t.theta, 0.9);
}

TEST(FitThresholds, HandSweep) {
  const std::vector<double> na = {0.3}, ha = {0.9, 0.4};
  const auto t = fit_thresholds(na, ha, 0.05, 0.5);
  EXPECT_GT(t.theta, 0.4);
  EXPECT_LE(t.theta, 0.9);
  EXPECT_DOUBLE_EQ(t.beta_hat, 0.5);
  EXPECT_DOUBLE_EQ(t.alpha_hat, 0.0);
}

TEST(FitThresholds, LargeBetaAndErrors) {
  const std::vector<double> na = {0.2, 0.6}, ha = {0.5, 0.7};
  const auto t = fit_thresholds(na, ha, 0.05, 0.999);
  EXPECT_LE(t.beta_hat, 0.999);
  EXPECT_DOUBLE_EQ(t.theta, 0.7);
  const std::vector<double> empty;
  EXPECT_THROW(fit_thresholds(empty, ha, 0.05, 0.05), DataError);
  EXPECT_THROW(fit_thresholds(na, empty, 0.05, 0.05), DataError);
  EXPECT_THROW(fit_thresholds(na, ha, 0.0, 0.05), DataError);
  EXPECT_THROW(fit_thresholds(na, ha, 0.05, 1.0), DataError);
}

TEST(FitThresholds, RatesMatchRecount) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> a(0.3, 0.15), b(0.7, 0.15);
  std::vector<double> na, ha;
  for (int i = 0; i < 500; ++i) na.push_back(std::clamp(a(rng), 0.0, 1.0));
  for (int i = 0; i < 300; ++i) ha.push_back(std::clamp(b(rng), 0.0, 1.0));
  const auto t = fit_thresholds(na, ha, 0.05, 0.1);
  const double fnr = std::count_if(ha.begin(), ha.end(), [&](double p) { return p < t.theta; }) / 300.0;
  const double fpr = std::count_if(na.begin(), na.end(), [&](double p) { return p >= t.theta; }) / 500.0;
  EXPECT_DOUBLE_EQ(t.beta_hat, fnr);
  EXPECT_DOUBLE_EQ(t.alpha_hat, fpr);
  EXPECT_LE(fnr, 0.1);
  // Largest admissible theta: the next distinct score up would exceed beta.
  std::vector<double> all(na);
  all.insert(all.end(), ha.begin(), ha.end());
  std::sort(all.begin(), all.end());
  const auto next = std::upper_bound(all.begin(), all.end(), t.theta);
  if (next != all.end()) {
    const double fnr_next = std::count_if(ha.begin(), ha.end(), [&](double p) { return p < *next; }) / 300.0;
    EXPECT_GT(fnr_next, 0.1);
  }
}

TEST(Lps, AllNwaPrior) {
  std::mt19937_64 rng(4);
  const auto p = random_probs(8, 6, Mode::In, rng);
  PriorMask prior{Grid<PriorZone>(8, 6, PriorZone::NWA), kPixel};
  const auto z = lps_decide(p, prior, Mode::In, {});
  for (ZoneLabel l : z.labels.values()) EXPECT_EQ(l, ZoneLabel::NWA);
  EXPECT_DOUBLE_EQ(z.pixel_size, kPixel);
}

TEST(Lps, OnModeTumorPixel) {
  ProbabilityMap p(1, 1, LeafProbs{0.0, 0.4, 0.6, 0.0, 0.0});
  PriorMask prior{Grid<PriorZone>(1, 1, PriorZone::WA), kPixel};
  DecisionThresholds th;
  th.theta = 0.5;
  EXPECT_EQ(lps_decide(p, prior, Mode::On, th).labels(0, 0), ZoneLabel::HA_DM);
  th.theta = 0.7;
  EXPECT_EQ(lps_decide(p, prior, Mode::On, th).labels(0, 0), ZoneLabel::NA_DM);
}

TEST(Lps, PriorLayerWinsInInMode) {
  ProbabilityMap p(2, 1, LeafProbs{0.0, 0.7, 0.1, 0.1, 0.1});
  PriorMask prior{Grid<PriorZone>(2, 1, PriorZone::BC), kPixel};
  prior.zones(1, 0) = PriorZone::WA;
  const auto z = lps_decide(p, prior, Mode::In, {});
  EXPECT_EQ(z.labels(0, 0), ZoneLabel::NA_BC);
  EXPECT_EQ(z.labels(1, 0), ZoneLabel::NA_DM);
}

TEST(Lps, Errors) {
  ProbabilityMap p(2, 2);
  PriorMask wrong{Grid<PriorZone>(3, 2, PriorZone::WA), kPixel};
  EXPECT_THROW(lps_decide(p, wrong, Mode::On, {}), DataError);
  PriorMask bc{Grid<PriorZone>(2, 2, PriorZone::BC), kPixel};
  EXPECT_THROW(lps_decide(p, bc, Mode::On, {}), DataError);
  PriorMask dm{Grid<PriorZone>(2, 2, PriorZone::DM), kPixel};
  EXPECT_THROW(lps_decide(p, dm, Mode::Off, {}), DataError);
}

TEST(Lps, FuzzLegalityAndRespectsPrior) {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 90; ++trial) {
    const Mode mode = static_cast<Mode>(trial % 3);
    const auto p = random_probs(16, 12, mode, rng);
    auto prior = auto_prior(16, 12, kPixel, 2);
    if (mode == Mode::In)
      for (auto& z : prior.zones.values())
        if (z == PriorZone::WA && u(rng) < 0.3) z = u(rng) < 0.5 ? PriorZone::DM : PriorZone::BC;
    DecisionThresholds th;
    th.theta = u(rng);
    const auto z = lps_decide(p, prior, mode, th);
    EXPECT_NO_THROW(check_legal(z.labels, mode));
    for (std::size_t i = 0; i < z.labels.size(); ++i) {
      if (prior.zones[i] == PriorZone::NWA) {
        EXPECT_EQ(z.labels[i], ZoneLabel::NWA);
      }
      if (prior.zones[i] == PriorZone::DM && z.labels[i] != ZoneLabel::NWA) {
        EXPECT_TRUE(is_dura(z.labels[i]));
      }
      if (prior.zones[i] == PriorZone::BC && z.labels[i] != ZoneLabel::NWA) {
        EXPECT_TRUE(is_cortex(z.labels[i]));
      }
    }
  }
}

TEST(Prior, AutoAndFromMask) {
  const auto a = auto_prior(10, 8, kPixel, 2);
  EXPECT_EQ(a.zones(0, 0), PriorZone::NWA);
  EXPECT_EQ(a.zones(1, 7), PriorZone::NWA);
  EXPECT_EQ(a.zones(2, 2), PriorZone::WA);
  EXPECT_EQ(a.zones(7, 5), PriorZone::WA);
  EXPECT_EQ(a.zones(8, 5), PriorZone::NWA);
  ZoneMask m{Grid<ZoneLabel>(3, 1, ZoneLabel::NWA), kPixel};
  m.labels(1, 0) = ZoneLabel::HA_DM;
  m.labels(2, 0) = ZoneLabel::NA_BC;
  const auto p = prior_from_mask(m);
  EXPECT_EQ(p.zones(0, 0), PriorZone::NWA);
  EXPECT_EQ(p.zones(1, 0), PriorZone::DM);
  EXPECT_EQ(p.zones(2, 0), PriorZone::BC);
}

TEST(Reports, TextHeaders) {
  const auto r = topological_filter(filled(10, 10, ZoneLabel::NA_DM), kPixel, 2.0);
  EXPECT_EQ(r.report.to_text().rfind("# irmap-components v1", 0), 0u);
  EXPECT_EQ(DecisionThresholds{}.to_text().rfind("# irmap-thresholds v1", 0), 0u);
}
