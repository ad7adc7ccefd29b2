#include <gtest/gtest.h>

#include <cmath>

#include "irmap/error.hpp"
#include "irmap/phantom.hpp"
#include "irmap/preprocess.hpp"

using namespace irmap;
using namespace irmap::phantom;

TEST(RecoveryCurve, StartsAtBaseMinusDepth) { EXPECT_DOUBLE_EQ(recovery_curve({36.0, 10.0, 30.0}, 0.0), 26.0); }

TEST(RecoveryCurve, ApproachesBase) { EXPECT_NEAR(recovery_curve({36.0, 10.0, 30.0}, 1e4), 36.0, 1e-6); }

TEST(RecoveryCurve, OneTimeConstant) {
  // 36 - 10 / e
  EXPECT_NEAR(recovery_curve({36.0, 10.0, 30.0}, 30.0), 32.321206, 1e-6);
}

TEST(RecoveryCurve, MonotoneForPositiveDepth) {
  double prev = recovery_curve({36.0, 10.0, 30.0}, 0.0);
  for (double t = 0.5; t < 200.0; t += 0.5) {
    const double v = recovery_curve({36.0, 10.0, 30.0}, t);
    EXPECT_GE(v, prev);
    prev = v;
  }
}

TEST(RecoveryCurve, RejectsBadInput) {
  EXPECT_THROW(recovery_curve({36.0, 10.0, 0.0}, 1.0), DataError);
  EXPECT_THROW(recovery_curve({36.0, 10.0, -1.0}, 1.0), DataError);
  EXPECT_THROW(recovery_curve({36.0, 10.0, 30.0}, -1.0), DataError);
  EXPECT_THROW(recovery_curve({NAN, 10.0, 30.0}, 1.0), DataError);
  EXPECT_THROW(recovery_curve({36.0, INFINITY, 30.0}, 1.0), DataError);
}

TEST(Phantom, DefaultFrameSize) {
  PhantomConfig c;
  const auto p = generate_phantom(c, 1);
  EXPECT_EQ(p.sequence.frame_size(), 76800u);
  EXPECT_EQ(p.mask.labels.size(), 76800u);
  // 71 maps of this size give the published pixel total.
  EXPECT_EQ(71u * p.sequence.frame_size(), 5452800u);
}

TEST(Phantom, NoTumorsMeansNoHA) {
  PhantomConfig c;
  c.width = 64;
  c.height = 48;
  const auto p = generate_phantom(c, 3);
  EXPECT_EQ(p.report.zone_counts[index_of(ZoneLabel::HA_DM)], 0u);
  EXPECT_EQ(p.report.zone_counts[index_of(ZoneLabel::HA_BC)], 0u);
}

TEST(Phantom, Deterministic) {
  ConfigSampler s;
  s.base.width = 80;
  s.base.height = 64;
  const auto c = s.sample(Mode::In, 11);
  const auto a = generate_phantom(c, 5);
  const auto b = generate_phantom(c, 5);
  EXPECT_TRUE(a.sequence == b.sequence);
  EXPECT_EQ(a.mask, b.mask);
  const auto other = generate_phantom(c, 6);
  EXPECT_FALSE(a.sequence == other.sequence);
}

TEST(Phantom, MaskMatchesGeometryAndMode) {
  ConfigSampler s;
  s.base.width = 96;
  s.base.height = 72;
  for (Mode m : kAllModes) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const auto c = s.sample(m, seed);
      const auto p = generate_phantom(c, seed);
      EXPECT_EQ(p.mask, phantom_geometry(c));
      EXPECT_NO_THROW(check_legal(p.mask.labels, m));
      std::uint64_t total = 0;
      for (auto n : p.report.zone_counts) total += n;
      EXPECT_EQ(total, p.mask.labels.size());
      // Border band is NWA.
      for (int x = 0; x < c.width; ++x) EXPECT_EQ(p.mask.labels(x, 0), ZoneLabel::NWA);
    }
  }
}

TEST(Phantom, NoiseMatchesSigma) {
  PhantomConfig c;
  c.width = 128;
  c.height = 96;
  c.n_frames = 4;
  c.noise_sigma = 0.03;
  auto clean_cfg = c;
  clean_cfg.noise_sigma = 0.0;
  const auto noisy = generate_phantom(c, 9);
  const auto clean = generate_phantom(clean_cfg, 9);
  double sum = 0.0, sum2 = 0.0;
  std::size_t n = 0;
  for (int t = 0; t < c.n_frames; ++t) {
    const auto a = noisy.sequence.frame(t);
    const auto b = clean.sequence.frame(t);
    for (std::size_t i = 0; i < a.size(); ++i) {
      const double r = static_cast<double>(a[i]) - b[i];
      sum += r;
      sum2 += r * r;
      ++n;
    }
  }
  ASSERT_GE(n, 10000u);
  const double mean = sum / n;
  const double sd = std::sqrt(sum2 / n - mean * mean);
  EXPECT_NEAR(sd, 0.03, 0.003);
}

TEST(Phantom, DisjointTauRangesAreSeparableByFittedTau) {
  ConfigSampler s;
  s.base.width = 96;
  s.base.height = 80;
  s.base.noise_sigma = 0.0;
  s.vessel_probability = 0.0;
  s.damaged_probability = 0.0;
  s.max_drift = 0.0;
  const auto c = s.sample(Mode::On, 4);
  const auto p = generate_phantom(c, 4);
  const auto& r = c.recovery;
  const double cut = 0.5 * (r[index_of(ZoneLabel::NA_DM)].tau.hi + r[index_of(ZoneLabel::HA_DM)].tau.lo);
  ASSERT_LT(r[index_of(ZoneLabel::NA_DM)].tau.hi, r[index_of(ZoneLabel::HA_DM)].tau.lo);
  std::vector<double> series(static_cast<std::size_t>(c.n_frames));
  std::size_t tissue = 0, correct = 0;
  for (std::size_t i = 0; i < p.mask.labels.size(); ++i) {
    const ZoneLabel z = p.mask.labels[i];
    if (!is_working(z)) continue;
    p.sequence.pixel_series(i, series);
    const auto fit = preprocess::fit_recovery(series, p.sequence.timestamps());
    ++tissue;
    correct += (fit.tau > cut) == is_tumor(z);
  }
  ASSERT_GT(tissue, 0u);
  EXPECT_EQ(correct, tissue);
}

TEST(Phantom, StructuresCarryTumorDynamicsButIntactLabels) {
  PhantomConfig c;
  c.width = 64;
  c.height = 48;
  c.noise_sigma = 0.0;
  c.vessels.push_back({20, 24, 44, 24, 3.0, std::nullopt});
  const auto p = generate_phantom(c, 2);
  EXPECT_GT(p.report.structure_pixels, 0u);
  EXPECT_EQ(p.mask.labels(32, 24), ZoneLabel::NA_DM);
  std::vector<double> series(static_cast<std::size_t>(c.n_frames));
  p.sequence.pixel_series(p.mask.labels.index(32, 24), series);
  const auto fit = preprocess::fit_recovery(series, p.sequence.timestamps());
  const auto& ha = c.recovery[index_of(ZoneLabel::HA_DM)].tau;
  EXPECT_GE(fit.tau, ha.lo - 1e-6);
  EXPECT_LE(fit.tau, ha.hi + 1e-6);
}

TEST(Phantom, OccluderOverwritesFrame) {
  PhantomConfig c;
  c.width = 64;
  c.height = 48;
  c.damaged_frames.push_back({5, 0, 0, 32, 24, 25.0});
  const auto p = generate_phantom(c, 1);
  EXPECT_NEAR(p.sequence.at(5, 3, 3), 25.0, 0.2);
  EXPECT_EQ(p.report.damaged_frames, std::vector<int>{5});
}

TEST(Phantom, ValidateRejectsBadConfigs) {
  PhantomConfig c;
  c.n_frames = 2;
  EXPECT_THROW(generate_phantom(c, 0), DataError);
  c = PhantomConfig{};
  c.coolant_temp = 40.0;
  EXPECT_THROW(c.validate(), DataError);
  c = PhantomConfig{};
  c.noise_sigma = -1.0;
  EXPECT_THROW(c.validate(), DataError);
  c = PhantomConfig{};
  c.tumors.push_back({{1000.0, 1000.0, 5.0, 5.0, 0.0}, std::nullopt});
  EXPECT_THROW(c.validate(), DataError);
  c = PhantomConfig{};
  c.shift_schedule.resize(3);
  EXPECT_THROW(c.validate(), DataError);
  c = PhantomConfig{};
  c.damaged_frames.push_back({0, 500, 500, 10, 10, 25.0});
  EXPECT_THROW(c.validate(), DataError);
}

TEST(ConfigSampler, ProducesValidConfigsWithinBounds) {
  ConfigSampler s;
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const auto c = s.sample(Mode::On, seed);
    EXPECT_NO_THROW(c.validate());
    EXPECT_GE(c.tumors.size(), 1u);
    EXPECT_LE(static_cast<int>(c.tumors.size()), s.max_tumors);
    for (const auto& sh : c.shift_schedule) {
      EXPECT_LE(std::abs(sh.dx), s.max_drift);
      EXPECT_LE(std::abs(sh.dy), s.max_drift);
    }
    if (!c.shift_schedule.empty()) {
      EXPECT_EQ(c.shift_schedule[0].dx, 0.0);
      EXPECT_EQ(c.shift_schedule[0].dy, 0.0);
    }
    for (const auto& o : c.damaged_frames) {
      EXPECT_GE(o.frame, 1);
      // Occluder covers at least a fifth of the frame.
      EXPECT_GE(static_cast<double>(o.width) * o.height, 0.2 * c.width * c.height);
    }
  }
}
