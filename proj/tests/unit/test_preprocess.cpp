#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "irmap/error.hpp"
#include "irmap/phantom.hpp"
#include "irmap/preprocess.hpp"

using namespace irmap;
using namespace irmap::preprocess;

namespace {

// Smooth textured frame so correlation peaks are sharp but interpolable.
Grid<float> texture(int w, int h, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 6.28);
  double phase[6];
  for (double& p : phase) p = u(rng);
  Grid<float> g(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      g(x, y) = static_cast<float>(30.0 + 2.0 * std::sin(0.31 * x + phase[0]) * std::cos(0.23 * y + phase[1]) +
                                   1.5 * std::sin(0.17 * x + 0.29 * y + phase[2]) +
                                   std::cos(0.41 * x - 0.13 * y + phase[3]));
  return g;
}

// target(x + dx, y + dy) = reference(x, y) for integer shifts.
Grid<float> shifted_copy(const Grid<float>& ref, int dx, int dy) {
  Grid<float> out(ref.width(), ref.height());
  for (int y = 0; y < ref.height(); ++y)
    for (int x = 0; x < ref.width(); ++x) {
      const int sx = std::clamp(x - dx, 0, ref.width() - 1), sy = std::clamp(y - dy, 0, ref.height() - 1);
      out(x, y) = ref(sx, sy);
    }
  return out;
}

phantom::PhantomConfig drift_config(int n_frames) {
  phantom::PhantomConfig c;
  c.width = 96;
  c.height = 80;
  c.n_frames = n_frames;
  c.noise_sigma = 0.0;
  c.tumors.push_back({{40.0, 36.0, 14.0, 10.0, 0.4}, std::nullopt});
  c.vessels.push_back({20.0, 60.0, 80.0, 20.0, 3.0, std::nullopt});
  return c;
}

}  // namespace

TEST(EstimateShift, IdenticalFramesGiveZero) {
  const auto a = texture(64, 64, 1);
  const auto s = estimate_shift(view(a), view(a), 5);
  EXPECT_EQ(s.dx, 0.0);
  EXPECT_EQ(s.dy, 0.0);
  EXPECT_FALSE(s.fatal);
  EXPECT_NEAR(s.peak_score, 1.0, 1e-9);
}

TEST(EstimateShift, IntegerShiftIsExact) {
  const auto a = texture(64, 64, 2);
  const auto b = shifted_copy(a, 3, -2);
  const auto s = estimate_shift(view(a), view(b), 5);
  EXPECT_EQ(s.dx, 3.0);
  EXPECT_EQ(s.dy, -2.0);
}

TEST(EstimateShift, HalfPixelShiftWithinQuarterPixel) {
  const auto a = texture(64, 64, 3);
  Grid<float> b(64, 64);
  std::vector<std::uint8_t> valid(b.size());
  // b(x, y) = a(x - 0.5, y): content moved by +0.5 in x.
  resample_shifted(view(a), -0.5, 0.0, b.values(), valid);
  const auto s = estimate_shift(view(a), view(b), 5);
  EXPECT_NEAR(s.dx, 0.5, 0.25);
  EXPECT_NEAR(s.dy, 0.0, 0.25);
}

TEST(EstimateShift, BoundaryPeakIsFatal) {
  const auto a = texture(64, 64, 4);
  const auto b = shifted_copy(a, 7, 0);
  const auto s = estimate_shift(view(a), view(b), 5);
  EXPECT_TRUE(s.fatal);
}

TEST(ResampleShifted, ZeroShiftIsIdentityAndOutsideIsInvalid) {
  const auto a = texture(32, 32, 5);
  Grid<float> out(32, 32);
  std::vector<std::uint8_t> valid(out.size(), 1);
  resample_shifted(view(a), 0.0, 0.0, out.values(), valid);
  EXPECT_TRUE(out == a);
  for (auto v : valid) EXPECT_EQ(v, 1);
  std::fill(valid.begin(), valid.end(), 1);
  resample_shifted(view(a), 2.0, 0.0, out.values(), valid);
  EXPECT_EQ(valid[out.index(31, 5)], 0);
  EXPECT_EQ(valid[out.index(29, 5)], 1);
  EXPECT_EQ(out(3, 4), a(5, 4));
}

TEST(RegisterSequence, ZeroDriftIsBitIdentical) {
  const auto p = phantom::generate_phantom(drift_config(8), 1);
  const auto r = register_sequence(p.sequence);
  EXPECT_TRUE(r.sequence == p.sequence);
  EXPECT_TRUE(r.report.deleted.empty());
  EXPECT_EQ(r.report.valid_pixels(), p.sequence.frame_size());
}

TEST(RegisterSequence, RecoversKnownDriftNoiseless) {
  auto c = drift_config(10);
  c.shift_schedule.assign(10, {});
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (int k = 1; k < 10; ++k) c.shift_schedule[static_cast<std::size_t>(k)] = {u(rng), u(rng)};
  const auto p = phantom::generate_phantom(c, 2);
  const auto r = register_sequence(p.sequence);
  for (int k = 1; k < 10; ++k) {
    const auto& est = r.report.shifts[static_cast<std::size_t>(k)];
    EXPECT_NEAR(est.dx, c.shift_schedule[static_cast<std::size_t>(k)].dx, 0.25) << "frame " << k;
    EXPECT_NEAR(est.dy, c.shift_schedule[static_cast<std::size_t>(k)].dy, 0.25) << "frame " << k;
    const auto residual = estimate_shift(r.sequence.frame_view(0), r.sequence.frame_view(k), 5);
    EXPECT_LE(std::hypot(residual.dx, residual.dy), 0.25) << "frame " << k;
  }
  EXPECT_LT(r.report.valid_pixels(), p.sequence.frame_size());
}

TEST(RegisterSequence, LargeShiftFrameIsFatal) {
  auto c = drift_config(6);
  c.shift_schedule.assign(6, {});
  c.shift_schedule[3] = {7.0, 0.0};
  const auto p = phantom::generate_phantom(c, 2);
  auto reg = register_sequence(p.sequence);
  EXPECT_TRUE(reg.report.shifts[3].fatal);
  for (int k : {1, 2, 4, 5}) EXPECT_FALSE(reg.report.shifts[static_cast<std::size_t>(k)].fatal);
  const auto r = remove_damaged_frames(reg.sequence, reg.report);
  ASSERT_EQ(r.report.deleted.size(), 1u);
  EXPECT_EQ(r.report.deleted[0].index, 3);
  EXPECT_EQ(r.report.deleted[0].reason, DeletionReason::FatalShift);
}

TEST(RegisterSequence, Idempotent) {
  auto c = drift_config(8);
  c.shift_schedule.assign(8, {});
  for (int k = 1; k < 8; ++k) c.shift_schedule[static_cast<std::size_t>(k)] = {0.3 * k, -0.2 * k};
  const auto p = phantom::generate_phantom(c, 5);
  const auto once = register_sequence(p.sequence);
  const auto twice = register_sequence(once.sequence);
  const auto a = once.sequence.data();
  const auto b = twice.sequence.data();
  ASSERT_EQ(a.size(), b.size());
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(static_cast<double>(a[i]) - b[i]));
  EXPECT_LE(worst, 1e-6);
}

TEST(RegisterSequence, NeedsTwoFrames) {
  ThermalSequence s(32, 32, {0.0}, 1e-4);
  EXPECT_THROW(register_sequence(s), DataError);
}

TEST(RemoveDamagedFrames, DeletesOccludedFrame) {
  auto c = drift_config(20);
  c.noise_sigma = 0.03;
  // 20% of the frame at instrument temperature.
  c.damaged_frames.push_back({7, 0, 0, c.width / 2, static_cast<int>(std::ceil(0.4 * c.height)), 25.0});
  const auto p = phantom::generate_phantom(c, 4);
  auto reg = register_sequence(p.sequence);
  const auto r = remove_damaged_frames(reg.sequence, reg.report);
  ASSERT_EQ(r.report.deleted.size(), 1u);
  EXPECT_EQ(r.report.deleted[0].index, 7);
  EXPECT_EQ(r.report.deleted[0].reason, DeletionReason::ForeignObject);
  EXPECT_EQ(r.sequence.n_frames(), 19);
  EXPECT_EQ(r.report.kept.size(), 19u);
  for (int t = 0; t < r.sequence.n_frames(); ++t)
    EXPECT_EQ(r.sequence.timestamp(t), p.sequence.timestamp(r.report.kept[static_cast<std::size_t>(t)]));
}

TEST(RemoveDamagedFrames, CleanSequenceKeepsEverything) {
  auto c = drift_config(30);
  c.noise_sigma = 0.03;
  const auto p = phantom::generate_phantom(c, 6);
  auto reg = register_sequence(p.sequence);
  const auto r = remove_damaged_frames(reg.sequence, reg.report);
  EXPECT_TRUE(r.report.deleted.empty());
  EXPECT_EQ(r.sequence.n_frames(), 30);
}

TEST(RemoveDamagedFrames, KeptAndDeletedPartitionFrames) {
  auto c = drift_config(12);
  c.shift_schedule.assign(12, {});
  c.shift_schedule[2] = {8.0, 0.0};
  c.damaged_frames.push_back({9, 0, 0, c.width / 2, static_cast<int>(std::ceil(0.4 * c.height)), 25.0});
  const auto p = phantom::generate_phantom(c, 4);
  auto reg = register_sequence(p.sequence);
  const auto r = remove_damaged_frames(reg.sequence, reg.report);
  std::vector<int> all(r.report.kept);
  for (const auto& d : r.report.deleted) all.push_back(d.index);
  std::sort(all.begin(), all.end());
  std::vector<int> expected(12);
  std::iota(expected.begin(), expected.end(), 0);
  EXPECT_EQ(all, expected);
}

TEST(RemoveDamagedFrames, AllOccludedAborts) {
  auto c = drift_config(6);
  // Disjoint stripes: the temporal median stays clean while every frame is occluded.
  const int stripe = c.height / 6;
  for (int k = 0; k < 6; ++k) c.damaged_frames.push_back({k, 0, k * stripe, c.width, stripe, 25.0});
  const auto p = phantom::generate_phantom(c, 4);
  EXPECT_THROW(
      {
        auto reg = register_sequence(p.sequence);
        remove_damaged_frames(reg.sequence, reg.report);
      },
      DataError);
}

TEST(FitRecovery, NoiselessExact) {
  std::vector<double> t, v;
  for (int k = 0; k < 60; ++k) {
    t.push_back(k);
    v.push_back(phantom::recovery_curve({36.0, 10.0, 30.0}, k));
  }
  const auto f = fit_recovery(v, t);
  ASSERT_FALSE(f.degenerate);
  EXPECT_NEAR(f.base_temp, 36.0, 36.0 * 1e-6);
  EXPECT_NEAR(f.depth, 10.0, 10.0 * 1e-6);
  EXPECT_NEAR(f.tau, 30.0, 30.0 * 1e-6);
  EXPECT_LT(f.rmse, 1e-6);
  EXPECT_EQ(f.n_used, 60);
}

TEST(FitRecovery, ConstantSeriesIsDegenerate) {
  std::vector<double> t, v(20, 36.0);
  for (int k = 0; k < 20; ++k) t.push_back(k);
  const auto f = fit_recovery(v, t);
  EXPECT_TRUE(f.degenerate);
  EXPECT_NEAR(f.depth, 0.0, 1e-12);
}

TEST(FitRecovery, JunkNeverThrows) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1e6, 1e6);
  std::vector<double> t;
  for (int k = 0; k < 30; ++k) t.push_back(k);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> v(30);
    for (double& x : v) x = u(rng);
    if (trial % 3 == 0) v[static_cast<std::size_t>(trial % 30)] = NAN;
    if (trial % 5 == 0) v[1] = INFINITY;
    RecoveryFit f;
    EXPECT_NO_THROW(f = fit_recovery(v, t));
    EXPECT_GE(f.rmse, 0.0);
    EXPECT_LE(f.n_used, 30);
  }
  std::vector<double> few = {1.0, 2.0};
  std::vector<double> few_t = {0.0, 1.0};
  EXPECT_TRUE(fit_recovery(few, few_t).degenerate);
}

TEST(FitRecovery, RejectsBadTimes) {
  std::vector<double> v = {1.0, 2.0, 3.0};
  std::vector<double> t = {0.0, 2.0, 1.0};
  EXPECT_THROW(fit_recovery(v, t), DataError);
  std::vector<double> short_t = {0.0, 1.0};
  EXPECT_THROW(fit_recovery(v, short_t), DataError);
}

TEST(FitRecovery, NoisyRmseNearSigma) {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> noise(0.0, 0.03);
  std::vector<double> t;
  for (int k = 0; k < 60; ++k) t.push_back(k);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> v;
    for (double tk : t) v.push_back(phantom::recovery_curve({36.0, 10.0, 30.0}, tk) + noise(rng));
    const auto f = fit_recovery(v, t);
    EXPECT_GE(f.rmse, 0.5 * 0.03);
    EXPECT_LE(f.rmse, 2.0 * 0.03);
  }
}

TEST(PreprocessReport, TextListsEveryFrame) {
  auto c = drift_config(5);
  const auto p = phantom::generate_phantom(c, 1);
  auto reg = register_sequence(p.sequence);
  const auto r = remove_damaged_frames(reg.sequence, reg.report);
  const auto text = r.report.to_text();
  EXPECT_EQ(text.rfind("# irmap-preprocess v1", 0), 0u);
  for (int k = 0; k < 5; ++k) EXPECT_NE(text.find("shift " + std::to_string(k) + " "), std::string::npos);
}
