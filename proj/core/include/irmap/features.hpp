#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "irmap/preprocess.hpp"

namespace irmap::features {

inline constexpr std::size_t kCurveSamples = 8;
inline constexpr std::size_t kFeatureCount = 16;

/// Feature layout. Degenerate pixels carry zeros in every slot except
/// kDegenerate, which is 1.
enum FeatureIndex : std::size_t {
  kBaseTemp = 0,
  kDepth = 1,
  kTau = 2,
  kRmse = 3,
  kStartTemp = 4,     // first observed sample
  kInitialSlope = 5,  // least-squares slope over the first 3 samples, C/s
  kT63 = 6,           // time at which the series reaches base - depth/e
  kCurve = 7,         // kCurveSamples uniformly resampled values, min-max normalized
  kDegenerate = kCurve + kCurveSamples,
};
static_assert(kDegenerate + 1 == kFeatureCount);

using FeatureVector = std::array<double, kFeatureCount>;

/// Deterministic; (time, value) pairs are processed in time order, so the
/// input order of frames does not matter. Non-finite samples are skipped.
FeatureVector extract_features(const preprocess::RecoveryFit& fit, std::span<const double> series,
                               std::span<const double> times);

FeatureVector degenerate_features();

/// Row-major real matrix.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), values_(rows * cols, 0.0) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::span<double> row(std::size_t r) { return {values_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {values_.data() + r * cols_, cols_}; }
  double& operator()(std::size_t r, std::size_t c) { return values_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return values_[r * cols_ + c]; }
  std::span<const double> values() const { return values_; }

  void append_row(std::span<const double> r);

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> values_;
};

/// z-score transform with population std, clamped below at 1e-12.
/// Constant columns get scale 1e-12 and map exactly to 0.
class Standardizer {
 public:
  Standardizer() = default;
  Standardizer(std::vector<double> mean, std::vector<double> scale);

  std::size_t dimension() const { return mean_.size(); }
  const std::vector<double>& mean() const { return mean_; }
  const std::vector<double>& scale() const { return scale_; }

  /// Throws DataError on dimension mismatch.
  void apply(std::span<const double> x, std::span<double> out) const;
  std::vector<double> apply(std::span<const double> x) const;
  Matrix apply(const Matrix& m) const;
  std::vector<double> invert(std::span<const double> z) const;

  friend bool operator==(const Standardizer&, const Standardizer&) = default;

 private:
  std::vector<double> mean_;
  std::vector<double> scale_;
};

inline constexpr double kMinScale = 1e-12;

/// Throws DataError on an empty matrix.
Standardizer fit_standardizer(const Matrix& train);

}  // namespace irmap::features

namespace irmap::features {

/// Raw (unstandardized) features for every pixel of a frame, row index =
/// y * width + x. `usable` is 0 for invalid or degenerate pixels.
struct FeatureMap {
  int width = 0;
  int height = 0;
  Matrix values;
  std::vector<std::uint8_t> usable;

  std::size_t size() const { return usable.size(); }
};

}  // namespace irmap::features
