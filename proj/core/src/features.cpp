#include "irmap/features.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "irmap/error.hpp"

namespace irmap::features {

FeatureVector degenerate_features() {
  FeatureVector f{};
  f[kDegenerate] = 1.0;
  return f;
}

FeatureVector extract_features(const preprocess::RecoveryFit& fit, std::span<const double> series,
                               std::span<const double> times) {
  if (fit.degenerate) return degenerate_features();
  if (series.size() != times.size()) throw DataError("extract_features: series and times differ in length");

  std::vector<std::pair<double, double>> pts;
  pts.reserve(series.size());
  for (std::size_t i = 0; i < series.size(); ++i)
    if (std::isfinite(series[i]) && std::isfinite(times[i])) pts.emplace_back(times[i], series[i]);
  std::sort(pts.begin(), pts.end());
  if (pts.size() < 3) return degenerate_features();

  FeatureVector f{};
  f[kBaseTemp] = fit.base_temp;
  f[kDepth] = fit.depth;
  f[kTau] = fit.tau;
  f[kRmse] = fit.rmse;
  f[kStartTemp] = pts.front().second;

  {
    double mt = 0, mv = 0;
    for (int i = 0; i < 3; ++i) {
      mt += pts[i].first;
      mv += pts[i].second;
    }
    mt /= 3;
    mv /= 3;
    double num = 0, den = 0;
    for (int i = 0; i < 3; ++i) {
      num += (pts[i].first - mt) * (pts[i].second - mv);
      den += (pts[i].first - mt) * (pts[i].first - mt);
    }
    f[kInitialSlope] = den > 0 ? num / den : 0.0;
  }

  // First crossing of base - depth / e, interpolated between samples. The
  // comparison follows the sign of depth so cooling-type curves also work.
  {
    const double target = fit.base_temp - fit.depth * std::exp(-1.0);
    const double sign = fit.depth >= 0 ? 1.0 : -1.0;
    double t63 = pts.back().first;
    if (sign * (pts.front().second - target) >= 0) {
      t63 = pts.front().first;
    } else {
      for (std::size_t i = 1; i < pts.size(); ++i) {
        if (sign * (pts[i].second - target) >= 0) {
          const double v0 = pts[i - 1].second, v1 = pts[i].second;
          const double a = v1 != v0 ? (target - v0) / (v1 - v0) : 1.0;
          t63 = pts[i - 1].first + std::clamp(a, 0.0, 1.0) * (pts[i].first - pts[i - 1].first);
          break;
        }
      }
    }
    f[kT63] = t63;
  }

  {
    double lo = pts.front().second, hi = lo;
    for (const auto& p : pts) {
      lo = std::min(lo, p.second);
      hi = std::max(hi, p.second);
    }
    const double range = hi - lo;
    const double t0 = pts.front().first, t1 = pts.back().first;
    std::size_t seg = 0;
    for (std::size_t k = 0; k < kCurveSamples; ++k) {
      const double t = t0 + (t1 - t0) * static_cast<double>(k) / (kCurveSamples - 1);
      while (seg + 2 < pts.size() && pts[seg + 1].first < t) ++seg;
      const auto& a = pts[seg];
      const auto& b = pts[seg + 1];
      const double w = b.first > a.first ? std::clamp((t - a.first) / (b.first - a.first), 0.0, 1.0) : 0.0;
      const double v = a.second + w * (b.second - a.second);
      f[kCurve + k] = range > 0 ? (v - lo) / range : 0.0;
    }
  }
  f[kDegenerate] = 0.0;
  return f;
}

void Matrix::append_row(std::span<const double> r) {
  if (rows_ == 0 && cols_ == 0) cols_ = r.size();
  if (r.size() != cols_) throw DataError("matrix row length mismatch");
  values_.insert(values_.end(), r.begin(), r.end());
  ++rows_;
}

Standardizer::Standardizer(std::vector<double> mean, std::vector<double> scale)
    : mean_(std::move(mean)), scale_(std::move(scale)) {
  if (mean_.size() != scale_.size()) throw DataError("standardizer mean/scale length mismatch");
  for (double s : scale_)
    if (!(s > 0.0)) throw DataError("standardizer scale must be positive");
}

void Standardizer::apply(std::span<const double> x, std::span<double> out) const {
  if (x.size() != mean_.size() || out.size() != mean_.size())
    throw DataError("standardizer dimension mismatch: expected " + std::to_string(mean_.size()) + ", got " +
                    std::to_string(x.size()));
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = (x[i] - mean_[i]) / scale_[i];
}

std::vector<double> Standardizer::apply(std::span<const double> x) const {
  std::vector<double> out(x.size());
  apply(x, out);
  return out;
}

Matrix Standardizer::apply(const Matrix& m) const {
  Matrix out(m.rows(), m.cols());
  for (std::size_t r = 0; r < m.rows(); ++r) apply(m.row(r), out.row(r));
  return out;
}

std::vector<double> Standardizer::invert(std::span<const double> z) const {
  if (z.size() != mean_.size()) throw DataError("standardizer dimension mismatch");
  std::vector<double> out(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) out[i] = z[i] * scale_[i] + mean_[i];
  return out;
}

Standardizer fit_standardizer(const Matrix& train) {
  if (train.rows() == 0 || train.cols() == 0) throw DataError("fit_standardizer: empty training matrix");
  const std::size_t d = train.cols();
  std::vector<double> mean(d, 0.0), scale(d, kMinScale);
  for (std::size_t c = 0; c < d; ++c) {
    double lo = train(0, c), hi = lo, sum = 0.0;
    for (std::size_t r = 0; r < train.rows(); ++r) {
      lo = std::min(lo, train(r, c));
      hi = std::max(hi, train(r, c));
      sum += train(r, c);
    }
    if (lo == hi) {
      mean[c] = lo;
      continue;
    }
    mean[c] = sum / static_cast<double>(train.rows());
    double var = 0.0;
    for (std::size_t r = 0; r < train.rows(); ++r) var += (train(r, c) - mean[c]) * (train(r, c) - mean[c]);
    scale[c] = std::max(std::sqrt(var / static_cast<double>(train.rows())), kMinScale);
  }
  return Standardizer(std::move(mean), std::move(scale));
}

}  // namespace irmap::features
