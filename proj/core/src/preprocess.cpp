#include "irmap/preprocess.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <limits>

#include "irmap/parallel.hpp"

namespace irmap::preprocess {
namespace {

// Normalized cross-correlation between reference(x, y) and target(x + u, y + v)
// over the fixed window [margin, w - margin) x [margin, h - margin).
class NccSearch {
 public:
  NccSearch(FrameView ref, FrameView target, int margin) : ref_(ref), target_(target), margin_(margin) {
    double sum = 0.0;
    for (int y = margin; y < ref.height - margin; ++y)
      for (int x = margin; x < ref.width - margin; ++x) sum += ref(x, y);
    count_ = static_cast<double>(ref.width - 2 * margin) * (ref.height - 2 * margin);
    ref_mean_ = sum / count_;
    double var = 0.0;
    for (int y = margin; y < ref.height - margin; ++y)
      for (int x = margin; x < ref.width - margin; ++x) {
        const double d = ref(x, y) - ref_mean_;
        var += d * d;
      }
    ref_var_ = var;
  }

  double score(int u, int v) const {
    double sb = 0.0, sbb = 0.0, sab = 0.0;
    for (int y = margin_; y < ref_.height - margin_; ++y) {
      const float* a = ref_.values.data() + static_cast<std::size_t>(y) * ref_.width;
      const float* b = target_.values.data() + static_cast<std::size_t>(y + v) * target_.width + u;
      for (int x = margin_; x < ref_.width - margin_; ++x) {
        const double bv = b[x];
        sb += bv;
        sbb += bv * bv;
        sab += (a[x] - ref_mean_) * bv;
      }
    }
    const double var_b = sbb - sb * sb / count_;
    if (ref_var_ <= 0.0 || var_b <= 0.0) return 0.0;
    return sab / std::sqrt(ref_var_ * var_b);
  }

 private:
  FrameView ref_;
  FrameView target_;
  int margin_;
  double count_ = 0.0;
  double ref_mean_ = 0.0;
  double ref_var_ = 0.0;
};

double parabolic_offset(double minus, double center, double plus) {
  const double denom = minus - 2.0 * center + plus;
  if (!(denom < 0.0)) return 0.0;
  return std::clamp(0.5 * (minus - plus) / denom, -0.5, 0.5);
}

}  // namespace

ShiftEstimate estimate_shift(FrameView reference, FrameView target, int max_shift) {
  if (reference.width != target.width || reference.height != target.height)
    throw DataError("estimate_shift: frame dimensions differ");
  if (reference.width < 16 || reference.height < 16) throw DataError("estimate_shift: frames must be at least 16x16");
  if (max_shift < 0 || 2 * max_shift + 8 > std::min(reference.width, reference.height))
    throw DataError("estimate_shift: max_shift too large for the frame");

  const NccSearch ncc(reference, target, max_shift);
  const int span = 2 * max_shift + 1;
  std::vector<double> scores(static_cast<std::size_t>(span) * span);
  auto at = [&](int u, int v) -> double& {
    return scores[static_cast<std::size_t>(v + max_shift) * span + static_cast<std::size_t>(u + max_shift)];
  };
  int best_u = 0, best_v = 0;
  double best = -std::numeric_limits<double>::infinity();
  for (int v = -max_shift; v <= max_shift; ++v)
    for (int u = -max_shift; u <= max_shift; ++u) {
      const double s = ncc.score(u, v);
      at(u, v) = s;
      // Prefer the smaller lag on exact ties.
      if (s > best || (s == best && std::abs(u) + std::abs(v) < std::abs(best_u) + std::abs(best_v))) {
        best = s;
        best_u = u;
        best_v = v;
      }
    }

  ShiftEstimate est;
  est.peak_score = std::clamp(best, 0.0, 1.0);
  est.dx = best_u;
  est.dy = best_v;
  est.fatal = max_shift > 0 && (std::abs(best_u) == max_shift || std::abs(best_v) == max_shift);
  if (best >= 1.0 - 1e-9) return est;
  if (std::abs(best_u) < max_shift) est.dx += parabolic_offset(at(best_u - 1, best_v), best, at(best_u + 1, best_v));
  if (std::abs(best_v) < max_shift) est.dy += parabolic_offset(at(best_u, best_v - 1), best, at(best_u, best_v + 1));
  return est;
}

void resample_shifted(FrameView frame, double dx, double dy, std::span<float> out, std::span<std::uint8_t> valid) {
  const int w = frame.width, h = frame.height;
  constexpr double kEdge = 1e-9;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double sx = x + dx, sy = y + dy;
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      if (sx < -kEdge || sy < -kEdge || sx > w - 1 + kEdge || sy > h - 1 + kEdge) valid[i] = 0;
      sx = std::clamp(sx, 0.0, static_cast<double>(w - 1));
      sy = std::clamp(sy, 0.0, static_cast<double>(h - 1));
      const int x0 = std::min(static_cast<int>(sx), w - 1), y0 = std::min(static_cast<int>(sy), h - 1);
      const int x1 = std::min(x0 + 1, w - 1), y1 = std::min(y0 + 1, h - 1);
      const double fx = sx - x0, fy = sy - y0;
      const double top = frame(x0, y0) * (1 - fx) + frame(x1, y0) * fx;
      const double bottom = frame(x0, y1) * (1 - fx) + frame(x1, y1) * fx;
      out[i] = static_cast<float>(top * (1 - fy) + bottom * fy);
    }
  }
}

std::string_view to_string(DeletionReason r) {
  return r == DeletionReason::FatalShift ? "fatal-shift" : "foreign-object";
}

std::size_t PreprocessReport::valid_pixels() const {
  return static_cast<std::size_t>(std::count(valid.values().begin(), valid.values().end(), std::uint8_t{1}));
}

std::string PreprocessReport::to_text() const {
  std::string out = "# irmap-preprocess v1\n";
  char buf[160];
  std::snprintf(buf, sizeof buf, "frames %d kept %zu deleted %zu valid_pixels %zu\n", n_frames, kept.size(),
                deleted.size(), valid_pixels());
  out += buf;
  for (std::size_t i = 0; i < shifts.size(); ++i) {
    const auto& s = shifts[i];
    std::snprintf(buf, sizeof buf, "shift %zu dx=%.4f dy=%.4f score=%.6f fatal=%d\n", i, s.dx, s.dy, s.peak_score,
                  s.fatal ? 1 : 0);
    out += buf;
  }
  for (const auto& d : deleted) out += "deleted " + std::to_string(d.index) + " " + std::string(to_string(d.reason)) + "\n";
  return out;
}

Preprocessed register_sequence(const ThermalSequence& seq, const RegistrationOptions& options) {
  if (seq.n_frames() < 2) throw DataError("register_sequence: need at least 2 frames");
  const int n = seq.n_frames();
  Preprocessed out{seq, {}};
  auto& report = out.report;
  report.n_frames = n;
  report.shifts.assign(static_cast<std::size_t>(n), ShiftEstimate{0.0, 0.0, 1.0, false});
  report.valid = Grid<std::uint8_t>(seq.width(), seq.height(), 1);

  const FrameView ref = seq.frame_view(0);
  parallel_for(static_cast<std::size_t>(n - 1), [&](std::size_t k) {
    report.shifts[k + 1] = estimate_shift(ref, seq.frame_view(static_cast<int>(k + 1)), options.max_shift);
  }, 1);

  bool any_usable = false;
  for (int k = 1; k < n; ++k) any_usable = any_usable || !report.shifts[static_cast<std::size_t>(k)].fatal;
  if (!any_usable) throw DataError("register_sequence: every frame has a fatal shift (max_shift " +
                                   std::to_string(options.max_shift) + ")");

  // Each frame is resampled from the original by the accumulated shift and
  // re-estimated until the residual falls within snap_px, so registering the
  // output again finds nothing to correct.
  std::vector<Grid<std::uint8_t>> frame_valid(static_cast<std::size_t>(n));
  parallel_for(static_cast<std::size_t>(n - 1), [&](std::size_t k1) {
    const int k = static_cast<int>(k1 + 1);
    ShiftEstimate& s = report.shifts[k1 + 1];
    if (s.fatal) return;
    const double snap = options.snap_px;
    if (std::abs(s.dx) <= snap && std::abs(s.dy) <= snap) return;
    Grid<float> buffer(seq.width(), seq.height());
    std::vector<std::uint8_t> scratch(buffer.size());
    double dx = s.dx, dy = s.dy;
    for (int it = 0; it < options.max_refinements; ++it) {
      resample_shifted(seq.frame_view(k), dx, dy, buffer.values(), scratch);
      const ShiftEstimate r = estimate_shift(ref, view(buffer), options.max_shift);
      if (r.fatal || (std::abs(r.dx) <= snap && std::abs(r.dy) <= snap)) break;
      dx += r.dx;
      dy += r.dy;
    }
    s.dx = dx;
    s.dy = dy;
    frame_valid[k1 + 1] = Grid<std::uint8_t>(seq.width(), seq.height(), 1);
    resample_shifted(seq.frame_view(k), dx, dy, out.sequence.frame(k), frame_valid[k1 + 1].values());
  }, 1);
  for (const auto& fv : frame_valid) {
    if (fv.empty()) continue;
    for (std::size_t i = 0; i < fv.size(); ++i) report.valid[i] &= fv[i];
  }
  for (int k = 0; k < n; ++k) report.kept.push_back(k);
  return out;
}

Preprocessed remove_damaged_frames(const ThermalSequence& seq, PreprocessReport report, const DamageOptions& options) {
  const int n = seq.n_frames();
  if (static_cast<int>(report.shifts.size()) != n) throw DataError("remove_damaged_frames: report does not match sequence");
  if (report.valid.empty()) report.valid = Grid<std::uint8_t>(seq.width(), seq.height(), 1);
  if (options.median_half_window < 1) throw DataError("remove_damaged_frames: median window must be >= 1");

  std::vector<int> candidates;
  report.deleted.clear();
  for (int k = 0; k < n; ++k) {
    if (report.shifts[static_cast<std::size_t>(k)].fatal)
      report.deleted.push_back({k, DeletionReason::FatalShift});
    else
      candidates.push_back(k);
  }

  const std::size_t n_pixels = seq.frame_size();
  const std::size_t n_valid = report.valid_pixels();
  const int m = static_cast<int>(candidates.size());
  const int hw = options.median_half_window;
  std::vector<std::uint8_t> foreign(static_cast<std::size_t>(m), 0);
  parallel_for(static_cast<std::size_t>(m), [&](std::size_t j1) {
    const int j = static_cast<int>(j1);
    const int lo = std::max(0, j - hw);
    const int hi = std::min(m - 1, j + hw);
    std::array<float, 64> window{};
    const int len = std::min(hi - lo + 1, static_cast<int>(window.size()));
    auto frame = seq.frame(candidates[j1]);
    std::size_t outliers = 0;
    for (std::size_t i = 0; i < n_pixels; ++i) {
      if (!report.valid[i]) continue;
      for (int q = 0; q < len; ++q) window[static_cast<std::size_t>(q)] = seq.frame(candidates[static_cast<std::size_t>(lo + q)])[i];
      const auto mid = window.begin() + len / 2;
      std::nth_element(window.begin(), mid, window.begin() + len);
      double median = *mid;
      if (len % 2 == 0) median = 0.5 * (median + *std::max_element(window.begin(), mid));
      if (std::abs(frame[i] - median) > options.outlier_temp_dev) ++outliers;
    }
    if (n_valid > 0 && static_cast<double>(outliers) > options.outlier_frac * static_cast<double>(n_valid))
      foreign[j1] = 1;
  }, 1);

  report.kept.clear();
  for (int j = 0; j < m; ++j) {
    if (foreign[static_cast<std::size_t>(j)])
      report.deleted.push_back({candidates[static_cast<std::size_t>(j)], DeletionReason::ForeignObject});
    else
      report.kept.push_back(candidates[static_cast<std::size_t>(j)]);
  }
  std::sort(report.deleted.begin(), report.deleted.end(), [](const auto& a, const auto& b) { return a.index < b.index; });
  if (report.kept.size() < 3)
    throw DataError("remove_damaged_frames: only " + std::to_string(report.kept.size()) +
                    " frames remain; at least 3 are needed for fitting");
  Preprocessed out{seq.select_frames(report.kept), std::move(report)};
  return out;
}

namespace {

struct Samples {
  std::vector<double> t;
  std::vector<double> v;
};

double sse(const Samples& s, double base, double depth, double tau) {
  double acc = 0.0;
  for (std::size_t i = 0; i < s.t.size(); ++i) {
    const double r = s.v[i] - (base - depth * std::exp(-s.t[i] / tau));
    acc += r * r;
  }
  return acc;
}

// Solves the symmetric 3x3 system a * x = b; false when singular.
bool solve3(std::array<double, 9> a, std::array<double, 3> b, std::array<double, 3>& x) {
  for (int col = 0; col < 3; ++col) {
    int pivot = col;
    for (int r = col + 1; r < 3; ++r)
      if (std::abs(a[r * 3 + col]) > std::abs(a[pivot * 3 + col])) pivot = r;
    if (std::abs(a[pivot * 3 + col]) < 1e-300) return false;
    if (pivot != col) {
      for (int c = 0; c < 3; ++c) std::swap(a[col * 3 + c], a[pivot * 3 + c]);
      std::swap(b[col], b[pivot]);
    }
    for (int r = col + 1; r < 3; ++r) {
      const double f = a[r * 3 + col] / a[col * 3 + col];
      for (int c = col; c < 3; ++c) a[r * 3 + c] -= f * a[col * 3 + c];
      b[r] -= f * b[col];
    }
  }
  for (int r = 2; r >= 0; --r) {
    double acc = b[r];
    for (int c = r + 1; c < 3; ++c) acc -= a[r * 3 + c] * x[c];
    x[r] = acc / a[r * 3 + r];
  }
  return std::isfinite(x[0]) && std::isfinite(x[1]) && std::isfinite(x[2]);
}

}  // namespace

RecoveryFit fit_recovery(std::span<const double> series, std::span<const double> times, const FitOptions& options) {
  if (series.size() != times.size()) throw DataError("fit_recovery: series and times differ in length");
  Samples s;
  for (std::size_t i = 0; i < series.size(); ++i) {
    if (!std::isfinite(times[i])) throw DataError("fit_recovery: non-finite time");
    if (i > 0 && !(times[i] > times[i - 1])) throw DataError("fit_recovery: times must be strictly increasing");
    if (!std::isfinite(series[i])) continue;
    s.t.push_back(times[i]);
    s.v.push_back(series[i]);
  }
  RecoveryFit fit;
  fit.n_used = static_cast<int>(s.v.size());
  if (fit.n_used == 0) return fit;
  const auto [min_it, max_it] = std::minmax_element(s.v.begin(), s.v.end());
  const double lo = *min_it, hi = *max_it;
  double mean = 0.0;
  for (double v : s.v) mean += v;
  mean /= fit.n_used;

  auto constant_fit = [&] {
    fit.base_temp = mean;
    fit.depth = 0.0;
    fit.tau = 0.0;
    double acc = 0.0;
    for (double v : s.v) acc += (v - mean) * (v - mean);
    fit.rmse = std::sqrt(acc / fit.n_used);
    fit.degenerate = true;
    return fit;
  };
  if (fit.n_used < 3 || hi - lo < 2.0 * options.noise_floor) return constant_fit();

  // Log-linear start: log(base + eps - v) = log(depth) - t / tau.
  double base = hi;
  const double eps = 0.05 * (hi - lo);
  double st = 0, sy = 0, stt = 0, sty = 0;
  for (std::size_t i = 0; i < s.t.size(); ++i) {
    const double y = std::log(base + eps - s.v[i]);
    st += s.t[i];
    sy += y;
    stt += s.t[i] * s.t[i];
    sty += s.t[i] * y;
  }
  const double nn = static_cast<double>(s.t.size());
  const double denom = nn * stt - st * st;
  const double slope = denom != 0.0 ? (nn * sty - st * sy) / denom : 0.0;
  const double t_span = s.t.back() - s.t.front();
  double tau = slope < 0.0 ? -1.0 / slope : 0.5 * t_span;
  if (!std::isfinite(tau) || tau <= 0.0) tau = std::max(0.5 * t_span, options.tau_min);
  tau = std::clamp(tau, options.tau_min, options.tau_max);
  double depth = (base - s.v.front()) * std::exp(s.t.front() / tau);
  if (!std::isfinite(depth)) depth = base - s.v.front();

  double current = sse(s, base, depth, tau);
  for (int iter = 0; iter < options.max_iterations; ++iter) {
    std::array<double, 9> jtj{};
    std::array<double, 3> jtr{};
    for (std::size_t i = 0; i < s.t.size(); ++i) {
      const double e = std::exp(-s.t[i] / tau);
      const double r = s.v[i] - (base - depth * e);
      const std::array<double, 3> j = {1.0, -e, -depth * e * s.t[i] / (tau * tau)};
      for (int a = 0; a < 3; ++a) {
        jtr[a] += j[a] * r;
        for (int b = 0; b < 3; ++b) jtj[a * 3 + b] += j[a] * j[b];
      }
    }
    std::array<double, 3> step{};
    if (!solve3(jtj, jtr, step)) break;
    double scale = 1.0;
    bool improved = false;
    for (int halving = 0; halving < 30; ++halving, scale *= 0.5) {
      const double nb = base + scale * step[0], nd = depth + scale * step[1], nt = tau + scale * step[2];
      if (!(nt > 0.0)) continue;
      const double candidate = sse(s, nb, nd, nt);
      if (candidate <= current) {
        base = nb;
        depth = nd;
        tau = nt;
        current = candidate;
        improved = true;
        break;
      }
    }
    const double norm = scale * std::sqrt(step[0] * step[0] + step[1] * step[1] + step[2] * step[2]);
    if (!improved || norm < options.step_tolerance) break;
  }

  fit.base_temp = base;
  fit.depth = depth;
  fit.tau = tau;
  fit.rmse = std::sqrt(current / fit.n_used);
  fit.degenerate = !std::isfinite(base) || !std::isfinite(depth) || !std::isfinite(tau) || !std::isfinite(fit.rmse) ||
                   tau < options.tau_min || tau > options.tau_max;
  return fit;
}

}  // namespace irmap::preprocess
