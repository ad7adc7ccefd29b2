#include "irmap/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "irmap/parallel.hpp"
#include "irmap/random.hpp"

namespace irmap::phantom {
namespace {

RecoveryRange range(double base_lo, double base_hi, double depth_lo, double depth_hi, double tau_lo,
                    double tau_hi) {
  return {{base_lo, base_hi}, {depth_lo, depth_hi}, {tau_lo, tau_hi}};
}

void check_range(const RecoveryRange& r, std::string_view what) {
  const std::string name(what);
  for (const Range* part : {&r.base_temp, &r.depth, &r.tau})
    if (!std::isfinite(part->lo) || !std::isfinite(part->hi) || part->lo > part->hi)
      throw DataError("recovery range for " + name + " is empty or non-finite");
  if (r.tau.lo <= 0.0) throw DataError("recovery tau for " + name + " must be positive");
  if (r.depth.lo < 0.0) throw DataError("recovery depth for " + name + " must be non-negative");
}

RecoveryParams draw(const RecoveryRange& r, Rng& rng) {
  // Always three draws so the stream layout does not depend on range widths.
  const double u0 = uniform(rng, 0.0, 1.0);
  const double u1 = uniform(rng, 0.0, 1.0);
  const double u2 = uniform(rng, 0.0, 1.0);
  return {r.base_temp.lo + u0 * r.base_temp.span(), r.depth.lo + u1 * r.depth.span(), r.tau.lo + u2 * r.tau.span()};
}

ZoneLabel tumor_of(ZoneLabel z) { return make_tissue(is_cortex(z), true); }

bool inside_frame(double x, double y, int w, int h) { return x >= 0.0 && y >= 0.0 && x < w && y < h; }

float bilinear_clamped(std::span<const float> img, int w, int h, double x, double y) {
  x = std::clamp(x, 0.0, static_cast<double>(w - 1));
  y = std::clamp(y, 0.0, static_cast<double>(h - 1));
  const int x0 = std::min(static_cast<int>(x), w - 1);
  const int y0 = std::min(static_cast<int>(y), h - 1);
  const int x1 = std::min(x0 + 1, w - 1);
  const int y1 = std::min(y0 + 1, h - 1);
  const double fx = x - x0;
  const double fy = y - y0;
  auto at = [&](int xx, int yy) { return static_cast<double>(img[static_cast<std::size_t>(yy) * w + xx]); };
  const double top = at(x0, y0) * (1 - fx) + at(x1, y0) * fx;
  const double bottom = at(x0, y1) * (1 - fx) + at(x1, y1) * fx;
  return static_cast<float>(top * (1 - fy) + bottom * fy);
}

}  // namespace

double recovery_curve(const RecoveryParams& p, double t) {
  if (!std::isfinite(p.base_temp) || !std::isfinite(p.depth) || !std::isfinite(p.tau) || !std::isfinite(t))
    throw DataError("recovery_curve: non-finite parameter");
  if (p.tau <= 0.0) throw DataError("recovery_curve: tau must be positive");
  if (t < 0.0) throw DataError("recovery_curve: t must be non-negative");
  return p.base_temp - p.depth * std::exp(-t / p.tau);
}

ZoneRecovery default_recovery() {
  ZoneRecovery r;
  r[index_of(ZoneLabel::NWA)] = range(28.5, 30.0, 0.0, 0.3, 80.0, 200.0);
  r[index_of(ZoneLabel::NA_DM)] = range(35.6, 36.2, 6.0, 8.0, 14.0, 22.0);
  r[index_of(ZoneLabel::HA_DM)] = range(35.2, 35.8, 8.0, 10.0, 34.0, 48.0);
  r[index_of(ZoneLabel::NA_BC)] = range(36.2, 36.8, 9.0, 11.0, 12.0, 20.0);
  r[index_of(ZoneLabel::HA_BC)] = range(35.8, 36.4, 11.0, 13.0, 30.0, 45.0);
  return r;
}

ZoneRecovery reduced_contrast_recovery() {
  ZoneRecovery r;
  r[index_of(ZoneLabel::NWA)] = range(28.5, 30.0, 0.0, 0.3, 80.0, 200.0);
  r[index_of(ZoneLabel::NA_DM)] = range(35.4, 36.1, 6.5, 8.5, 16.0, 30.0);
  r[index_of(ZoneLabel::HA_DM)] = range(35.3, 36.0, 7.0, 9.0, 24.0, 38.0);
  r[index_of(ZoneLabel::NA_BC)] = range(36.0, 36.7, 9.0, 11.0, 14.0, 28.0);
  r[index_of(ZoneLabel::HA_BC)] = range(35.9, 36.6, 9.5, 11.5, 22.0, 36.0);
  return r;
}

bool Ellipse::contains(double x, double y) const {
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  const double u = (x - cx) * c + (y - cy) * s;
  const double v = -(x - cx) * s + (y - cy) * c;
  return (u * u) / (semi_x * semi_x) + (v * v) / (semi_y * semi_y) <= 1.0;
}

bool BandSpec::contains(double x, double y) const {
  const double vx = x1 - x0;
  const double vy = y1 - y0;
  const double len2 = vx * vx + vy * vy;
  double t = len2 > 0.0 ? ((x - x0) * vx + (y - y0) * vy) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  const double dx = x - (x0 + t * vx);
  const double dy = y - (y0 + t * vy);
  return dx * dx + dy * dy <= 0.25 * width * width;
}

void PhantomConfig::validate() const {
  if (width < 16 || height < 16) throw DataError("phantom frame must be at least 16x16");
  if (n_frames < 3) throw DataError("phantom needs at least 3 frames");
  if (!(frame_period > 0.0) || !std::isfinite(frame_period)) throw DataError("frame_period must be positive");
  if (!(pixel_size > 0.0) || !std::isfinite(pixel_size)) throw DataError("pixel_size must be positive");
  if (!(coolant_temp < baseline_temp)) throw DataError("coolant_temp must be below baseline_temp");
  if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) throw DataError("noise_sigma must be >= 0");
  if (nwa_margin < 0 || 2 * nwa_margin >= std::min(width, height))
    throw DataError("nwa_margin leaves no working area");
  for (ZoneLabel z : kAllZones) {
    const auto& r = recovery[index_of(z)];
    check_range(r, to_string(z));
    if (is_working(z) && r.base_temp.lo - r.depth.hi < coolant_temp)
      throw DataError("recovery range for " + std::string(to_string(z)) + " starts below the coolant temperature");
  }
  auto check_ellipse = [&](const Ellipse& e, const std::string& what) {
    if (!(e.semi_x > 0.0) || !(e.semi_y > 0.0)) throw DataError(what + " has non-positive axes");
    if (!inside_frame(e.cx, e.cy, width, height)) throw DataError(what + " lies outside the frame");
  };
  if (cortex_window) check_ellipse(*cortex_window, "cortex window");
  for (std::size_t i = 0; i < tumors.size(); ++i) {
    check_ellipse(tumors[i].shape, "tumor " + std::to_string(i));
    if (tumors[i].recovery) check_range(*tumors[i].recovery, "tumor");
  }
  auto check_band = [&](const BandSpec& b, const std::string& what) {
    if (!(b.width > 0.0)) throw DataError(what + " has non-positive width");
    if (!inside_frame(b.x0, b.y0, width, height) && !inside_frame(b.x1, b.y1, width, height))
      throw DataError(what + " lies outside the frame");
    if (b.recovery) check_range(*b.recovery, what);
  };
  for (std::size_t i = 0; i < vessels.size(); ++i) check_band(vessels[i], "vessel " + std::to_string(i));
  if (sinus) check_band(*sinus, "sinus");
  if (!shift_schedule.empty() && static_cast<int>(shift_schedule.size()) != n_frames)
    throw DataError("shift_schedule must be empty or have one entry per frame");
  for (const Shift& s : shift_schedule)
    if (!std::isfinite(s.dx) || !std::isfinite(s.dy)) throw DataError("non-finite shift");
  for (const Occluder& o : damaged_frames) {
    if (o.frame < 0 || o.frame >= n_frames) throw DataError("occluder frame index out of range");
    const int x0 = std::max(o.x, 0), y0 = std::max(o.y, 0);
    const int x1 = std::min(o.x + o.width, width), y1 = std::min(o.y + o.height, height);
    if (x1 <= x0 || y1 <= y0) throw DataError("occluder lies outside the frame");
  }
}

ZoneMask phantom_geometry(const PhantomConfig& config) {
  config.validate();
  ZoneMask mask{Grid<ZoneLabel>(config.width, config.height, ZoneLabel::NWA), config.pixel_size};
  const int m = config.nwa_margin;
  for (int y = m; y < config.height - m; ++y) {
    for (int x = m; x < config.width - m; ++x) {
      bool cortex = config.mode == Mode::Off;
      if (config.mode == Mode::In && config.cortex_window) cortex = config.cortex_window->contains(x, y);
      bool tumor = false;
      for (const auto& t : config.tumors) tumor = tumor || t.shape.contains(x, y);
      mask.labels(x, y) = make_tissue(cortex, tumor);
    }
  }
  return mask;
}

Phantom generate_phantom(const PhantomConfig& config, std::uint64_t seed) {
  Phantom out;
  out.mask = phantom_geometry(config);
  const int w = config.width;
  const int h = config.height;
  const std::size_t n_pixels = static_cast<std::size_t>(w) * h;

  // Per-pixel dynamics, drawn in raster order from a dedicated stream.
  std::vector<RecoveryParams> params(n_pixels);
  Rng param_rng(derive_seed(seed, 1));
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const ZoneLabel z = out.mask.labels(x, y);
      const RecoveryRange* r = &config.recovery[index_of(z)];
      if (is_tumor(z)) {
        for (const auto& t : config.tumors)
          if (t.recovery && t.shape.contains(x, y)) {
            r = &*t.recovery;
            break;
          }
      } else if (is_intact(z)) {
        const BandSpec* band = nullptr;
        for (const auto& v : config.vessels)
          if (v.contains(x, y)) band = &v;
        if (!band && config.sinus && config.sinus->contains(x, y)) band = &*config.sinus;
        if (band) {
          r = band->recovery ? &*band->recovery : &config.recovery[index_of(tumor_of(z))];
          ++out.report.structure_pixels;
        }
      }
      params[out.mask.labels.index(x, y)] = draw(*r, param_rng);
    }
  }

  std::vector<double> timestamps(static_cast<std::size_t>(config.n_frames));
  for (int k = 0; k < config.n_frames; ++k) timestamps[static_cast<std::size_t>(k)] = k * config.frame_period;
  out.sequence = ThermalSequence(w, h, std::move(timestamps), config.pixel_size);
  out.sequence.meta.mode = config.mode;

  parallel_for(static_cast<std::size_t>(config.n_frames), [&](std::size_t k) {
    const double t = out.sequence.timestamp(static_cast<int>(k));
    std::vector<float> scene(n_pixels);
    for (std::size_t i = 0; i < n_pixels; ++i) {
      const auto& p = params[i];
      scene[i] = static_cast<float>(p.base_temp - p.depth * std::exp(-t / p.tau));
    }
    auto frame = out.sequence.frame(static_cast<int>(k));
    const Shift s = config.shift_schedule.empty() ? Shift{} : config.shift_schedule[k];
    if (s.dx == 0.0 && s.dy == 0.0) {
      std::copy(scene.begin(), scene.end(), frame.begin());
    } else {
      // Content moves by (dx, dy): frame(x, y) = scene(x - dx, y - dy).
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
          frame[static_cast<std::size_t>(y) * w + x] = bilinear_clamped(scene, w, h, x - s.dx, y - s.dy);
    }
    for (const Occluder& o : config.damaged_frames) {
      if (o.frame != static_cast<int>(k)) continue;
      for (int y = std::max(o.y, 0); y < std::min(o.y + o.height, h); ++y)
        for (int x = std::max(o.x, 0); x < std::min(o.x + o.width, w); ++x)
          frame[static_cast<std::size_t>(y) * w + x] = static_cast<float>(o.temperature);
    }
  }, 1);

  if (config.noise_sigma > 0.0) {
    Rng noise_rng(derive_seed(seed, 2));
    std::normal_distribution<double> noise(0.0, config.noise_sigma);
    for (int k = 0; k < config.n_frames; ++k)
      for (float& v : out.sequence.frame(k)) v = static_cast<float>(v + noise(noise_rng));
  }

  out.report.zone_counts = count_zones(out.mask.labels);
  for (const Occluder& o : config.damaged_frames) out.report.damaged_frames.push_back(o.frame);
  std::sort(out.report.damaged_frames.begin(), out.report.damaged_frames.end());
  out.report.damaged_frames.erase(std::unique(out.report.damaged_frames.begin(), out.report.damaged_frames.end()),
                                  out.report.damaged_frames.end());
  for (const Shift& s : config.shift_schedule)
    out.report.max_shift = std::max({out.report.max_shift, std::abs(s.dx), std::abs(s.dy)});
  return out;
}

PhantomConfig ConfigSampler::sample(Mode mode, std::uint64_t seed) const {
  PhantomConfig c = base;
  c.mode = mode;
  c.tumors.clear();
  c.vessels.clear();
  c.sinus.reset();
  c.shift_schedule.clear();
  c.damaged_frames.clear();
  c.cortex_window.reset();

  Rng rng(seed);
  const int min_dim = std::min(c.width, c.height);
  c.nwa_margin = std::max(2, static_cast<int>(std::lround(uniform(rng, 0.05, 0.10) * min_dim)));
  const double x_lo = c.nwa_margin, x_hi = c.width - c.nwa_margin;
  const double y_lo = c.nwa_margin, y_hi = c.height - c.nwa_margin;
  const double wa_w = x_hi - x_lo, wa_h = y_hi - y_lo;

  if (mode == Mode::In) {
    c.cortex_window = Ellipse{x_lo + wa_w * uniform(rng, 0.4, 0.6), y_lo + wa_h * uniform(rng, 0.4, 0.6),
                              wa_w * uniform(rng, 0.25, 0.35), wa_h * uniform(rng, 0.25, 0.35), 0.0};
  }

  const int n_tumors = 1 + static_cast<int>(std::uniform_int_distribution<int>(0, std::max(0, max_tumors - 1))(rng));
  for (int i = 0; i < n_tumors; ++i) {
    Ellipse e;
    e.cx = x_lo + wa_w * uniform(rng, 0.15, 0.85);
    e.cy = y_lo + wa_h * uniform(rng, 0.15, 0.85);
    e.semi_x = min_dim * uniform(rng, 0.08, 0.18);
    e.semi_y = min_dim * uniform(rng, 0.08, 0.18);
    e.angle = uniform(rng, 0.0, std::numbers::pi);
    c.tumors.push_back({e, std::nullopt});
  }

  if (uniform(rng, 0.0, 1.0) < vessel_probability) {
    BandSpec v;
    v.x0 = x_lo + wa_w * uniform(rng, 0.0, 1.0);
    v.y0 = y_lo + wa_h * uniform(rng, 0.0, 1.0);
    v.x1 = x_lo + wa_w * uniform(rng, 0.0, 1.0);
    v.y1 = y_lo + wa_h * uniform(rng, 0.0, 1.0);
    v.width = 2.0;
    c.vessels.push_back(v);
  }
  if (uniform(rng, 0.0, 1.0) < sinus_probability) {
    BandSpec s;
    s.x0 = x_lo;
    s.x1 = x_hi - 1;
    s.y0 = s.y1 = y_lo + wa_h * uniform(rng, 0.2, 0.8);
    s.width = std::max(3.0, 0.04 * c.height);
    c.sinus = s;
  }

  if (max_drift > 0.0) {
    c.shift_schedule.assign(static_cast<std::size_t>(c.n_frames), Shift{});
    std::normal_distribution<double> step(0.0, 0.15);
    Shift cur;
    for (int k = 1; k < c.n_frames; ++k) {
      cur.dx = std::clamp(cur.dx + step(rng), -max_drift, max_drift);
      cur.dy = std::clamp(cur.dy + step(rng), -max_drift, max_drift);
      c.shift_schedule[static_cast<std::size_t>(k)] = cur;
    }
  }

  if (uniform(rng, 0.0, 1.0) < damaged_probability) {
    Occluder o;
    o.frame = std::uniform_int_distribution<int>(std::max(1, c.n_frames / 4), std::max(1, 3 * c.n_frames / 4))(rng);
    o.width = c.width / 2;
    o.height = (c.height * 9 + 19) / 20;
    o.x = std::uniform_int_distribution<int>(0, c.width - o.width)(rng);
    o.y = std::uniform_int_distribution<int>(0, c.height - o.height)(rng);
    c.damaged_frames.push_back(o);
  }
  return c;
}

}  // namespace irmap::phantom
