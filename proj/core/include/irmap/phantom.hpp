#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "irmap/sequence.hpp"
#include "irmap/zones.hpp"

namespace irmap::phantom {

/// Newtonian recovery after coolant removal: T(t) = base - depth * exp(-t / tau).
struct RecoveryParams {
  double base_temp = 36.0;  // asymptotic temperature, C
  double depth = 10.0;      // initial cooling depth, C
  double tau = 30.0;        // time constant, s
};

/// Evaluates the recovery model. Throws DataError on non-finite parameters,
/// tau <= 0 or t < 0.
double recovery_curve(const RecoveryParams& params, double t);

struct Range {
  double lo = 0.0;
  double hi = 0.0;
  double span() const { return hi - lo; }
};

/// Per-pixel parameters are drawn uniformly from these ranges.
struct RecoveryRange {
  Range base_temp;
  Range depth;
  Range tau;
};

/// Recovery ranges per leaf zone, indexed by index_of(ZoneLabel).
using ZoneRecovery = std::array<RecoveryRange, kZoneCount>;

/// Defaults: intact tissue recovers fast (tau 12-22 s), tumor slowly (tau
/// 30-48 s) and from deeper cooling. NWA (skull, drapes) sits near 29 C and
/// barely responds.
ZoneRecovery default_recovery();

/// Overlapping tau and depth ranges between NA and HA.
ZoneRecovery reduced_contrast_recovery();

struct Ellipse {
  double cx = 0.0;
  double cy = 0.0;
  double semi_x = 1.0;
  double semi_y = 1.0;
  double angle = 0.0;  // radians

  bool contains(double x, double y) const;
};

struct TumorSpec {
  Ellipse shape;
  std::optional<RecoveryRange> recovery;  // HA range of the layer when empty
};

/// Straight band between two points; used for vessels and the sinus.
struct BandSpec {
  double x0 = 0.0, y0 = 0.0, x1 = 0.0, y1 = 0.0;
  double width = 2.0;
  std::optional<RecoveryRange> recovery;  // HA-like dynamics when empty

  bool contains(double x, double y) const;
};

struct Shift {
  double dx = 0.0;
  double dy = 0.0;
};

/// Rectangular foreign object covering part of one frame.
struct Occluder {
  int frame = 0;
  int x = 0, y = 0, width = 0, height = 0;
  double temperature = 25.0;
};

struct PhantomConfig {
  int width = 320;
  int height = 240;
  double frame_period = 1.0;  // s
  int n_frames = 60;
  double pixel_size = 250e-6;  // m
  double coolant_temp = 21.0;
  double coolant_duration = 30.0;  // s
  double baseline_temp = 36.5;
  double noise_sigma = 0.03;
  Mode mode = Mode::On;
  int nwa_margin = 16;  // border band marked NWA, pixels
  std::optional<Ellipse> cortex_window;  // exposed cortex in In mode
  std::vector<TumorSpec> tumors;
  std::vector<BandSpec> vessels;
  std::optional<BandSpec> sinus;
  std::vector<Shift> shift_schedule;  // empty or one per frame
  std::vector<Occluder> damaged_frames;
  ZoneRecovery recovery = default_recovery();

  /// Throws DataError describing the first violated constraint.
  void validate() const;
};

struct PhantomReport {
  ZoneCounts zone_counts{};
  std::size_t structure_pixels = 0;  // NA-labeled vessel/sinus pixels with HA-like dynamics
  std::vector<int> damaged_frames;
  double max_shift = 0.0;
};

struct Phantom {
  ThermalSequence sequence;
  ZoneMask mask;
  PhantomReport report;
};

/// Renders the recovery phase for the configured geometry. Deterministic for
/// a fixed (config, seed).
Phantom generate_phantom(const PhantomConfig& config, std::uint64_t seed);

/// Ground-truth geometry alone (no sampling); what generate_phantom labels.
ZoneMask phantom_geometry(const PhantomConfig& config);

/// Randomizes geometry, drift and damage for dataset generation.
struct ConfigSampler {
  PhantomConfig base;
  int max_tumors = 2;
  double vessel_probability = 0.5;
  double sinus_probability = 0.0;
  double max_drift = 1.0;  // px, random walk bound
  double damaged_probability = 0.3;

  PhantomConfig sample(Mode mode, std::uint64_t seed) const;
};

}  // namespace irmap::phantom
