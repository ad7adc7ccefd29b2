#pragma once

#include <span>
#include <string>
#include <vector>

#include "irmap/grid.hpp"
#include "irmap/sequence.hpp"

namespace irmap::preprocess {

/// Translation of a target frame relative to the reference: content at
/// reference (x, y) appears in the target at (x + dx, y + dy).
struct ShiftEstimate {
  double dx = 0.0;
  double dy = 0.0;
  double peak_score = 0.0;  // normalized cross-correlation at the integer peak, clamped to [0, 1]
  bool fatal = false;       // peak on the search boundary
};

/// Integer-lag NCC search over [-max_shift, max_shift]^2 on the central
/// window, refined per axis by a 3-point parabola. An exact correlation
/// peak (score 1) is returned unrefined.
ShiftEstimate estimate_shift(FrameView reference, FrameView target, int max_shift);

/// Bilinear resample of `frame` at (x + dx, y + dy). Samples falling outside
/// the frame take the clamped edge value and clear `valid`.
void resample_shifted(FrameView frame, double dx, double dy, std::span<float> out, std::span<std::uint8_t> valid);

enum class DeletionReason { FatalShift, ForeignObject };

std::string_view to_string(DeletionReason r);

struct DeletedFrame {
  int index = 0;
  DeletionReason reason = DeletionReason::FatalShift;
  friend bool operator==(const DeletedFrame&, const DeletedFrame&) = default;
};

struct PreprocessReport {
  int n_frames = 0;
  std::vector<ShiftEstimate> shifts;  // one per input frame; frame 0 is the reference
  std::vector<int> kept;              // input indices, ascending
  std::vector<DeletedFrame> deleted;  // ascending by index
  Grid<std::uint8_t> valid;           // 1 where every kept frame sampled inside the frame

  std::size_t valid_pixels() const;
  /// Line-oriented text form used by `irmap preprocess --report`.
  std::string to_text() const;
};

struct RegistrationOptions {
  int max_shift = 5;      // px
  double snap_px = 0.05;  // per-axis shifts at or below this are not resampled
  int max_refinements = 6;  // re-estimation rounds on the resampled frame
};

struct Preprocessed {
  ThermalSequence sequence;
  PreprocessReport report;
};

/// Aligns every non-fatal frame onto frame 0's grid, refining each shift by
/// re-estimating on the resampled frame. Fatal frames are left
/// untouched and flagged for removal. Throws DataError when n_frames < 2 or
/// every non-reference frame is fatal.
Preprocessed register_sequence(const ThermalSequence& seq, const RegistrationOptions& options = {});

struct DamageOptions {
  double outlier_frac = 0.1;
  double outlier_temp_dev = 1.0;  // C
  int median_half_window = 2;     // frames on each side of the sliding temporal median
};

/// Deletes fatal-shift frames and frames where more than outlier_frac of the
/// valid pixels deviate from their sliding temporal median (over the
/// non-fatal frames, single pass) by more than outlier_temp_dev. Throws
/// DataError when fewer than 3 frames remain.
Preprocessed remove_damaged_frames(const ThermalSequence& seq, PreprocessReport report,
                                   const DamageOptions& options = {});

struct RecoveryFit {
  double base_temp = 0.0;
  double depth = 0.0;
  double tau = 0.0;
  double rmse = 0.0;
  int n_used = 0;
  bool degenerate = true;
};

struct FitOptions {
  double noise_floor = 0.03;  // C; series with range below 2x this are degenerate
  int max_iterations = 50;
  double step_tolerance = 1e-9;
  double tau_min = 0.1;
  double tau_max = 1e4;
};

/// Least-squares fit of T(t) = base - depth * exp(-t / tau) by Gauss-Newton
/// from a log-linear start. Non-finite samples are skipped. Never throws on
/// junk values; returns a degenerate fit instead. Throws DataError if the
/// spans differ in length or times are not strictly increasing.
RecoveryFit fit_recovery(std::span<const double> series, std::span<const double> times, const FitOptions& options = {});

}  // namespace irmap::preprocess
