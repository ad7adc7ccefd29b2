#pragma once

#include <span>
#include <string>
#include <vector>

#include "irmap/grid.hpp"
#include "irmap/zones.hpp"

namespace irmap {

struct AcquisitionMeta {
  Mode mode = Mode::On;
  std::string source_id;
};

/// Temperature stack in degrees Celsius, stored [t][y][x] in single
/// precision (the on-disk sample type). Timestamps are seconds relative to
/// coolant removal.
class ThermalSequence {
 public:
  ThermalSequence() = default;
  ThermalSequence(int width, int height, std::vector<double> timestamps, double pixel_size);

  int width() const { return width_; }
  int height() const { return height_; }
  int n_frames() const { return static_cast<int>(timestamps_.size()); }
  std::size_t frame_size() const { return static_cast<std::size_t>(width_) * static_cast<std::size_t>(height_); }
  double pixel_size() const { return pixel_size_; }

  const std::vector<double>& timestamps() const { return timestamps_; }
  double timestamp(int t) const { return timestamps_[static_cast<std::size_t>(t)]; }

  std::span<float> frame(int t);
  std::span<const float> frame(int t) const;
  FrameView frame_view(int t) const { return {frame(t), width_, height_}; }

  float& at(int t, int x, int y) { return frame(t)[static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x)]; }
  float at(int t, int x, int y) const { return frame(t)[static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x)]; }

  std::span<const float> data() const { return data_; }

  /// Copies the temporal series of one pixel into `out` (size n_frames).
  void pixel_series(std::size_t pixel, std::span<double> out) const;

  /// New sequence holding only `frames`, in the given order.
  ThermalSequence select_frames(std::span<const int> frames) const;

  /// Throws DataError on non-increasing timestamps or non-finite samples.
  void validate() const;

  AcquisitionMeta meta;

  /// Data equality: dimensions, pixel size, timestamps and samples compared
  /// bitwise. Metadata is not part of the container and is not compared.
  friend bool operator==(const ThermalSequence& a, const ThermalSequence& b);

 private:
  int width_ = 0;
  int height_ = 0;
  double pixel_size_ = 0.0;
  std::vector<double> timestamps_;
  std::vector<float> data_;
};

}  // namespace irmap
