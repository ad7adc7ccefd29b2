#include "irmap/sequence.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <string>

namespace irmap {

ThermalSequence::ThermalSequence(int width, int height, std::vector<double> timestamps, double pixel_size)
    : width_(width), height_(height), pixel_size_(pixel_size), timestamps_(std::move(timestamps)) {
  if (width <= 0 || height <= 0) throw DataError("sequence dimensions must be positive");
  data_.assign(frame_size() * timestamps_.size(), 0.0f);
}

std::span<float> ThermalSequence::frame(int t) {
  return std::span<float>(data_).subspan(static_cast<std::size_t>(t) * frame_size(), frame_size());
}

std::span<const float> ThermalSequence::frame(int t) const {
  return std::span<const float>(data_).subspan(static_cast<std::size_t>(t) * frame_size(), frame_size());
}

void ThermalSequence::pixel_series(std::size_t pixel, std::span<double> out) const {
  const std::size_t stride = frame_size();
  for (std::size_t t = 0; t < timestamps_.size(); ++t) out[t] = data_[t * stride + pixel];
}

ThermalSequence ThermalSequence::select_frames(std::span<const int> frames) const {
  std::vector<double> ts;
  ts.reserve(frames.size());
  for (int f : frames) ts.push_back(timestamp(f));
  ThermalSequence out(width_, height_, std::move(ts), pixel_size_);
  out.meta = meta;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    auto src = frame(frames[i]);
    std::copy(src.begin(), src.end(), out.frame(static_cast<int>(i)).begin());
  }
  return out;
}

void ThermalSequence::validate() const {
  if (width_ <= 0 || height_ <= 0) throw DataError("sequence has empty frames");
  if (data_.size() != frame_size() * timestamps_.size()) throw DataError("sequence payload size mismatch");
  for (std::size_t i = 0; i < timestamps_.size(); ++i) {
    if (!std::isfinite(timestamps_[i])) throw DataError("non-finite timestamp at frame " + std::to_string(i));
    if (i > 0 && !(timestamps_[i] > timestamps_[i - 1]))
      throw DataError("timestamps not strictly increasing at frame " + std::to_string(i));
  }
  for (std::size_t i = 0; i < data_.size(); ++i)
    if (!std::isfinite(data_[i]))
      throw DataError("non-finite temperature at frame " + std::to_string(i / frame_size()));
}

bool operator==(const ThermalSequence& a, const ThermalSequence& b) {
  if (a.width_ != b.width_ || a.height_ != b.height_ || a.timestamps_.size() != b.timestamps_.size()) return false;
  if (std::bit_cast<std::uint64_t>(a.pixel_size_) != std::bit_cast<std::uint64_t>(b.pixel_size_)) return false;
  for (std::size_t i = 0; i < a.timestamps_.size(); ++i)
    if (std::bit_cast<std::uint64_t>(a.timestamps_[i]) != std::bit_cast<std::uint64_t>(b.timestamps_[i])) return false;
  for (std::size_t i = 0; i < a.data_.size(); ++i)
    if (std::bit_cast<std::uint32_t>(a.data_[i]) != std::bit_cast<std::uint32_t>(b.data_[i])) return false;
  return true;
}

}  // namespace irmap
