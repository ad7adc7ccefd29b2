#pragma once

#include <cassert>
#include <cstddef>
#include <span>
#include <vector>

#include "irmap/error.hpp"

namespace irmap {

/// Dense row-major 2D array indexed (x, y).
template <typename T>
class Grid {
 public:
  Grid() = default;
  Grid(int width, int height, const T& fill = T{})
      : width_(width), height_(height) {
    if (width < 0 || height < 0) throw DataError("grid dimensions must be non-negative");
    values_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill);
  }

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }

  bool contains(int x, int y) const { return x >= 0 && y >= 0 && x < width_ && y < height_; }
  std::size_t index(int x, int y) const {
    assert(contains(x, y));
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x);
  }

  T& operator()(int x, int y) { return values_[index(x, y)]; }
  const T& operator()(int x, int y) const { return values_[index(x, y)]; }
  T& operator[](std::size_t i) { return values_[i]; }
  const T& operator[](std::size_t i) const { return values_[i]; }

  std::span<T> values() { return values_; }
  std::span<const T> values() const { return values_; }

  template <typename U>
  bool same_shape(const Grid<U>& other) const {
    return width_ == other.width() && height_ == other.height();
  }

  friend bool operator==(const Grid& a, const Grid& b) {
    return a.width_ == b.width_ && a.height_ == b.height_ && a.values_ == b.values_;
  }

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<T> values_;
};

/// Non-owning view of one single-precision frame.
struct FrameView {
  std::span<const float> values;
  int width = 0;
  int height = 0;

  float operator()(int x, int y) const {
    return values[static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x)];
  }
};

inline FrameView view(const Grid<float>& g) { return {g.values(), g.width(), g.height()}; }

}  // namespace irmap
