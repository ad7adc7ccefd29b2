#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <unistd.h>

#include "irmap/sequence.hpp"
#include "irmap/zones.hpp"

namespace irmap::testutil {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "irmap") {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            (tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline ThermalSequence random_sequence(int w, int h, int n, std::uint64_t seed) {
  std::vector<double> ts;
  for (int t = 0; t < n; ++t) ts.push_back(0.5 * t);
  ThermalSequence s(w, h, ts, 250e-6);
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> d(30.0f, 3.0f);
  for (int t = 0; t < n; ++t)
    for (float& v : s.frame(t)) v = d(rng);
  return s;
}

inline Grid<ZoneLabel> random_labels(int w, int h, Mode mode, std::mt19937_64& rng) {
  std::vector<ZoneLabel> legal;
  for (ZoneLabel z : kAllZones)
    if (is_legal(mode, z)) legal.push_back(z);
  Grid<ZoneLabel> g(w, h);
  std::uniform_int_distribution<std::size_t> pick(0, legal.size() - 1);
  for (auto& v : g.values()) v = legal[pick(rng)];
  return g;
}

}  // namespace irmap::testutil
