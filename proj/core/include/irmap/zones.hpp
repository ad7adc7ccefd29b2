#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string_view>

#include "irmap/grid.hpp"

namespace irmap {

/// Leaf area classes. Every pixel carries exactly one; the coarser areas
/// (WA, NA, HA, BC, DM) are unions of leaves.
enum class ZoneLabel : std::uint8_t { NWA = 0, NA_DM = 1, HA_DM = 2, NA_BC = 3, HA_BC = 4 };

inline constexpr std::size_t kZoneCount = 5;
inline constexpr std::array<ZoneLabel, kZoneCount> kAllZones = {
    ZoneLabel::NWA, ZoneLabel::NA_DM, ZoneLabel::HA_DM, ZoneLabel::NA_BC, ZoneLabel::HA_BC};

constexpr std::size_t index_of(ZoneLabel z) { return static_cast<std::size_t>(z); }

constexpr bool is_working(ZoneLabel z) { return z != ZoneLabel::NWA; }
constexpr bool is_tumor(ZoneLabel z) { return z == ZoneLabel::HA_DM || z == ZoneLabel::HA_BC; }
constexpr bool is_intact(ZoneLabel z) { return z == ZoneLabel::NA_DM || z == ZoneLabel::NA_BC; }
constexpr bool is_cortex(ZoneLabel z) { return z == ZoneLabel::NA_BC || z == ZoneLabel::HA_BC; }
constexpr bool is_dura(ZoneLabel z) { return z == ZoneLabel::NA_DM || z == ZoneLabel::HA_DM; }

constexpr ZoneLabel make_tissue(bool cortex, bool tumor) {
  if (cortex) return tumor ? ZoneLabel::HA_BC : ZoneLabel::NA_BC;
  return tumor ? ZoneLabel::HA_DM : ZoneLabel::NA_DM;
}

/// Operation mode: which tissue layers may appear in the frame.
///   On  - dura only       {NWA, NA_DM, HA_DM}
///   In  - dura and cortex  (all five leaves)
///   Off - cortex only      {NWA, NA_BC, HA_BC}
enum class Mode : std::uint8_t { On = 0, In = 1, Off = 2 };

inline constexpr std::array<Mode, 3> kAllModes = {Mode::On, Mode::In, Mode::Off};

constexpr bool is_legal(Mode mode, ZoneLabel z) {
  switch (mode) {
    case Mode::On: return !is_cortex(z);
    case Mode::Off: return !is_dura(z);
    case Mode::In: return true;
  }
  return false;
}

std::string_view to_string(ZoneLabel z);
std::string_view to_string(Mode m);
std::optional<ZoneLabel> parse_zone(std::string_view s);
std::optional<Mode> parse_mode(std::string_view s);

/// Per-pixel leaf labels plus the physical pixel pitch in meters.
struct ZoneMask {
  Grid<ZoneLabel> labels;
  double pixel_size = 0.0;

  int width() const { return labels.width(); }
  int height() const { return labels.height(); }
  friend bool operator==(const ZoneMask&, const ZoneMask&) = default;
};

using ZoneCounts = std::array<std::uint64_t, kZoneCount>;

ZoneCounts count_zones(const Grid<ZoneLabel>& labels);

/// Throws DataError naming the first pixel whose label is illegal for `mode`.
void check_legal(const Grid<ZoneLabel>& labels, Mode mode);

/// Probability over the five leaves, indexed by index_of(ZoneLabel).
using LeafProbs = std::array<double, kZoneCount>;
using ProbabilityMap = Grid<LeafProbs>;

/// P(HA | tissue): tumor mass renormalized over the working area. Zero when
/// the pixel carries no tissue mass.
double tumor_given_tissue(const LeafProbs& p);

/// Most probable leaf; ties resolve to the lower label code.
ZoneLabel argmax(const LeafProbs& p);

}  // namespace irmap
