#include "irmap/zones.hpp"

#include <string>

namespace irmap {

std::string_view to_string(ZoneLabel z) {
  switch (z) {
    case ZoneLabel::NWA: return "NWA";
    case ZoneLabel::NA_DM: return "NA_DM";
    case ZoneLabel::HA_DM: return "HA_DM";
    case ZoneLabel::NA_BC: return "NA_BC";
    case ZoneLabel::HA_BC: return "HA_BC";
  }
  return "?";
}

std::string_view to_string(Mode m) {
  switch (m) {
    case Mode::On: return "On";
    case Mode::In: return "In";
    case Mode::Off: return "Off";
  }
  return "?";
}

std::optional<ZoneLabel> parse_zone(std::string_view s) {
  for (ZoneLabel z : kAllZones)
    if (to_string(z) == s) return z;
  return std::nullopt;
}

std::optional<Mode> parse_mode(std::string_view s) {
  for (Mode m : kAllModes)
    if (to_string(m) == s) return m;
  return std::nullopt;
}

ZoneCounts count_zones(const Grid<ZoneLabel>& labels) {
  ZoneCounts counts{};
  for (ZoneLabel z : labels.values()) ++counts[index_of(z)];
  return counts;
}

void check_legal(const Grid<ZoneLabel>& labels, Mode mode) {
  for (int y = 0; y < labels.height(); ++y)
    for (int x = 0; x < labels.width(); ++x)
      if (!is_legal(mode, labels(x, y)))
        throw DataError("label " + std::string(to_string(labels(x, y))) + " at (" + std::to_string(x) +
                        ", " + std::to_string(y) + ") is illegal in mode " + std::string(to_string(mode)));
}

double tumor_given_tissue(const LeafProbs& p) {
  const double tumor = p[index_of(ZoneLabel::HA_DM)] + p[index_of(ZoneLabel::HA_BC)];
  const double intact = p[index_of(ZoneLabel::NA_DM)] + p[index_of(ZoneLabel::NA_BC)];
  const double tissue = tumor + intact;
  return tissue > 0.0 ? tumor / tissue : 0.0;
}

ZoneLabel argmax(const LeafProbs& p) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < p.size(); ++i)
    if (p[i] > p[best]) best = i;
  return static_cast<ZoneLabel>(best);
}

}  // namespace irmap
