#include <gtest/gtest.h>

#include "irmap/error.hpp"
#include "irmap/zones.hpp"

using namespace irmap;

TEST(Zones, UnionAlgebraOverLeaves) {
  for (ZoneLabel z : kAllZones) {
    EXPECT_EQ(is_working(z), z != ZoneLabel::NWA);
    EXPECT_EQ(is_intact(z), z == ZoneLabel::NA_BC || z == ZoneLabel::NA_DM);
    EXPECT_EQ(is_tumor(z), z == ZoneLabel::HA_BC || z == ZoneLabel::HA_DM);
    EXPECT_EQ(is_cortex(z), z == ZoneLabel::NA_BC || z == ZoneLabel::HA_BC);
    EXPECT_EQ(is_dura(z), z == ZoneLabel::NA_DM || z == ZoneLabel::HA_DM);
    // WA splits into NA/HA and into BC/DM, each a partition.
    EXPECT_EQ(is_working(z), is_intact(z) != is_tumor(z) || is_intact(z) || is_tumor(z));
    if (is_working(z)) {
      EXPECT_NE(is_intact(z), is_tumor(z));
      EXPECT_NE(is_cortex(z), is_dura(z));
    } else {
      EXPECT_FALSE(is_intact(z) || is_tumor(z) || is_cortex(z) || is_dura(z));
    }
  }
}

TEST(Zones, MakeTissueRoundTrips) {
  for (bool cortex : {false, true})
    for (bool tumor : {false, true}) {
      const ZoneLabel z = make_tissue(cortex, tumor);
      EXPECT_EQ(is_cortex(z), cortex);
      EXPECT_EQ(is_tumor(z), tumor);
    }
}

TEST(Zones, ModeLegalityTable) {
  EXPECT_TRUE(is_legal(Mode::On, ZoneLabel::NWA));
  EXPECT_TRUE(is_legal(Mode::On, ZoneLabel::NA_DM));
  EXPECT_TRUE(is_legal(Mode::On, ZoneLabel::HA_DM));
  EXPECT_FALSE(is_legal(Mode::On, ZoneLabel::NA_BC));
  EXPECT_FALSE(is_legal(Mode::On, ZoneLabel::HA_BC));
  for (ZoneLabel z : kAllZones) EXPECT_TRUE(is_legal(Mode::In, z));
  EXPECT_TRUE(is_legal(Mode::Off, ZoneLabel::NWA));
  EXPECT_TRUE(is_legal(Mode::Off, ZoneLabel::NA_BC));
  EXPECT_TRUE(is_legal(Mode::Off, ZoneLabel::HA_BC));
  EXPECT_FALSE(is_legal(Mode::Off, ZoneLabel::NA_DM));
  EXPECT_FALSE(is_legal(Mode::Off, ZoneLabel::HA_DM));
}

TEST(Zones, ParseAndPrint) {
  for (ZoneLabel z : kAllZones) EXPECT_EQ(parse_zone(to_string(z)), z);
  for (Mode m : kAllModes) EXPECT_EQ(parse_mode(to_string(m)), m);
  EXPECT_FALSE(parse_zone("HA").has_value());
  EXPECT_FALSE(parse_mode("on").has_value());
}

TEST(Zones, CheckLegalNamesOffendingPixel) {
  Grid<ZoneLabel> g(3, 2, ZoneLabel::NA_DM);
  EXPECT_NO_THROW(check_legal(g, Mode::On));
  g(2, 1) = ZoneLabel::HA_BC;
  try {
    check_legal(g, Mode::On);
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("(2, 1)"), std::string::npos);
  }
  EXPECT_NO_THROW(check_legal(g, Mode::In));
}

TEST(Zones, CountZones) {
  Grid<ZoneLabel> g(4, 1, ZoneLabel::NWA);
  g(1, 0) = ZoneLabel::HA_DM;
  g(2, 0) = ZoneLabel::HA_DM;
  const auto c = count_zones(g);
  EXPECT_EQ(c[index_of(ZoneLabel::NWA)], 2u);
  EXPECT_EQ(c[index_of(ZoneLabel::HA_DM)], 2u);
  EXPECT_EQ(c[index_of(ZoneLabel::NA_BC)], 0u);
}

TEST(Zones, TumorGivenTissue) {
  EXPECT_DOUBLE_EQ(tumor_given_tissue({0.2, 0.4, 0.4, 0.0, 0.0}), 0.5);
  EXPECT_DOUBLE_EQ(tumor_given_tissue({1.0, 0.0, 0.0, 0.0, 0.0}), 0.0);
  EXPECT_DOUBLE_EQ(tumor_given_tissue({0.0, 0.1, 0.2, 0.3, 0.4}), 0.6);
}

TEST(Zones, ArgmaxPrefersLowerCodeOnTies) {
  EXPECT_EQ(argmax({0.0, 0.5, 0.5, 0.0, 0.0}), ZoneLabel::NA_DM);
  EXPECT_EQ(argmax({0.1, 0.2, 0.3, 0.4, 0.0}), ZoneLabel::NA_BC);
}
