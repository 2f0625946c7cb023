#include "das/errors.hpp"
#include "das/topology.hpp"

#include <gtest/gtest.h>

namespace das {
namespace {

TEST(Topology, TerapoolCounts) {
    const auto t = terapool_default();
    EXPECT_EQ(t.total_pes(), 1024u);
    EXPECT_EQ(t.total_banks(), 4096u);
    EXPECT_EQ(t.total_tiles(), 128u);
    EXPECT_EQ(t.total_bytes(), 4u * 1024 * 1024);
    EXPECT_EQ(t.bank_bits(), 12u);
    EXPECT_EQ(t.row_bits(), 8u);
    EXPECT_EQ(t.address_bits(), 22u);
}

TEST(Topology, DeskCounts) {
    const auto t = desk_default();
    EXPECT_EQ(t.total_tiles(), 16u);
    EXPECT_EQ(t.total_pes(), 64u);
    EXPECT_EQ(t.total_banks(), 256u);
    EXPECT_EQ(t.total_bytes(), 1024u * 1024);
}

TEST(Topology, AccessLevels) {
    const auto t = terapool_default();
    // PE 0 lives in tile 0: banks 0..31 are its own.
    EXPECT_EQ(access_level(t, 0, 0), HierarchyLevel::TileLocal);
    EXPECT_EQ(access_level(t, 0, 31), HierarchyLevel::TileLocal);
    EXPECT_EQ(access_level(t, 0, 32), HierarchyLevel::SubGroupLocal);
    EXPECT_EQ(access_level(t, 0, 8 * 32), HierarchyLevel::GroupLocal);
    EXPECT_EQ(access_level(t, 0, 32 * 32), HierarchyLevel::Remote);
    EXPECT_EQ(access_level(t, 1023, 4095), HierarchyLevel::TileLocal);
    EXPECT_EQ(t.latency(HierarchyLevel::TileLocal), 1u);
    EXPECT_EQ(t.latency(HierarchyLevel::Remote), 7u);
}

TEST(Topology, LevelCountsPerPe) {
    // Every PE sees 1 tile, 7 subgroup, 24 group and 96 remote tiles.
    const auto t = terapool_default();
    for (std::uint32_t pe : {0u, 511u, 1023u}) {
        std::uint32_t n[kNumLevels] = {};
        for (std::uint32_t bank = 0; bank < t.total_banks(); bank += t.banks_per_tile) {
            ++n[static_cast<int>(access_level(t, pe, bank))];
        }
        EXPECT_EQ(n[0], 1u);
        EXPECT_EQ(n[1], 7u);
        EXPECT_EQ(n[2], 24u);
        EXPECT_EQ(n[3], 96u);
    }
    EXPECT_DOUBLE_EQ(local_fraction(t), 32.0 / 4096.0);
}

TEST(Topology, RejectsBadConfigs) {
    auto t = terapool_default();
    t.banks_per_tile = 24;
    EXPECT_THROW(t.validate(), ConfigError);
    t = terapool_default();
    t.level_latency = {1, 3, 3, 7};
    EXPECT_THROW(t.validate(), ConfigError);
    EXPECT_THROW(access_level(terapool_default(), 1024, 0), ConfigError);
    EXPECT_THROW(access_level(terapool_default(), 0, 4096), ConfigError);
}

TEST(Topology, Pow2Helpers) {
    EXPECT_TRUE(is_pow2(1));
    EXPECT_FALSE(is_pow2(0));
    EXPECT_FALSE(is_pow2(6));
    EXPECT_EQ(log2_exact(4096), 12u);
    EXPECT_THROW(log2_exact(12), ConfigError);
    EXPECT_EQ(next_pow2(197), 256u);
    EXPECT_EQ(next_pow2(256), 256u);
    EXPECT_EQ(next_pow2(0), 1u);
}

}  // namespace
}  // namespace das
