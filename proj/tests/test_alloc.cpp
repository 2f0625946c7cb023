#include "das/alloc.hpp"
#include "das/errors.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <random>
#include <set>

namespace das {
namespace {

TEST(Alloc, InitCoversHeap) {
    const auto t = terapool_default();
    Heap h(t, 4096, 65536);
    ASSERT_EQ(h.free_list().size(), 1u);
    EXPECT_EQ(h.free_list().front(), (FreeBlock{4096, 65536}));
    EXPECT_THROW(Heap(t, 0, 0), ConfigError);
    EXPECT_THROW(Heap(t, 2, 64), ConfigError);
    EXPECT_THROW(Heap(t, 0, t.total_bytes() + 4), ConfigError);
}

TEST(Alloc, RoundingAndAlignment) {
    const auto t = terapool_default();
    Heap h(t, 0, t.total_bytes());
    EXPECT_EQ(h.alignment(MapRequest::interleaved()), 4u);
    EXPECT_EQ(h.rounded_size(5, MapRequest::interleaved()), 8u);
    // One slab for s = 2 is 4 B * 4096 banks * 4 rows.
    EXPECT_EQ(h.alignment(MapRequest::das(5, 2)), 65536u);
    EXPECT_EQ(h.rounded_size(1, MapRequest::das(5, 2)), 65536u);
    EXPECT_EQ(h.rounded_size(65537, MapRequest::das(5, 2)), 131072u);
}

TEST(Alloc, FirstFitSplitsAndCoalesces) {
    const auto t = desk_default();
    Heap h(t, 0, 1 << 16);
    const auto a = h.das_malloc(100, MapRequest::interleaved());
    const auto b = h.das_malloc(200, MapRequest::interleaved());
    const auto c = h.das_malloc(300, MapRequest::interleaved());
    EXPECT_EQ(a, 0u);
    EXPECT_EQ(b, 100u);
    EXPECT_EQ(c, 300u);
    h.das_free(b);
    EXPECT_EQ(h.das_malloc(50, MapRequest::interleaved()), 100u);
    h.das_free(a);
    h.das_free(100);
    h.das_free(c);
    ASSERT_EQ(h.free_list().size(), 1u);
    EXPECT_EQ(h.free_list().front(), (FreeBlock{0, 1 << 16}));
    h.check_invariants();
}

TEST(Alloc, DasRegionIsRegistered) {
    const auto t = desk_default();
    Heap h(t, 0, t.total_bytes());
    h.das_malloc(12, MapRequest::interleaved());
    const auto r = h.das_malloc(1000, MapRequest::das(4, 1));
    EXPECT_EQ(r % h.alignment(MapRequest::das(4, 1)), 0u);
    const auto cfg = h.region_lookup(r + 40);
    ASSERT_TRUE(cfg.has_value());
    EXPECT_EQ(*cfg, MapConfig::das(4, 1, r, h.rounded_size(1000, MapRequest::das(4, 1))));
    EXPECT_FALSE(h.region_lookup(0).has_value());
    EXPECT_EQ(h.live_das_regions().size(), 1u);
    EXPECT_NO_THROW(validate_map_config(t, *cfg));
}

TEST(Alloc, Errors) {
    const auto t = desk_default();
    Heap h(t, 0, 4096);
    EXPECT_THROW(h.das_malloc(0, MapRequest::interleaved()), ConfigError);
    EXPECT_THROW(h.das_malloc(8, MapRequest::das(t.bank_bits() + 1, 0)), ConfigError);
    EXPECT_THROW(h.das_malloc(8192, MapRequest::interleaved()), AllocFailure);
    EXPECT_THROW(h.das_free(4), InvalidFree);
    const auto a = h.das_malloc(8, MapRequest::interleaved());
    h.das_free(a);
    EXPECT_THROW(h.das_free(a), InvalidFree);
}

TEST(Alloc, RegionLimitHook) {
    const auto t = desk_default();
    Heap h(t, 0, t.total_bytes());
    std::vector<std::size_t> calls;
    h.set_region_limit(2, [&](std::size_t n) { calls.push_back(n); });
    for (int i = 0; i < 3; ++i) h.das_malloc(64, MapRequest::das(4, 0));
    EXPECT_EQ(calls, std::vector<std::size_t>{3});
}

// Random malloc/free traces against the brute-force first-fit reference.
TEST(Alloc, MatchesReferenceAllocator) {
    const auto t = oracle::small_topology(4, 6);
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        std::mt19937_64 rng(seed);
        const std::uint64_t base = 64;
        const std::uint64_t size = t.total_bytes() - 128;
        Heap h(t, base, size);
        oracle::ReferenceAllocator ref(t, base, size);
        std::vector<std::uint64_t> live;
        for (int op = 0; op < 4000; ++op) {
            if (!live.empty() && rng() % 3 == 0) {
                const auto i = rng() % live.size();
                h.das_free(live[i]);
                ASSERT_TRUE(ref.free(live[i]));
                live.erase(live.begin() + static_cast<std::ptrdiff_t>(i));
            } else {
                const MapRequest req =
                    rng() % 2 ? MapRequest::interleaved() : MapRequest::das(rng() % 5, rng() % 3);
                const std::uint64_t bytes = 1 + rng() % 600;
                const auto want = ref.malloc(bytes, req);
                if (want) {
                    ASSERT_EQ(h.das_malloc(bytes, req), *want) << "seed " << seed << " op " << op;
                    live.push_back(*want);
                } else {
                    ASSERT_THROW(h.das_malloc(bytes, req), AllocFailure);
                }
            }
            h.check_invariants();
            const std::vector<FreeBlock> fl(h.free_list().begin(), h.free_list().end());
            ASSERT_EQ(fl, ref.gaps());
        }
    }
}

// Every word of every live allocation lands on a distinct (bank, row).
TEST(Alloc, LiveFootprintsAreDisjoint) {
    const auto t = oracle::small_topology(4, 6);
    std::mt19937_64 rng(11);
    Heap h(t, 0, t.total_bytes());
    std::vector<std::uint64_t> live;
    for (int op = 0; op < 300; ++op) {
        if (!live.empty() && rng() % 3 == 0) {
            const auto i = rng() % live.size();
            h.das_free(live[i]);
            live.erase(live.begin() + static_cast<std::ptrdiff_t>(i));
            continue;
        }
        const MapRequest req = rng() % 2 ? MapRequest::interleaved() : MapRequest::das(rng() % 5, rng() % 3);
        try {
            live.push_back(h.das_malloc(1 + rng() % 400, req));
        } catch (const AllocFailure&) {
        }
        std::set<std::pair<std::uint32_t, std::uint32_t>> used;
        const auto regions = h.live_das_regions();
        for (const auto& [addr, a] : h.live()) {
            for (std::uint64_t w = a.config.base_addr; w < a.config.end_addr(); w += t.word_bytes) {
                const auto loc = resolve(t, regions, w);
                ASSERT_TRUE(used.emplace(loc.bank, loc.row).second) << "op " << op;
            }
        }
    }
}

}  // namespace
}  // namespace das
