#include "das/dma.hpp"
#include "das/engine.hpp"
#include "das/errors.hpp"

#include <gtest/gtest.h>

namespace das {
namespace {

DmaTransfer to_l1(std::uint64_t id, std::uint64_t begin, std::uint64_t bytes) {
    return {id, "t" + std::to_string(id), {begin, begin + bytes}, DmaDirection::ToL1};
}

/// Advance until every transfer is complete; returns the completion cycle of `id`.
std::uint64_t drain(DmaEngine& dma, BankCalendar& banks, std::uint64_t id, std::uint64_t now = 0) {
    for (; dma.active(); ++now) {
        banks.advance(now);
        dma.advance(now);
    }
    return *dma.completion(id);
}

// A transfer into the banks of one subgroup moves words_per_cycle words per
// cycle: W words complete after ceil(W / 4) cycles.
TEST(Dma, SingleBackendThroughput) {
    const auto t = desk_default();
    const std::uint32_t sg_banks = t.banks_per_tile * t.tiles_per_subgroup;
    for (std::uint32_t words : {1u, 4u, 5u, 37u, 64u}) {
        BankCalendar banks(t.total_banks());
        DmaEngine dma(t, {4, 0}, banks);
        // One p-partition covering a subgroup, 4 rows tall, keeps every word in subgroup 0.
        const auto cfg = MapConfig::das(log2_exact(sg_banks), 2, 0, std::uint64_t{t.word_bytes} * sg_banks * 4);
        const RegionTable regions(t, {cfg});
        dma.start(to_l1(1, 0, std::uint64_t{words} * t.word_bytes), regions, 0);
        EXPECT_EQ(drain(dma, banks, 1), (words + 3) / 4) << words << " words";
    }
}

TEST(Dma, BackendsRunInParallel) {
    const auto t = desk_default();
    BankCalendar banks(t.total_banks());
    DmaEngine dma(t, {4, 0}, banks);
    EXPECT_EQ(dma.backends(), t.total_subgroups());
    // 256 interleaved words spread evenly over the four subgroups.
    dma.start(to_l1(7, 0, 256 * 4), RegionTable{}, 0);
    EXPECT_EQ(drain(dma, banks, 7), 256u / 4 / t.total_subgroups());
}

TEST(Dma, L2LatencyDelaysFirstWord) {
    const auto t = desk_default();
    BankCalendar banks(t.total_banks());
    DmaEngine dma(t, {4, 100}, banks);
    dma.start(to_l1(1, 0, 4), RegionTable{}, 10);
    EXPECT_FALSE(dma.completion(1).has_value());
    EXPECT_EQ(drain(dma, banks, 1, 10), 10u + 100u + 1u);
}

TEST(Dma, SegmentsFollowMapping) {
    const auto t = desk_default();
    BankCalendar banks(t.total_banks());
    DmaEngine dma(t, {}, banks);
    const auto cfg = MapConfig::das(4, 1, 0, 8192);
    dma.start(to_l1(1, 64, 512), RegionTable(t, {cfg}), 0);
    // Partition blocks are 4 * 2^5 = 128 bytes.
    const auto& segs = dma.segments(1);
    ASSERT_EQ(segs.size(), 5u);
    EXPECT_EQ(segs.front().dst, (ByteRange{64, 128}));
    EXPECT_EQ(segs.back().dst, (ByteRange{512, 576}));
    EXPECT_THROW(dma.start(to_l1(1, 0, 4), RegionTable{}, 0), SimFault);
    EXPECT_THROW(dma.segments(2), SimFault);
}

TEST(Dma, EmptyTransferCompletesImmediately) {
    const auto t = desk_default();
    BankCalendar banks(t.total_banks());
    DmaEngine dma(t, {}, banks);
    dma.start(to_l1(3, 0, 0), RegionTable{}, 42);
    EXPECT_EQ(dma.completion(3), 42u);
    EXPECT_FALSE(dma.active());
}

Workload dma_workload(const std::vector<std::vector<PeOp>>& progs, std::vector<DmaTransfer> transfers) {
    Workload w;
    w.num_pes = static_cast<std::uint32_t>(progs.size());
    w.stream = [&progs](std::uint32_t pe) { return replay(progs[pe]); };
    w.transfers = std::move(transfers);
    return w;
}

// Waiting on a transfer that has already landed costs nothing.
TEST(Dma, WaitAfterCompletionIsFree) {
    const auto t = desk_default();
    std::vector<std::vector<PeOp>> progs(1);
    progs[0].push_back(PeOp::dma_start(1));
    for (int i = 0; i < 200; ++i) progs[0].push_back(PeOp::compute(ComputeClass::ALU, 1, 0));
    progs[0].push_back(PeOp::dma_wait(1));
    EngineParams params;
    params.dma.l2_latency = 20;
    const auto r = run(t, dma_workload(progs, {to_l1(1, 0, 256)}), params);
    EXPECT_EQ(r.pes[0].counters.wfi, 0u);
    EXPECT_EQ(r.cycles, 202u);
}

// A wait issued before the transfer completes, or even before another PE
// has started it, sleeps as WFI until the data has landed.
TEST(Dma, EarlyWaitSleepsUntilDone) {
    const auto t = desk_default();
    std::vector<std::vector<PeOp>> progs(2);
    progs[0] = {PeOp::compute(ComputeClass::ALU, 1, 0), PeOp::compute(ComputeClass::ALU, 1, 0), PeOp::dma_start(1),
                PeOp::dma_wait(1)};
    progs[1] = {PeOp::dma_wait(1)};
    EngineParams params;
    params.dma.l2_latency = 30;
    const auto r = run(t, dma_workload(progs, {to_l1(1, 0, 64)}), params);
    // Started at cycle 2; the 16 words all sit in subgroup 0 and move over
    // cycles 32..35, so the last lands at 36 and both waits issue then.
    EXPECT_EQ(r.cycles, 37u);
    EXPECT_EQ(r.pes[1].counters.wfi, 36u);
    EXPECT_EQ(r.pes[0].counters.wfi, 36u - 3u);
}

TEST(Dma, StartingTwiceFaults) {
    const auto t = desk_default();
    std::vector<std::vector<PeOp>> progs{{PeOp::dma_start(1), PeOp::dma_start(1)}};
    EXPECT_THROW(run(t, dma_workload(progs, {to_l1(1, 0, 64)}), {}), SimFault);
    std::vector<std::vector<PeOp>> never{{PeOp::dma_wait(1)}};
    EXPECT_THROW(run(t, dma_workload(never, {to_l1(1, 0, 64)}), {}), SimFault);
}

}  // namespace
}  // namespace das
