#pragma once

#include "das/alloc.hpp"
#include "das/dma.hpp"
#include "das/generator.hpp"
#include "das/ops.hpp"
#include "das/remap.hpp"
#include "das/topology.hpp"

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace das {

struct EngineParams {
    /// Memory ops a PE may have in flight before it stalls on the LSU.
    std::uint32_t outstanding = 4;
    /// Outbound request slots per tile per cycle, indexed by HierarchyLevel.
    /// The TileLocal entry is ignored (no boundary to cross).
    std::array<std::uint32_t, kNumLevels> port_slots{1, 1, 1, 1};
    /// Cycles per port window: port_slots requests pass every port_period
    /// cycles.
    std::uint32_t port_period = 1;
    DmaParams dma;
    /// Bank queues may not run further ahead than 2^horizon_log2 cycles.
    unsigned horizon_log2 = 14;

    void validate() const;
    friend bool operator==(const EngineParams&, const EngineParams&) = default;
};

enum class AllocEventKind : std::uint8_t { Malloc, Free };

/// An allocator call performed by the controller PE. `epoch` is the index
/// of the mapping table that becomes active when the call's tagged op
/// issues, or -1 if the mapping does not change.
struct AllocEvent {
    AllocEventKind kind = AllocEventKind::Malloc;
    std::string name;
    std::uint64_t addr = 0;
    std::uint64_t bytes = 0;
    MapConfig config;
    int epoch = -1;
};

struct PhaseInfo {
    std::string name;
    std::string stage;
};

/// Everything the engine needs to execute: op streams plus the tables the
/// streams refer to by index.
struct Workload {
    std::uint32_t num_pes = 0;
    std::function<Generator<PeOp>(std::uint32_t pe)> stream;
    std::vector<RegionTable> epochs;       // epoch 0 active at cycle 0
    std::vector<AllocEvent> events;        // referenced by PeOp::tag - 1
    std::vector<DmaTransfer> transfers;    // referenced by id
    std::vector<PhaseInfo> phases;         // referenced by barrier id
    std::string tail_phase = "tail";
    std::optional<OpCounts> expected;
};

struct StallCounters {
    std::uint64_t instr = 0;
    std::uint64_t lsu = 0;
    std::uint64_t raw = 0;
    std::uint64_t ins = 0;
    std::uint64_t wfi = 0;

    std::uint64_t total() const { return instr + lsu + raw + ins + wfi; }
    StallCounters& operator+=(const StallCounters& o) {
        instr += o.instr;
        lsu += o.lsu;
        raw += o.raw;
        ins += o.ins;
        wfi += o.wfi;
        return *this;
    }
    friend StallCounters operator-(StallCounters a, const StallCounters& b) {
        a.instr -= b.instr;
        a.lsu -= b.lsu;
        a.raw -= b.raw;
        a.ins -= b.ins;
        a.wfi -= b.wfi;
        return a;
    }
    friend bool operator==(const StallCounters&, const StallCounters&) = default;
};

struct PeStats {
    std::uint64_t cycles = 0;
    StallCounters counters;
    friend bool operator==(const PeStats&, const PeStats&) = default;
};

/// Aggregate over all PEs between two consecutive barrier releases.
struct PhaseStats {
    std::string name;
    std::string stage;
    std::uint64_t start = 0;
    std::uint64_t cycles = 0;
    StallCounters counters;  // summed over PEs
    friend bool operator==(const PhaseStats&, const PhaseStats&) = default;
};

struct EventRecord {
    AllocEvent event;
    std::uint64_t cycle = 0;
};

struct SimReport {
    std::uint64_t cycles = 0;
    std::vector<PeStats> pes;
    std::vector<PhaseStats> phases;
    std::vector<EventRecord> events;
    OpCounts ops;
    /// Memory accesses per hierarchy level.
    std::array<std::uint64_t, kNumLevels> accesses{};

    StallCounters totals() const;
    double ipc_mean() const;
};

/// Execute a workload. Throws SimFault on faults (bad address, deadlock,
/// inconsistent barriers, plan self-check mismatch).
SimReport run(const ClusterTopology& topo, const Workload& workload, const EngineParams& params);

/// Convenience form over explicit op vectors, mapping taken from the heap's
/// live regions. Barrier ids name phases "barrier<N>".
SimReport run(const ClusterTopology& topo, const Heap& heap, const std::vector<std::vector<PeOp>>& programs,
              const EngineParams& params);

/// Wraps a vector as a generator (used by tests and the convenience run).
Generator<PeOp> replay(const std::vector<PeOp>& ops);

}  // namespace das
