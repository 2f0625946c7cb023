#pragma once

#include <array>
#include <cstdint>
#include <string_view>

namespace das {

enum class OpKind : std::uint8_t { Load, Store, Compute, Barrier, DmaStart, DmaWait };
enum class ComputeClass : std::uint8_t { MAC, ALU, DIV };

std::string_view to_string(OpKind kind);
std::string_view to_string(ComputeClass cls);

inline constexpr std::uint8_t kNoReg = 0xff;
inline constexpr unsigned kNumRegs = 64;

/**
 * One abstract PE instruction.
 *
 * Data dependencies are expressed through a small register namespace: a
 * Load or Compute writes `dst`, a Compute or Store reads `src`. The engine
 * keeps a scoreboard so an op that reads a register still in flight stalls
 * (LSU stall if a load produces it, RAW stall if a compute does).
 */
struct PeOp {
    OpKind kind = OpKind::Compute;
    ComputeClass cls = ComputeClass::ALU;
    std::uint8_t dst = kNoReg;
    std::array<std::uint8_t, 3> src{kNoReg, kNoReg, kNoReg};
    std::uint16_t latency = 0;
    /// Nonzero marks an allocator event (index + 1 into the plan's event table).
    std::uint32_t tag = 0;
    /// Byte address for Load/Store, barrier id, or DMA transfer id.
    std::uint64_t arg = 0;

    static PeOp load(std::uint64_t addr, std::uint8_t dst) {
        PeOp op;
        op.kind = OpKind::Load;
        op.dst = dst;
        op.arg = addr;
        return op;
    }
    static PeOp store(std::uint64_t addr, std::uint8_t src) {
        PeOp op;
        op.kind = OpKind::Store;
        op.src[0] = src;
        op.arg = addr;
        return op;
    }
    static PeOp compute(ComputeClass cls, std::uint16_t latency, std::uint8_t dst, std::uint8_t a = kNoReg,
                        std::uint8_t b = kNoReg, std::uint8_t c = kNoReg) {
        PeOp op;
        op.kind = OpKind::Compute;
        op.cls = cls;
        op.latency = latency;
        op.dst = dst;
        op.src = {a, b, c};
        return op;
    }
    static PeOp barrier(std::uint64_t id) {
        PeOp op;
        op.kind = OpKind::Barrier;
        op.arg = id;
        return op;
    }
    static PeOp dma_start(std::uint64_t id) {
        PeOp op;
        op.kind = OpKind::DmaStart;
        op.arg = id;
        return op;
    }
    static PeOp dma_wait(std::uint64_t id) {
        PeOp op;
        op.kind = OpKind::DmaWait;
        op.arg = id;
        return op;
    }

    friend bool operator==(const PeOp&, const PeOp&) = default;
};

/// Per-kind op tally, used both as the analytic expectation attached to a
/// plan and as the count the engine observes.
struct OpCounts {
    std::uint64_t loads = 0;
    std::uint64_t stores = 0;
    std::uint64_t macs = 0;
    std::uint64_t alus = 0;
    std::uint64_t divs = 0;
    std::uint64_t barriers = 0;
    std::uint64_t dma_ops = 0;

    void add(const PeOp& op) {
        switch (op.kind) {
            case OpKind::Load: ++loads; break;
            case OpKind::Store: ++stores; break;
            case OpKind::Compute:
                if (op.cls == ComputeClass::MAC) ++macs;
                else if (op.cls == ComputeClass::ALU) ++alus;
                else ++divs;
                break;
            case OpKind::Barrier: ++barriers; break;
            case OpKind::DmaStart:
            case OpKind::DmaWait: ++dma_ops; break;
        }
    }
    std::uint64_t total() const { return loads + stores + macs + alus + divs + barriers + dma_ops; }

    OpCounts& operator+=(const OpCounts& o) {
        loads += o.loads;
        stores += o.stores;
        macs += o.macs;
        alus += o.alus;
        divs += o.divs;
        barriers += o.barriers;
        dma_ops += o.dma_ops;
        return *this;
    }
    friend bool operator==(const OpCounts&, const OpCounts&) = default;
};

}  // namespace das
