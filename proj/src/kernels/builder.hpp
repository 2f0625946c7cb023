#pragma once

// Internal plumbing shared by the kernel generators.

#include "das/alloc.hpp"
#include "das/kernels.hpp"

#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace das::detail {

using Body = std::function<Generator<PeOp>(std::uint32_t pe)>;

struct Step {
    enum class Kind : std::uint8_t { Controller, Parallel, Barrier };
    Kind kind = Kind::Controller;
    std::vector<PeOp> ops;
    Body body;
    std::uint64_t id = 0;
};

/// The controller PE issues allocator calls and DMA starts.
inline constexpr std::uint32_t kController = 0;

class PlanBuilder {
public:
    PlanBuilder(const ClusterTopology& topo, Scheme scheme, const KernelOptions& opts);

    const ClusterTopology& topo() const { return topo_; }
    Scheme scheme() const { return scheme_; }
    const KernelOptions& opts() const { return opts_; }
    std::uint32_t pes() const { return topo_.total_pes(); }

    /// Allocate with `das_request` under the Das scheme, interleaved
    /// otherwise. Charges the allocator cost to the controller.
    std::uint64_t alloc(const std::string& name, std::uint64_t bytes, MapRequest das_request);
    void release(std::uint64_t addr);

    /// Register a transfer and have the controller start it. Returns its id.
    std::uint64_t dma(const std::string& name, ByteRange l1, DmaDirection dir);
    /// Every PE waits for transfer `id`.
    void wait_all(std::uint64_t id);

    void parallel(Body body, const OpCounts& expected);
    void barrier(const std::string& name, const std::string& stage);

    std::uint16_t mac() const { return opts_.lat.mac; }
    std::uint16_t alu() const { return opts_.lat.alu; }
    std::uint16_t div() const { return opts_.lat.div; }

    KernelPlan finish(std::string kernel, std::string dims, std::uint32_t parallel, std::uint64_t macs);

private:
    std::vector<PeOp>& controller_ops();

    ClusterTopology topo_;
    Scheme scheme_;
    KernelOptions opts_;
    Heap heap_;
    std::shared_ptr<std::vector<Step>> steps_;
    Workload w_;
    std::vector<PlanOperand> operands_;
    OpCounts expected_;
    std::uint64_t next_barrier_ = 0;
};

/// Words per ownership chunk: a power of two covering `words`, at least
/// `min_words`.
std::uint64_t chunk_words(std::uint64_t words, std::uint64_t min_words);

/// Das request placing consecutive chunks of `chunk` words on consecutive
/// partitions of `partition_banks` banks. Throws ConfigError when the chunk
/// exceeds what a partition can hold.
MapRequest chunked_request(const ClusterTopology& topo, std::uint64_t partition_banks, std::uint64_t chunk,
                           const std::string& what);

std::uint64_t words_to_bytes(const ClusterTopology& topo, std::uint64_t words);

// Rotating register sets used by the bodies.
inline constexpr std::uint8_t kAcc = 32;

// ----- GEMM building block, shared with the ViT composition -----

struct GemmShape {
    std::uint32_t M = 0;
    std::uint32_t N = 0;
    std::uint32_t P = 0;
    std::uint32_t n = 1;
};

struct GemmLayout {
    GemmShape shape;
    std::uint32_t tiles = 0;
    std::uint32_t ppt = 0;
    std::uint32_t bpt = 0;
    std::uint32_t k = 1;  // tiles sharing one 4-row block
    bool fold_b = false;
    std::uint64_t chunk_a = 0;
    std::uint64_t chunk_b = 0;
    std::uint64_t chunk_c = 0;
    MapRequest req_a;
    MapRequest req_b;
    MapRequest req_c;
    std::uint64_t a = 0;
    std::uint64_t b = 0;
    std::uint64_t c = 0;
    std::uint16_t mac = 4;

    std::uint32_t row_blocks() const { return shape.n * shape.M / 4; }
    std::uint64_t bytes_a(std::uint32_t word) const { return row_blocks() * chunk_a * word; }
    std::uint64_t bytes_b(std::uint32_t word) const { return shape.n * chunk_b * word; }
    std::uint64_t bytes_c(std::uint32_t word) const { return row_blocks() * chunk_c * word; }
    std::uint64_t windows() const { return std::uint64_t{row_blocks()} * (shape.P / 4); }
};

GemmLayout plan_gemm(const ClusterTopology& topo, const GemmShape& shape);
/// Emit the compute step of a GEMM whose operands are already placed.
void emit_gemm(PlanBuilder& b, const GemmLayout& layout);

enum class Elementwise : std::uint8_t { ResidualAdd, Gelu };

/// Element-wise pass over a GEMM result in place, each PE touching the C
/// windows it produced. ResidualAdd reads `other` laid out like C.
void emit_elementwise(PlanBuilder& b, const GemmLayout& layout, Elementwise kind, std::uint64_t other = 0);

// ----- LayerNorm building block -----

struct NormLayout {
    std::uint32_t tokens = 0;
    std::uint32_t E = 0;
    std::uint32_t pes = 0;
    std::uint32_t tiles = 0;
    std::uint32_t ppt = 0;
    std::uint64_t chunk = 0;
    MapRequest req;
    std::uint64_t x = 0;
    std::uint64_t y = 0;
    std::uint64_t gamma = 0;
    std::uint64_t beta = 0;
    std::uint16_t mac = 4, alu = 1, div = 12;

    std::uint32_t rounds() const { return (tokens + pes - 1) / pes; }
    std::uint64_t bytes(std::uint32_t word) const { return std::uint64_t{rounds()} * tiles * chunk * word; }
    std::uint64_t token_addr(std::uint64_t base, std::uint32_t t) const;
};

NormLayout plan_norm(const ClusterTopology& topo, std::uint32_t tokens, std::uint32_t E);
void emit_norm(PlanBuilder& b, const NormLayout& layout);

// ----- FlashAttention building block -----

struct AttnLayout {
    std::uint32_t S = 0;
    std::uint32_t P = 0;
    std::uint32_t tile_s = 0;
    std::uint32_t heads = 1;
    std::uint32_t tiles = 0;
    std::uint32_t ppt = 0;
    std::uint32_t group_tiles = 0;  // tiles per head
    std::uint32_t rows = 0;         // query rows per tile
    std::uint64_t chunk_q = 0;      // Q and O
    std::uint64_t chunk_a = 0;      // score tile
    std::uint64_t chunk_stats = 0;  // m, l, alpha per row
    std::uint64_t chunk_kv = 0;     // one head's K or V block
    MapRequest req_tile;
    MapRequest req_a;
    MapRequest req_stats;
    MapRequest req_kv;
    bool fold_kv = false;
    std::uint64_t q = 0, o = 0, a = 0, stats = 0;
    std::uint16_t mac = 4, alu = 1, div = 12;

    std::uint32_t iterations() const { return S / tile_s; }
    std::uint64_t bytes_q(std::uint32_t word) const { return std::uint64_t{tiles} * chunk_q * word; }
    std::uint64_t bytes_a(std::uint32_t word) const { return std::uint64_t{tiles} * chunk_a * word; }
    std::uint64_t bytes_stats(std::uint32_t word) const { return std::uint64_t{tiles} * chunk_stats * word; }
    std::uint64_t bytes_kv(std::uint32_t word) const { return std::uint64_t{heads} * chunk_kv * word; }
};

AttnLayout plan_attention(const ClusterTopology& topo, std::uint32_t S, std::uint32_t P, std::uint32_t tile_s,
                          std::uint32_t heads);
/// Full FA2 schedule: Q and K_0 transfers, N_iter iterations with V_k placed
/// into K_k's freed buffer, final normalization, O written back.
void emit_attention(PlanBuilder& b, AttnLayout layout, const std::string& stage);

}  // namespace das::detail
