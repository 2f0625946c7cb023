#pragma once

#include "das/alloc.hpp"
#include "das/engine.hpp"
#include "das/ops.hpp"
#include "das/topology.hpp"

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace das {

enum class Scheme : std::uint8_t { Das, Interleaved };

std::string_view to_string(Scheme scheme);
/// Accepts "das" and "interleaved"; throws ConfigError otherwise.
Scheme parse_scheme(std::string_view text);

struct ComputeLatencies {
    std::uint16_t mac = 4;
    std::uint16_t alu = 1;
    std::uint16_t div = 12;
    friend bool operator==(const ComputeLatencies&, const ComputeLatencies&) = default;
};

struct KernelOptions {
    ComputeLatencies lat;
    /// ALU ops the controller PE spends per allocator call (CSR programming
    /// plus bookkeeping). Charged identically in both schemes.
    std::uint32_t alloc_cost = 64;
    /// Heap bounds in bytes; a zero size means the whole L1.
    std::uint64_t heap_base = 0;
    std::uint64_t heap_size = 0;
    friend bool operator==(const KernelOptions&, const KernelOptions&) = default;
};

/// One allocation made by a plan, in allocation order.
struct PlanOperand {
    std::string name;
    std::uint64_t addr = 0;
    std::uint64_t bytes = 0;
    MapConfig config;
};

/**
 * A generated workload plus its bookkeeping. `workload.expected` holds the
 * closed-form op counts; the engine refuses to finish a run whose issued
 * ops differ.
 */
struct KernelPlan {
    std::string kernel;
    std::string dims;
    std::uint32_t parallel = 1;
    Scheme scheme = Scheme::Das;
    std::uint64_t macs = 0;  // analytic MAC count of the math being modeled
    Workload workload;
    std::vector<PlanOperand> operands;

    const OpCounts& expected() const { return *workload.expected; }
};

/// GEMV c = A b with A of M outputs by N reductions, n_parallel problems.
KernelPlan gen_gemv(const ClusterTopology& topo, std::uint32_t M, std::uint32_t N, std::uint32_t n_parallel,
                    Scheme scheme, const KernelOptions& opts = {});

/// GEMM C = A B with A: MxN, B: NxP, n_parallel independent problems.
KernelPlan gen_gemm(const ClusterTopology& topo, std::uint32_t M, std::uint32_t N, std::uint32_t P,
                    std::uint32_t n_parallel, Scheme scheme, const KernelOptions& opts = {});

/// FlashAttention-2 forward pass for n_heads heads processed side by side.
KernelPlan gen_flash_attention(const ClusterTopology& topo, std::uint32_t S, std::uint32_t head_dim,
                               std::uint32_t tile_s, std::uint32_t n_heads, Scheme scheme,
                               const KernelOptions& opts = {});

KernelPlan gen_layernorm(const ClusterTopology& topo, std::uint32_t tokens, std::uint32_t E, Scheme scheme,
                         const KernelOptions& opts = {});

struct VitConfig {
    std::string name = "vit";
    std::uint32_t image = 224;
    std::uint32_t patch = 16;
    std::uint32_t embed = 256;
    std::uint32_t head_dim = 64;
    std::uint32_t mlp_ratio = 4;
    std::uint32_t tile_s = 128;

    std::uint32_t patches() const { return (image / patch) * (image / patch); }
    std::uint32_t tokens() const { return patches() + 1; }  // plus class token
    std::uint32_t heads() const { return embed / head_dim; }
    /// Token count rounded up to a power of two for blocking.
    std::uint32_t padded_tokens() const;
    void validate() const;
};

/// One encoder layer: Norm, QKV, SA, OP, Norm, FF. Phase stages are
/// labelled "Norm", "QKV", "SA", "OP", "FF".
KernelPlan gen_vit_encoder(const ClusterTopology& topo, const VitConfig& cfg, Scheme scheme,
                           const KernelOptions& opts = {});

/// Closed-form MAC count of one encoder layer (for configurations too large
/// to simulate).
std::uint64_t vit_layer_macs(const VitConfig& cfg);

/// Degenerate workload: every PE issues `ops` independent ALU ops and no
/// memory traffic, so the mapping scheme cannot matter.
KernelPlan gen_compute(const ClusterTopology& topo, std::uint32_t ops, Scheme scheme, const KernelOptions& opts = {});

/// Materialize one PE's op stream.
std::vector<PeOp> trace(const KernelPlan& plan, std::uint32_t pe);

/// Sum op counts over every PE's stream by walking the generators.
OpCounts count_ops(const KernelPlan& plan);

}  // namespace das
