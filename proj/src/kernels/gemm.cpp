#include "builder.hpp"

#include "das/errors.hpp"

namespace das {
namespace detail {

namespace {

// Tile owning window (block, col): blocks are spread over groups of k
// tiles; inside a group, columns follow the bank-partition fold.
std::uint32_t window_tile(const GemmLayout& L, std::uint32_t block, std::uint32_t col) {
    const std::uint32_t group = static_cast<std::uint32_t>((std::uint64_t{block} * L.k) % L.tiles);
    const std::uint32_t sub = L.k == 1 ? 0 : (col % (L.k * L.bpt)) / L.bpt;
    return group + sub;
}

Generator<PeOp> gemm_body(GemmLayout L, std::uint32_t pe) {
    const std::uint32_t tile = pe / L.ppt;
    const std::uint32_t lane = pe % L.ppt;
    const std::uint32_t word = 4;
    const std::uint32_t blocks = L.row_blocks();
    const std::uint32_t blocks_per_problem = L.shape.M / 4;
    const std::uint32_t N = L.shape.N;
    const std::uint32_t P = L.shape.P;
    std::uint64_t index = 0;
    for (std::uint32_t q = 0; q < blocks; ++q) {
        if ((std::uint64_t{q} * L.k) % L.tiles != tile - tile % L.k) continue;
        const std::uint32_t problem = q / blocks_per_problem;
        const std::uint64_t a_row = L.a + std::uint64_t{q} * L.chunk_a * word;
        const std::uint64_t b_base = L.b + std::uint64_t{problem} * L.chunk_b * word;
        const std::uint64_t c_row = L.c + std::uint64_t{q} * L.chunk_c * word;
        for (std::uint32_t col = 0; col < P; col += 4) {
            if (window_tile(L, q, col) != tile) continue;
            if (index++ % L.ppt != lane) continue;
            for (std::uint32_t kk = 0; kk <= N; ++kk) {
                if (kk < N) {
                    const auto set = static_cast<std::uint8_t>(8 * (kk & 1));
                    for (std::uint8_t i = 0; i < 4; ++i) {
                        co_yield PeOp::load(a_row + (std::uint64_t{i} * N + kk) * word,
                                            static_cast<std::uint8_t>(set + i));
                    }
                    for (std::uint8_t j = 0; j < 4; ++j) {
                        co_yield PeOp::load(b_base + (std::uint64_t{kk} * P + col + j) * word,
                                            static_cast<std::uint8_t>(set + 4 + j));
                    }
                }
                if (kk > 0) {
                    const auto set = static_cast<std::uint8_t>(8 * ((kk - 1) & 1));
                    for (std::uint8_t i = 0; i < 4; ++i) {
                        for (std::uint8_t j = 0; j < 4; ++j) {
                            const auto acc = static_cast<std::uint8_t>(kAcc + 4 * i + j);
                            co_yield PeOp::compute(ComputeClass::MAC, L.mac, acc, acc,
                                                   static_cast<std::uint8_t>(set + i),
                                                   static_cast<std::uint8_t>(set + 4 + j));
                        }
                    }
                }
            }
            for (std::uint8_t i = 0; i < 4; ++i) {
                for (std::uint8_t j = 0; j < 4; ++j) {
                    co_yield PeOp::store(c_row + (std::uint64_t{i} * P + col + j) * word,
                                         static_cast<std::uint8_t>(kAcc + 4 * i + j));
                }
            }
        }
    }
}

Generator<PeOp> elementwise_body(GemmLayout L, Elementwise kind, std::uint64_t other, std::uint16_t alu,
                                 std::uint16_t div, std::uint32_t pe) {
    const std::uint32_t tile = pe / L.ppt;
    const std::uint32_t lane = pe % L.ppt;
    const std::uint32_t word = 4;
    const std::uint32_t P = L.shape.P;
    std::uint64_t index = 0;
    for (std::uint32_t q = 0; q < L.row_blocks(); ++q) {
        if ((std::uint64_t{q} * L.k) % L.tiles != tile - tile % L.k) continue;
        const std::uint64_t row = std::uint64_t{q} * L.chunk_c * word;
        for (std::uint32_t col = 0; col < P; col += 4) {
            if (window_tile(L, q, col) != tile) continue;
            if (index++ % L.ppt != lane) continue;
            // All 16 elements advance stage by stage so long-latency ops overlap.
            auto addr = [&](std::uint32_t e) { return row + (std::uint64_t{e / 4} * P + col + e % 4) * word; };
            auto v = [](std::uint32_t e) { return static_cast<std::uint8_t>(e); };
            auto t = [](std::uint32_t e) { return static_cast<std::uint8_t>(16 + e); };
            for (std::uint32_t e = 0; e < 16; ++e) co_yield PeOp::load(L.c + addr(e), v(e));
            if (kind == Elementwise::ResidualAdd) {
                for (std::uint32_t e = 0; e < 16; ++e) co_yield PeOp::load(other + addr(e), t(e));
                for (std::uint32_t e = 0; e < 16; ++e) {
                    co_yield PeOp::compute(ComputeClass::ALU, alu, t(e), v(e), t(e));
                }
            } else {
                // tanh-form GELU: cubic term, tanh, final scaling.
                for (std::uint32_t e = 0; e < 16; ++e) co_yield PeOp::compute(ComputeClass::ALU, alu, t(e), v(e), v(e));
                for (std::uint32_t e = 0; e < 16; ++e) co_yield PeOp::compute(ComputeClass::ALU, alu, t(e), t(e), v(e));
                for (std::uint32_t e = 0; e < 16; ++e) co_yield PeOp::compute(ComputeClass::ALU, alu, t(e), t(e), v(e));
                for (std::uint32_t e = 0; e < 16; ++e) co_yield PeOp::compute(ComputeClass::ALU, alu, t(e), t(e));
                for (std::uint32_t e = 0; e < 16; ++e) co_yield PeOp::compute(ComputeClass::DIV, div, t(e), t(e));
                for (std::uint32_t e = 0; e < 16; ++e) co_yield PeOp::compute(ComputeClass::ALU, alu, t(e), t(e));
                for (std::uint32_t e = 0; e < 16; ++e) co_yield PeOp::compute(ComputeClass::ALU, alu, t(e), t(e), v(e));
            }
            for (std::uint32_t e = 0; e < 16; ++e) co_yield PeOp::store(L.c + addr(e), t(e));
        }
    }
}

}  // namespace

void emit_elementwise(PlanBuilder& b, const GemmLayout& layout, Elementwise kind, std::uint64_t other) {
    OpCounts e;
    const std::uint64_t n = layout.windows() * 16;
    e.stores = n;
    if (kind == Elementwise::ResidualAdd) {
        e.loads = 2 * n;
        e.alus = n;
    } else {
        e.loads = n;
        e.alus = 6 * n;
        e.divs = n;
    }
    const std::uint16_t alu = b.alu();
    const std::uint16_t div = b.div();
    b.parallel([layout, kind, other, alu, div](std::uint32_t pe) {
        return elementwise_body(layout, kind, other, alu, div, pe);
    }, e);
}

GemmLayout plan_gemm(const ClusterTopology& topo, const GemmShape& shape) {
    if (shape.M == 0 || shape.N == 0 || shape.P == 0 || shape.n == 0) {
        throw ConfigError("gemm: dimensions must be positive");
    }
    if (shape.M % 4 != 0 || shape.P % 4 != 0) {
        throw ConfigError("gemm: M and P must be multiples of 4 (got " + std::to_string(shape.M) + ", " +
                          std::to_string(shape.P) + "); pad the matrices");
    }
    if (topo.word_bytes != 4) throw ConfigError("gemm: kernels assume 4-byte words");
    GemmLayout L;
    L.shape = shape;
    L.tiles = topo.total_tiles();
    L.ppt = topo.pes_per_tile;
    L.bpt = topo.banks_per_tile;

    const std::uint32_t blocks = L.row_blocks();
    if (blocks < L.tiles) {
        // Fewer 4-row blocks than tiles: each block spans k tiles, split by
        // column so that every C window still has a single owning tile.
        std::uint32_t k = static_cast<std::uint32_t>(next_pow2(L.tiles / blocks + 1) / 2);
        while (k > 1 && (shape.P % (k * L.bpt) != 0 || L.tiles % k != 0)) k /= 2;
        L.k = std::max<std::uint32_t>(k, 1);
    }
    const std::uint64_t part = std::uint64_t{L.k} * L.bpt;
    L.chunk_a = chunk_words(4ull * shape.N, part);
    L.chunk_c = chunk_words(4ull * shape.P, part);
    L.req_a = chunked_request(topo, part, L.chunk_a, "gemm A");
    L.req_c = chunked_request(topo, part, L.chunk_c, "gemm C");

    L.chunk_b = std::uint64_t{shape.N} * shape.P;
    L.req_b = MapRequest::interleaved();
    const std::uint64_t group = std::uint64_t{shape.M / 4} * L.k;
    if (shape.n > 1 && group < L.tiles && is_pow2(group) && L.tiles % group == 0) {
        const std::uint64_t gpart = group * L.bpt;
        const std::uint64_t chunk = chunk_words(L.chunk_b, gpart);
        if (log2_exact(chunk) - log2_exact(gpart) <= topo.row_bits()) {
            L.fold_b = true;
            L.chunk_b = chunk;
            L.req_b = chunked_request(topo, gpart, chunk, "gemm B");
        }
    }
    return L;
}

void emit_gemm(PlanBuilder& b, const GemmLayout& layout) {
    GemmLayout L = layout;
    L.mac = b.mac();
    OpCounts e;
    const std::uint64_t w = L.windows();
    e.loads = w * 8 * L.shape.N;
    e.macs = w * 16 * L.shape.N;
    e.stores = w * 16;
    b.parallel([L](std::uint32_t pe) { return gemm_body(L, pe); }, e);
}

}  // namespace detail

KernelPlan gen_gemm(const ClusterTopology& topo, std::uint32_t M, std::uint32_t N, std::uint32_t P,
                    std::uint32_t n_parallel, Scheme scheme, const KernelOptions& opts) {
    topo.validate();
    auto L = detail::plan_gemm(topo, {M, N, P, n_parallel});
    detail::PlanBuilder b(topo, scheme, opts);
    const std::uint32_t word = topo.word_bytes;
    L.a = b.alloc("A", L.bytes_a(word), L.req_a);
    L.b = b.alloc("B", L.bytes_b(word), L.req_b);
    L.c = b.alloc("C", L.bytes_c(word), L.req_c);
    b.barrier("setup", "config");
    detail::emit_gemm(b, L);
    b.barrier("compute", "gemm");
    const std::uint64_t macs = std::uint64_t{M} * N * P * n_parallel;
    return b.finish("gemm", std::to_string(M) + "x" + std::to_string(N) + "x" + std::to_string(P), n_parallel,
                    macs);
}

}  // namespace das
