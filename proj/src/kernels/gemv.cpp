#include "builder.hpp"

#include "das/errors.hpp"

#include <algorithm>

namespace das {

namespace {

struct GemvLayout {
    std::uint32_t M = 0;
    std::uint32_t N = 0;
    std::uint32_t rows_per_pe = 0;
    std::uint32_t active = 0;
    std::uint32_t rows_per_tile = 0;
    std::uint64_t chunk_a = 0;
    std::uint64_t chunk_c = 0;
    std::uint64_t a = 0, b = 0, c = 0;
    std::uint64_t b_stride = 1;  // words between consecutive b elements
    std::uint32_t word = 4;
    std::uint16_t mac = 4;

    std::uint64_t a_addr(std::uint64_t g, std::uint64_t k) const {
        return a + ((g / rows_per_tile) * chunk_a + (g % rows_per_tile) * N + k) * word;
    }
    std::uint64_t b_addr(std::uint64_t problem, std::uint64_t k) const { return b + (problem * N + k) * b_stride * word; }
    std::uint64_t c_addr(std::uint64_t g) const {
        return c + ((g / rows_per_tile) * chunk_c + g % rows_per_tile) * word;
    }
};

// Rows are processed in groups of up to kGroupRows; within a group the
// outer loop walks the reduction index and the inner loop the 4-row blocks,
// so each b element is loaded once per group. Loads for column k are issued
// before the MACs of column k-1 (two register sets). Each PE starts at a
// different column to spread b over its banks.
constexpr std::uint32_t kGroupRows = 16;
constexpr std::uint8_t kSet = kGroupRows + 1;
constexpr std::uint8_t kGemvAcc = 40;

unsigned log2_floor(std::uint64_t v) { return 63u - static_cast<unsigned>(__builtin_clzll(v)); }

std::uint64_t group_end(const GemvLayout& L, std::uint64_t g0, std::uint64_t end) {
    const std::uint64_t problem_end = (g0 / L.M + 1) * L.M;
    return std::min({end, g0 + kGroupRows, problem_end});
}

Generator<PeOp> gemv_body(GemvLayout L, std::uint32_t pe) {
    if (pe >= L.active) co_return;
    const std::uint64_t first = std::uint64_t{pe} * L.rows_per_pe;
    const std::uint64_t end = first + L.rows_per_pe;
    for (std::uint64_t g0 = first; g0 < end;) {
        const std::uint64_t g1 = group_end(L, g0, end);
        const auto rows = static_cast<std::uint8_t>(g1 - g0);
        const std::uint64_t problem = g0 / L.M;
        for (std::uint32_t kk = 0; kk <= L.N; ++kk) {
            if (kk < L.N) {
                const std::uint32_t k = (kk + pe) % L.N;
                const auto set = static_cast<std::uint8_t>(kSet * (kk & 1));
                co_yield PeOp::load(L.b_addr(problem, k), set);
                for (std::uint8_t i = 0; i < rows; ++i) {
                    co_yield PeOp::load(L.a_addr(g0 + i, k), static_cast<std::uint8_t>(set + 1 + i));
                }
            }
            if (kk > 0) {
                const auto set = static_cast<std::uint8_t>(kSet * ((kk - 1) & 1));
                for (std::uint8_t i = 0; i < rows; ++i) {
                    const auto acc = static_cast<std::uint8_t>(kGemvAcc + i);
                    co_yield PeOp::compute(ComputeClass::MAC, L.mac, acc, acc, static_cast<std::uint8_t>(set + 1 + i),
                                           set);
                }
            }
        }
        for (std::uint8_t i = 0; i < rows; ++i) {
            co_yield PeOp::store(L.c_addr(g0 + i), static_cast<std::uint8_t>(kGemvAcc + i));
        }
        g0 = g1;
    }
}

}  // namespace

KernelPlan gen_gemv(const ClusterTopology& topo, std::uint32_t M, std::uint32_t N, std::uint32_t n_parallel,
                    Scheme scheme, const KernelOptions& opts) {
    topo.validate();
    if (M == 0 || N == 0 || n_parallel == 0) throw ConfigError("gemv: dimensions must be positive");
    if (M % 4 != 0) throw ConfigError("gemv: M = " + std::to_string(M) + " must be a multiple of 4 (pad M)");
    const std::uint64_t rows = std::uint64_t{M} * n_parallel;
    const std::uint32_t pes = topo.total_pes();

    GemvLayout L;
    L.M = M;
    L.N = N;
    L.word = topo.word_bytes;
    L.mac = opts.lat.mac;
    if (rows % (4ull * pes) == 0) {
        L.rows_per_pe = static_cast<std::uint32_t>(rows / pes);
        L.active = pes;
    } else if (rows < 4ull * pes) {
        L.rows_per_pe = 4;
        L.active = static_cast<std::uint32_t>(rows / 4);
    } else {
        throw ConfigError("gemv: M*n_parallel = " + std::to_string(rows) + " must be a multiple of " +
                          std::to_string(4 * pes) + " or below it; adjust M or n_parallel");
    }
    L.rows_per_tile = L.rows_per_pe * topo.pes_per_tile;
    const std::uint64_t active_tiles = (L.active + topo.pes_per_tile - 1) / topo.pes_per_tile;
    L.chunk_a = detail::chunk_words(std::uint64_t{L.rows_per_tile} * N, topo.banks_per_tile);
    L.chunk_c = detail::chunk_words(L.rows_per_tile, topo.banks_per_tile);

    detail::PlanBuilder b(topo, scheme, opts);
    const auto req_a = detail::chunked_request(topo, topo.banks_per_tile, L.chunk_a, "gemv A");
    const auto req_c = detail::chunked_request(topo, topo.banks_per_tile, L.chunk_c, "gemv c");
    L.a = b.alloc("A", active_tiles * L.chunk_a * L.word, req_a);
    // b is read by every PE of its problem. Spreading its elements over the
    // whole cluster keeps any one tile's banks from becoming the hotspot.
    const std::uint64_t b_words = std::uint64_t{n_parallel} * N;
    if (b_words < topo.total_banks()) {
        L.b_stride = std::min<std::uint64_t>(topo.banks_per_tile, std::uint64_t{1} << log2_floor(topo.total_banks() / b_words));
    }
    L.b = b.alloc("b", b_words * L.b_stride * L.word, MapRequest::interleaved());
    L.c = b.alloc("c", active_tiles * L.chunk_c * L.word, req_c);
    b.barrier("setup", "config");

    OpCounts e;
    e.macs = rows * N;
    std::uint64_t groups = 0;
    for (std::uint32_t pe = 0; pe < L.active; ++pe) {
        const std::uint64_t first = std::uint64_t{pe} * L.rows_per_pe;
        for (std::uint64_t g0 = first; g0 < first + L.rows_per_pe; g0 = group_end(L, g0, first + L.rows_per_pe)) ++groups;
    }
    e.loads = rows * N + groups * N;
    e.stores = rows;
    b.parallel([L](std::uint32_t pe) { return gemv_body(L, pe); }, e);
    b.barrier("compute", "gemv");

    return b.finish("gemv", std::to_string(N) + "x" + std::to_string(M), n_parallel, rows * N);
}

}  // namespace das
