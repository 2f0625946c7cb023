#include "builder.hpp"

#include "das/errors.hpp"

namespace das {
namespace detail {

std::uint64_t NormLayout::token_addr(std::uint64_t base, std::uint32_t t) const {
    const std::uint32_t pe = t % pes;
    const std::uint64_t round = t / pes;
    return base + ((round * tiles + pe / ppt) * chunk + std::uint64_t{pe % ppt} * E) * 4;
}

namespace {

Generator<PeOp> norm_body(NormLayout L, std::uint32_t pe) {
    for (std::uint32_t t = pe; t < L.tokens; t += L.pes) {
        const std::uint64_t x = L.token_addr(L.x, t);
        const std::uint64_t y = L.token_addr(L.y, t);
        // Pass 1: sum and sum of squares, four partial accumulators each.
        for (std::uint32_t e = 0; e < L.E; ++e) {
            const auto v = static_cast<std::uint8_t>(e & 7);
            const auto lane = static_cast<std::uint8_t>(e & 3);
            co_yield PeOp::load(x + std::uint64_t{e} * 4, v);
            co_yield PeOp::compute(ComputeClass::ALU, L.alu, static_cast<std::uint8_t>(40 + lane),
                                   static_cast<std::uint8_t>(40 + lane), v);
            co_yield PeOp::compute(ComputeClass::MAC, L.mac, static_cast<std::uint8_t>(44 + lane),
                                   static_cast<std::uint8_t>(44 + lane), v, v);
        }
        co_yield PeOp::compute(ComputeClass::DIV, L.div, 48, 40);      // mean
        co_yield PeOp::compute(ComputeClass::DIV, L.div, 49, 44);      // E[x^2]
        co_yield PeOp::compute(ComputeClass::ALU, L.alu, 50, 49, 48);  // variance
        co_yield PeOp::compute(ComputeClass::DIV, L.div, 51, 50);      // 1/sqrt
        // Pass 2: y = gamma * (x - mean) * rstd + beta.
        for (std::uint32_t e = 0; e < L.E; ++e) {
            const auto r = static_cast<std::uint8_t>(4 * (e & 3));
            const std::uint64_t off = std::uint64_t{e} * 4;
            co_yield PeOp::load(L.gamma + off, static_cast<std::uint8_t>(r + 1));
            co_yield PeOp::load(L.beta + off, static_cast<std::uint8_t>(r + 2));
            co_yield PeOp::load(x + off, r);
            co_yield PeOp::compute(ComputeClass::ALU, L.alu, static_cast<std::uint8_t>(16 + (e & 3)), r, 48);
            co_yield PeOp::compute(ComputeClass::ALU, L.alu, static_cast<std::uint8_t>(16 + (e & 3)),
                                   static_cast<std::uint8_t>(16 + (e & 3)), 51);
            co_yield PeOp::compute(ComputeClass::MAC, L.mac, static_cast<std::uint8_t>(20 + (e & 3)),
                                   static_cast<std::uint8_t>(16 + (e & 3)), static_cast<std::uint8_t>(r + 1),
                                   static_cast<std::uint8_t>(r + 2));
            // Store the previous element so the MAC latency is hidden.
            if (e > 0) co_yield PeOp::store(y + off - 4, static_cast<std::uint8_t>(20 + ((e - 1) & 3)));
        }
        co_yield PeOp::store(y + (L.E - 1) * 4ull, static_cast<std::uint8_t>(20 + ((L.E - 1) & 3)));
    }
}

}  // namespace

NormLayout plan_norm(const ClusterTopology& topo, std::uint32_t tokens, std::uint32_t E) {
    if (tokens == 0 || E == 0) throw ConfigError("layernorm: tokens and E must be positive");
    if (topo.word_bytes != 4) throw ConfigError("layernorm: kernels assume 4-byte words");
    NormLayout L;
    L.tokens = tokens;
    L.E = E;
    L.pes = topo.total_pes();
    L.tiles = topo.total_tiles();
    L.ppt = topo.pes_per_tile;
    L.chunk = chunk_words(std::uint64_t{L.ppt} * E, topo.banks_per_tile);
    L.req = chunked_request(topo, topo.banks_per_tile, L.chunk, "layernorm tokens");
    return L;
}

void emit_norm(PlanBuilder& b, const NormLayout& layout) {
    NormLayout L = layout;
    L.mac = b.mac();
    L.alu = b.alu();
    L.div = b.div();
    OpCounts e;
    const std::uint64_t T = L.tokens;
    e.loads = T * 4 * L.E;
    e.stores = T * L.E;
    e.macs = T * 2 * L.E;
    e.alus = T * (3ull * L.E + 1);
    e.divs = T * 3;
    b.parallel([L](std::uint32_t pe) { return norm_body(L, pe); }, e);
}

}  // namespace detail

KernelPlan gen_layernorm(const ClusterTopology& topo, std::uint32_t tokens, std::uint32_t E, Scheme scheme,
                         const KernelOptions& opts) {
    topo.validate();
    auto L = detail::plan_norm(topo, tokens, E);
    detail::PlanBuilder b(topo, scheme, opts);
    const std::uint32_t word = topo.word_bytes;
    L.x = b.alloc("X", L.bytes(word), L.req);
    L.y = b.alloc("Y", L.bytes(word), L.req);
    L.gamma = b.alloc("gamma", std::uint64_t{E} * word, MapRequest::interleaved());
    L.beta = b.alloc("beta", std::uint64_t{E} * word, MapRequest::interleaved());
    b.barrier("setup", "config");
    detail::emit_norm(b, L);
    b.barrier("compute", "layernorm");
    return b.finish("layernorm", std::to_string(tokens) + "x" + std::to_string(E), 1,
                    2ull * tokens * E);
}

}  // namespace das
