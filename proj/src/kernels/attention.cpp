#include "builder.hpp"

#include "das/errors.hpp"

#include <stdexcept>

namespace das {
namespace detail {

namespace {

constexpr std::uint64_t kWord = 4;

struct AttnAddr {
    AttnLayout L;

    std::uint64_t q(std::uint32_t tile, std::uint32_t row, std::uint32_t d) const {
        return L.q + (tile * L.chunk_q + std::uint64_t{row} * L.P + d) * kWord;
    }
    std::uint64_t o(std::uint32_t tile, std::uint32_t row, std::uint32_t d) const {
        return L.o + (tile * L.chunk_q + std::uint64_t{row} * L.P + d) * kWord;
    }
    std::uint64_t a(std::uint32_t tile, std::uint32_t row, std::uint32_t c) const {
        return L.a + (tile * L.chunk_a + std::uint64_t{row} * L.tile_s + c) * kWord;
    }
    // which: 0 = running max, 1 = running sum, 2 = rescale factor
    std::uint64_t stat(std::uint32_t tile, std::uint32_t which, std::uint32_t row) const {
        return L.stats + (tile * L.chunk_stats + std::uint64_t{which} * L.rows + row) * kWord;
    }
    std::uint64_t kv(std::uint64_t buf, std::uint32_t head, std::uint32_t c, std::uint32_t d) const {
        return buf + (head * L.chunk_kv + std::uint64_t{c} * L.P + d) * kWord;
    }
};

// S' = Q_j K_k^T over 4x4 windows of the tile's score block.
Generator<PeOp> qk_body(AttnLayout L, std::uint64_t kbuf, std::uint32_t pe) {
    const AttnAddr at{L};
    const std::uint32_t tile = pe / L.ppt;
    const std::uint32_t lane = pe % L.ppt;
    const std::uint32_t head = tile / L.group_tiles;
    std::uint64_t index = 0;
    for (std::uint32_t r0 = 0; r0 < L.rows; r0 += 4) {
        for (std::uint32_t c0 = 0; c0 < L.tile_s; c0 += 4) {
            if (index++ % L.ppt != lane) continue;
            for (std::uint32_t d = 0; d <= L.P; ++d) {
                if (d < L.P) {
                    const auto set = static_cast<std::uint8_t>(8 * (d & 1));
                    for (std::uint8_t i = 0; i < 4; ++i) {
                        co_yield PeOp::load(at.q(tile, r0 + i, d), static_cast<std::uint8_t>(set + i));
                    }
                    for (std::uint8_t j = 0; j < 4; ++j) {
                        co_yield PeOp::load(at.kv(kbuf, head, c0 + j, d), static_cast<std::uint8_t>(set + 4 + j));
                    }
                }
                if (d > 0) {
                    const auto set = static_cast<std::uint8_t>(8 * ((d - 1) & 1));
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
                    co_yield PeOp::store(at.a(tile, r0 + i, c0 + j), static_cast<std::uint8_t>(kAcc + 4 * i + j));
                }
            }
        }
    }
}

// Online softmax over one score block: block max, exp and sum, then the
// running statistics update.
Generator<PeOp> softmax_body(AttnLayout L, std::uint32_t pe) {
    const AttnAddr at{L};
    const std::uint32_t tile = pe / L.ppt;
    const std::uint32_t lane = pe % L.ppt;
    const std::uint32_t n = L.tile_s;
    for (std::uint32_t r = lane; r < L.rows; r += L.ppt) {
        for (std::uint32_t c = 0; c < n; ++c) {
            const auto v = static_cast<std::uint8_t>(c & 7);
            const auto m = static_cast<std::uint8_t>(40 + (c & 3));
            co_yield PeOp::load(at.a(tile, r, c), v);
            co_yield PeOp::compute(ComputeClass::ALU, L.alu, m, m, v);
        }
        co_yield PeOp::compute(ComputeClass::ALU, L.alu, 40, 40, 41);
        co_yield PeOp::compute(ComputeClass::ALU, L.alu, 42, 42, 43);
        co_yield PeOp::compute(ComputeClass::ALU, L.alu, 40, 40, 42);
        co_yield PeOp::load(at.stat(tile, 0, r), 52);
        co_yield PeOp::compute(ComputeClass::ALU, L.alu, 53, 40, 52);  // new max

        // exp(x - max): the sum and the store trail by three elements so the
        // exp latency overlaps the next elements.
        constexpr std::uint32_t lag = 3;
        for (std::uint32_t c = 0; c < n + lag; ++c) {
            if (c < n) {
                const auto v = static_cast<std::uint8_t>(c & 7);
                const auto t = static_cast<std::uint8_t>(16 + (c & 3));
                const auto e = static_cast<std::uint8_t>(20 + (c & 3));
                co_yield PeOp::load(at.a(tile, r, c), v);
                co_yield PeOp::compute(ComputeClass::ALU, L.alu, t, v, 53);
                co_yield PeOp::compute(ComputeClass::DIV, L.div, e, t);
            }
            if (c >= lag) {
                const std::uint32_t p = c - lag;
                const auto e = static_cast<std::uint8_t>(20 + (p & 3));
                const auto s = static_cast<std::uint8_t>(44 + (p & 3));
                co_yield PeOp::compute(ComputeClass::ALU, L.alu, s, s, e);
                co_yield PeOp::store(at.a(tile, r, p), e);
            }
        }
        co_yield PeOp::compute(ComputeClass::ALU, L.alu, 44, 44, 45);
        co_yield PeOp::compute(ComputeClass::ALU, L.alu, 46, 46, 47);
        co_yield PeOp::compute(ComputeClass::ALU, L.alu, 44, 44, 46);

        co_yield PeOp::load(at.stat(tile, 1, r), 54);
        co_yield PeOp::compute(ComputeClass::ALU, L.alu, 55, 52, 53);  // old max - new max
        co_yield PeOp::compute(ComputeClass::DIV, L.div, 56, 55);      // alpha = exp(.)
        co_yield PeOp::compute(ComputeClass::ALU, L.alu, 57, 56, 54);  // alpha * l
        co_yield PeOp::compute(ComputeClass::ALU, L.alu, 58, 57, 44);  // + block sum
        co_yield PeOp::store(at.stat(tile, 0, r), 53);
        co_yield PeOp::store(at.stat(tile, 1, r), 58);
        co_yield PeOp::store(at.stat(tile, 2, r), 56);
    }
}

// O_j = alpha * O_j + A_jk V_k over 4x4 windows of O.
Generator<PeOp> av_body(AttnLayout L, std::uint64_t vbuf, std::uint32_t pe) {
    const AttnAddr at{L};
    const std::uint32_t tile = pe / L.ppt;
    const std::uint32_t lane = pe % L.ppt;
    const std::uint32_t head = tile / L.group_tiles;
    std::uint64_t index = 0;
    for (std::uint32_t r0 = 0; r0 < L.rows; r0 += 4) {
        for (std::uint32_t d0 = 0; d0 < L.P; d0 += 4) {
            if (index++ % L.ppt != lane) continue;
            for (std::uint8_t i = 0; i < 4; ++i) {
                co_yield PeOp::load(at.stat(tile, 2, r0 + i), static_cast<std::uint8_t>(48 + i));
            }
            for (std::uint8_t i = 0; i < 4; ++i) {
                for (std::uint8_t j = 0; j < 4; ++j) {
                    co_yield PeOp::load(at.o(tile, r0 + i, d0 + j), static_cast<std::uint8_t>(kAcc + 4 * i + j));
                }
            }
            for (std::uint8_t i = 0; i < 4; ++i) {
                for (std::uint8_t j = 0; j < 4; ++j) {
                    const auto acc = static_cast<std::uint8_t>(kAcc + 4 * i + j);
                    co_yield PeOp::compute(ComputeClass::ALU, L.alu, acc, acc, static_cast<std::uint8_t>(48 + i));
                }
            }
            for (std::uint32_t c = 0; c <= L.tile_s; ++c) {
                if (c < L.tile_s) {
                    const auto set = static_cast<std::uint8_t>(8 * (c & 1));
                    for (std::uint8_t i = 0; i < 4; ++i) {
                        co_yield PeOp::load(at.a(tile, r0 + i, c), static_cast<std::uint8_t>(set + i));
                    }
                    for (std::uint8_t j = 0; j < 4; ++j) {
                        co_yield PeOp::load(at.kv(vbuf, head, c, d0 + j), static_cast<std::uint8_t>(set + 4 + j));
                    }
                }
                if (c > 0) {
                    const auto set = static_cast<std::uint8_t>(8 * ((c - 1) & 1));
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
                    co_yield PeOp::store(at.o(tile, r0 + i, d0 + j), static_cast<std::uint8_t>(kAcc + 4 * i + j));
                }
            }
        }
    }
}

// O_j /= l, row by row.
Generator<PeOp> normalize_body(AttnLayout L, std::uint32_t pe) {
    const AttnAddr at{L};
    const std::uint32_t tile = pe / L.ppt;
    const std::uint32_t lane = pe % L.ppt;
    for (std::uint32_t r = lane; r < L.rows; r += L.ppt) {
        co_yield PeOp::load(at.stat(tile, 1, r), 54);
        co_yield PeOp::compute(ComputeClass::DIV, L.div, 59, 54);
        for (std::uint32_t d = 0; d < L.P; ++d) {
            const auto v = static_cast<std::uint8_t>(d & 7);
            const auto y = static_cast<std::uint8_t>(16 + (d & 3));
            co_yield PeOp::load(at.o(tile, r, d), v);
            co_yield PeOp::compute(ComputeClass::ALU, L.alu, y, v, 59);
            co_yield PeOp::store(at.o(tile, r, d), y);
        }
    }
}

}  // namespace

AttnLayout plan_attention(const ClusterTopology& topo, std::uint32_t S, std::uint32_t P, std::uint32_t tile_s,
                          std::uint32_t heads) {
    if (S == 0 || P == 0 || tile_s == 0 || heads == 0) throw ConfigError("attention: dimensions must be positive");
    if (topo.word_bytes != 4) throw ConfigError("attention: kernels assume 4-byte words");
    if (S % tile_s != 0) {
        throw ConfigError("attention: S = " + std::to_string(S) + " is not a multiple of tile_s = " +
                          std::to_string(tile_s));
    }
    if (tile_s % 4 != 0 || P % 4 != 0) throw ConfigError("attention: tile_s and head_dim must be multiples of 4");
    AttnLayout L;
    L.S = S;
    L.P = P;
    L.tile_s = tile_s;
    L.heads = heads;
    L.tiles = topo.total_tiles();
    L.ppt = topo.pes_per_tile;
    if (!is_pow2(heads) || L.tiles % heads != 0) {
        throw ConfigError("attention: n_heads = " + std::to_string(heads) + " must be a power of two dividing " +
                          std::to_string(L.tiles) + " tiles");
    }
    L.group_tiles = L.tiles / heads;
    if (S % L.group_tiles != 0 || (S / L.group_tiles) % 4 != 0) {
        throw ConfigError("attention: S = " + std::to_string(S) + " does not give 4-row blocks over " +
                          std::to_string(L.group_tiles) + " tiles per head; raise n_heads or pad S to a multiple of " +
                          std::to_string(4 * L.group_tiles));
    }
    L.rows = S / L.group_tiles;
    const std::uint64_t bpt = topo.banks_per_tile;
    L.chunk_q = chunk_words(std::uint64_t{L.rows} * P, bpt);
    L.chunk_a = chunk_words(std::uint64_t{L.rows} * tile_s, bpt);
    L.chunk_stats = chunk_words(3ull * L.rows, bpt);
    L.req_tile = chunked_request(topo, bpt, L.chunk_q, "attention Q/O");
    L.req_a = chunked_request(topo, bpt, L.chunk_a, "attention scores");
    L.req_stats = chunked_request(topo, bpt, L.chunk_stats, "attention statistics");
    L.chunk_kv = std::uint64_t{tile_s} * P;
    L.req_kv = MapRequest::interleaved();
    if (heads > 1) {
        const std::uint64_t gpart = std::uint64_t{L.group_tiles} * bpt;
        L.chunk_kv = chunk_words(L.chunk_kv, gpart);
        L.req_kv = chunked_request(topo, gpart, L.chunk_kv, "attention K/V block");
        L.fold_kv = true;
    }
    return L;
}

void emit_attention(PlanBuilder& b, AttnLayout L, const std::string& stage) {
    L.mac = b.mac();
    L.alu = b.alu();
    L.div = b.div();
    const std::uint32_t word = b.topo().word_bytes;
    const std::uint32_t iters = L.iterations();
    const std::uint64_t rows_total = std::uint64_t{L.heads} * L.S;
    const std::uint64_t row_blocks = rows_total / 4;

    L.q = b.alloc("Q", L.bytes_q(word), L.req_tile);
    L.o = b.alloc("O", L.bytes_q(word), L.req_tile);
    L.a = b.alloc("A", L.bytes_a(word), L.req_a);
    L.stats = b.alloc("stats", L.bytes_stats(word), L.req_stats);
    std::uint64_t buf[2] = {b.alloc("K0", L.bytes_kv(word), L.req_kv), 0};
    const std::uint64_t q_id = b.dma("Q", {L.q, L.q + L.bytes_q(word)}, DmaDirection::ToL1);
    std::uint64_t k_id = b.dma("K0", {buf[0], buf[0] + L.bytes_kv(word)}, DmaDirection::ToL1);
    b.wait_all(q_id);

    OpCounts qk;
    const std::uint64_t qk_windows = row_blocks * (L.tile_s / 4);
    qk.loads = qk_windows * 8 * L.P;
    qk.macs = qk_windows * 16 * L.P;
    qk.stores = qk_windows * 16;

    OpCounts sm;
    sm.loads = rows_total * (2ull * L.tile_s + 2);
    sm.alus = rows_total * (3ull * L.tile_s + 10);
    sm.divs = rows_total * (L.tile_s + 1ull);
    sm.stores = rows_total * (L.tile_s + 3ull);

    OpCounts av;
    const std::uint64_t av_windows = row_blocks * (L.P / 4);
    av.loads = av_windows * (20 + 8ull * L.tile_s);
    av.alus = av_windows * 16;
    av.macs = av_windows * 16 * L.tile_s;
    av.stores = av_windows * 16;

    for (std::uint32_t k = 0; k < iters; ++k) {
        const std::uint64_t cur = buf[k % 2];
        std::uint64_t next_k_id = 0;
        if (k + 1 < iters) {
            if (k >= 1) b.release(buf[(k + 1) % 2]);
            const std::string name = "K" + std::to_string(k + 1);
            buf[(k + 1) % 2] = b.alloc(name, L.bytes_kv(word), L.req_kv);
            next_k_id = b.dma(name, {buf[(k + 1) % 2], buf[(k + 1) % 2] + L.bytes_kv(word)}, DmaDirection::ToL1);
        }
        b.wait_all(k_id);
        b.parallel([L, cur](std::uint32_t pe) { return qk_body(L, cur, pe); }, qk);
        b.barrier("qk", stage);

        // K_k is dead: V_k takes over its bytes while the softmax runs.
        b.release(cur);
        const std::string vname = "V" + std::to_string(k);
        const std::uint64_t v = b.alloc(vname, L.bytes_kv(word), L.req_kv);
        if (v != cur) throw std::logic_error("attention: V block did not reuse the K block's memory");
        const std::uint64_t v_id = b.dma(vname, {v, v + L.bytes_kv(word)}, DmaDirection::ToL1);
        b.parallel([L](std::uint32_t pe) { return softmax_body(L, pe); }, sm);
        b.barrier("softmax", stage);

        b.wait_all(v_id);
        b.parallel([L, v](std::uint32_t pe) { return av_body(L, v, pe); }, av);
        b.barrier("av", stage);
        k_id = next_k_id;
    }

    OpCounts nm;
    nm.loads = rows_total * (1ull + L.P);
    nm.divs = rows_total;
    nm.alus = rows_total * L.P;
    nm.stores = rows_total * L.P;
    b.parallel([L](std::uint32_t pe) { return normalize_body(L, pe); }, nm);
    b.barrier("normalize", stage);

    const std::uint64_t o_id = b.dma("O", {L.o, L.o + L.bytes_q(word)}, DmaDirection::FromL1);
    b.wait_all(o_id);
    b.release(buf[(iters - 1) % 2]);
    if (iters > 1) b.release(buf[iters % 2]);
    b.release(L.stats);
    b.release(L.a);
    b.release(L.o);
    b.release(L.q);
    b.barrier("writeback", stage);
}

}  // namespace detail

KernelPlan gen_flash_attention(const ClusterTopology& topo, std::uint32_t S, std::uint32_t head_dim,
                               std::uint32_t tile_s, std::uint32_t n_heads, Scheme scheme,
                               const KernelOptions& opts) {
    topo.validate();
    const auto L = detail::plan_attention(topo, S, head_dim, tile_s, n_heads);
    detail::PlanBuilder b(topo, scheme, opts);
    detail::emit_attention(b, L, "attention");
    const std::uint64_t macs = 2ull * S * S * head_dim * n_heads;
    return b.finish("attention", std::to_string(S) + "x" + std::to_string(head_dim), n_heads, macs);
}

}  // namespace das
