#include "builder.hpp"

#include "das/errors.hpp"

namespace das {

std::uint32_t VitConfig::padded_tokens() const { return static_cast<std::uint32_t>(next_pow2(tokens())); }

void VitConfig::validate() const {
    if (image == 0 || patch == 0 || embed == 0 || head_dim == 0 || mlp_ratio == 0 || tile_s == 0) {
        throw ConfigError("vit: all dimensions must be positive");
    }
    if (image % patch != 0) throw ConfigError("vit: image size must be a multiple of the patch size");
    if (embed % head_dim != 0) throw ConfigError("vit: embed must be a multiple of head_dim");
}

std::uint64_t vit_layer_macs(const VitConfig& cfg) {
    const std::uint64_t S = cfg.padded_tokens();
    const std::uint64_t E = cfg.embed;
    const std::uint64_t hidden = E * cfg.mlp_ratio;
    const std::uint64_t qkv = 3 * S * E * E;
    const std::uint64_t sa = 2 * S * S * E;  // 2 S^2 P per head, heads * P = E
    const std::uint64_t op = S * E * E;
    const std::uint64_t ff = 2 * S * E * hidden;
    const std::uint64_t norm = 2 * 2 * std::uint64_t{cfg.tokens()} * E;
    return qkv + sa + op + ff + norm;
}

namespace {

using detail::PlanBuilder;

std::uint64_t in(PlanBuilder& b, const std::string& name, std::uint64_t addr, std::uint64_t bytes) {
    return b.dma(name, {addr, addr + bytes}, DmaDirection::ToL1);
}

std::uint64_t out(PlanBuilder& b, const std::string& name, std::uint64_t addr, std::uint64_t bytes) {
    return b.dma(name, {addr, addr + bytes}, DmaDirection::FromL1);
}

void norm_stage(PlanBuilder& b, const VitConfig& cfg, const std::string& tag) {
    const std::uint32_t word = b.topo().word_bytes;
    auto L = detail::plan_norm(b.topo(), cfg.tokens(), cfg.embed);
    const std::uint64_t bytes = L.bytes(word);
    const std::uint64_t vec = std::uint64_t{cfg.embed} * word;
    L.x = b.alloc(tag + ".x", bytes, L.req);
    L.y = b.alloc(tag + ".y", bytes, L.req);
    L.gamma = b.alloc(tag + ".gamma", vec, MapRequest::interleaved());
    L.beta = b.alloc(tag + ".beta", vec, MapRequest::interleaved());
    const auto x_id = in(b, tag + ".x", L.x, bytes);
    const auto g_id = in(b, tag + ".gamma", L.gamma, vec);
    const auto b_id = in(b, tag + ".beta", L.beta, vec);
    b.wait_all(x_id);
    b.wait_all(g_id);
    b.wait_all(b_id);
    detail::emit_norm(b, L);
    b.barrier(tag, "Norm");
    b.wait_all(out(b, tag + ".y", L.y, bytes));
    b.release(L.beta);
    b.release(L.gamma);
    b.release(L.y);
    b.release(L.x);
}

// Q, K and V projections share the normalized input; weights are
// double-buffered so the next projection's weights stream in while the
// current one computes.
void qkv_stage(PlanBuilder& b, const VitConfig& cfg) {
    const std::uint32_t word = b.topo().word_bytes;
    const std::uint32_t S = cfg.padded_tokens();
    auto L = detail::plan_gemm(b.topo(), {S, cfg.embed, cfg.embed, 1});
    L.a = b.alloc("qkv.x", L.bytes_a(word), L.req_a);
    const auto a_id = in(b, "qkv.x", L.a, L.bytes_a(word));
    const char* names[3] = {"wq", "wk", "wv"};
    std::uint64_t w[2] = {b.alloc(names[0], L.bytes_b(word), L.req_b), 0};
    std::uint64_t w_id[3] = {in(b, names[0], w[0], L.bytes_b(word)), 0, 0};
    std::uint64_t c[2] = {b.alloc("qkv.c0", L.bytes_c(word), L.req_c), b.alloc("qkv.c1", L.bytes_c(word), L.req_c)};
    std::uint64_t c_out[3] = {0, 0, 0};
    b.wait_all(a_id);
    for (int i = 0; i < 3; ++i) {
        if (i + 1 < 3) {
            if (i >= 1) b.release(w[(i + 1) % 2]);
            w[(i + 1) % 2] = b.alloc(names[i + 1], L.bytes_b(word), L.req_b);
            w_id[i + 1] = in(b, names[i + 1], w[(i + 1) % 2], L.bytes_b(word));
        }
        if (i >= 2) b.wait_all(c_out[i - 2]);  // C buffer is about to be reused
        b.wait_all(w_id[i]);
        L.b = w[i % 2];
        L.c = c[i % 2];
        detail::emit_gemm(b, L);
        b.barrier(std::string("qkv.") + "qkv"[i], "QKV");
        c_out[i] = out(b, std::string("qkv.") + "qkv"[i], L.c, L.bytes_c(word));
    }
    b.wait_all(c_out[1]);
    b.wait_all(c_out[2]);
    b.release(w[0]);
    b.release(w[1]);
    b.release(c[0]);
    b.release(c[1]);
    b.release(L.a);
}

// Output projection or a feed-forward matrix product followed by the
// residual add, result written back to L2.
void projection_with_residual(PlanBuilder& b, const detail::GemmLayout& layout, const std::string& tag,
                              const std::string& stage) {
    const std::uint32_t word = b.topo().word_bytes;
    auto L = layout;
    L.c = b.alloc(tag + ".out", L.bytes_c(word), L.req_c);
    const std::uint64_t res = b.alloc(tag + ".residual", L.bytes_c(word), L.req_c);
    const auto r_id = in(b, tag + ".residual", res, L.bytes_c(word));
    detail::emit_gemm(b, L);
    b.barrier(tag, stage);
    b.wait_all(r_id);
    detail::emit_elementwise(b, L, detail::Elementwise::ResidualAdd, res);
    b.barrier(tag + ".residual", stage);
    b.wait_all(out(b, tag + ".out", L.c, L.bytes_c(word)));
    b.release(res);
    b.release(L.c);
}

void op_stage(PlanBuilder& b, const VitConfig& cfg) {
    const std::uint32_t word = b.topo().word_bytes;
    auto L = detail::plan_gemm(b.topo(), {cfg.padded_tokens(), cfg.embed, cfg.embed, 1});
    L.a = b.alloc("op.attn", L.bytes_a(word), L.req_a);
    L.b = b.alloc("wo", L.bytes_b(word), L.req_b);
    const auto a_id = in(b, "op.attn", L.a, L.bytes_a(word));
    const auto b_id = in(b, "wo", L.b, L.bytes_b(word));
    b.wait_all(a_id);
    b.wait_all(b_id);
    projection_with_residual(b, L, "op", "OP");
    b.release(L.b);
    b.release(L.a);
}

void ff_stage(PlanBuilder& b, const VitConfig& cfg) {
    const std::uint32_t word = b.topo().word_bytes;
    const std::uint32_t S = cfg.padded_tokens();
    const std::uint32_t hidden = cfg.embed * cfg.mlp_ratio;
    auto up = detail::plan_gemm(b.topo(), {S, cfg.embed, hidden, 1});
    auto down = detail::plan_gemm(b.topo(), {S, hidden, cfg.embed, 1});

    up.a = b.alloc("ff.x", up.bytes_a(word), up.req_a);
    up.b = b.alloc("w_up", up.bytes_b(word), up.req_b);
    up.c = b.alloc("ff.h", up.bytes_c(word), up.req_c);
    const auto a_id = in(b, "ff.x", up.a, up.bytes_a(word));
    const auto w_id = in(b, "w_up", up.b, up.bytes_b(word));
    down.b = b.alloc("w_down", down.bytes_b(word), down.req_b);
    const auto d_id = in(b, "w_down", down.b, down.bytes_b(word));  // prefetched during the up projection
    b.wait_all(a_id);
    b.wait_all(w_id);
    detail::emit_gemm(b, up);
    b.barrier("ff.up", "FF");
    detail::emit_elementwise(b, up, detail::Elementwise::Gelu);
    b.barrier("ff.gelu", "FF");
    b.release(up.b);
    b.release(up.a);

    // The hidden activations already sit in the down projection's A layout
    // when both products fold 4-row blocks over the same tile groups.
    const bool shared = down.k == up.k && down.chunk_a == up.chunk_c && down.req_a == up.req_c;
    std::uint64_t copy = 0;
    if (shared) {
        down.a = up.c;
    } else {
        b.wait_all(out(b, "ff.h", up.c, up.bytes_c(word)));
        b.release(up.c);
        down.a = copy = b.alloc("ff.h2", down.bytes_a(word), down.req_a);
        b.wait_all(in(b, "ff.h2", down.a, down.bytes_a(word)));
    }
    b.wait_all(d_id);
    projection_with_residual(b, down, "ff.down", "FF");
    b.release(down.b);
    b.release(shared ? up.c : copy);
}

}  // namespace

KernelPlan gen_vit_encoder(const ClusterTopology& topo, const VitConfig& cfg, Scheme scheme,
                           const KernelOptions& opts) {
    topo.validate();
    cfg.validate();
    const auto attn = detail::plan_attention(topo, cfg.padded_tokens(), cfg.head_dim,
                                             std::min(cfg.tile_s, cfg.padded_tokens()), cfg.heads());
    PlanBuilder b(topo, scheme, opts);
    norm_stage(b, cfg, "norm1");
    qkv_stage(b, cfg);
    detail::emit_attention(b, attn, "SA");
    op_stage(b, cfg);
    norm_stage(b, cfg, "norm2");
    ff_stage(b, cfg);
    return b.finish("vit", cfg.name + " S=" + std::to_string(cfg.tokens()) + " E=" + std::to_string(cfg.embed), 1,
                    vit_layer_macs(cfg));
}

}  // namespace das
