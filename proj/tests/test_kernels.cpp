#include "das/errors.hpp"
#include "das/kernels.hpp"

#include <gtest/gtest.h>

#include <algorithm>

namespace das {
namespace {

std::uint64_t count_named(const KernelPlan& plan, const std::string& name) {
    return static_cast<std::uint64_t>(std::count_if(plan.workload.phases.begin(), plan.workload.phases.end(),
                                                    [&](const PhaseInfo& p) { return p.name == name; }));
}

const PlanOperand& operand(const KernelPlan& plan, const std::string& name) {
    for (const auto& o : plan.operands) {
        if (o.name == name) return o;
    }
    throw std::out_of_range("no operand " + name);
}

// Analytic MAC counts at full scale; plans are lazy, so building them is cheap.
TEST(Kernels, MacCounts) {
    const auto t = terapool_default();
    EXPECT_EQ(gen_gemv(t, 512, 64, 16, Scheme::Das).macs, 524288u);
    EXPECT_EQ(gen_gemm(t, 256, 1024, 256, 1, Scheme::Das).macs, 67108864u);
    EXPECT_EQ(gen_gemm(t, 64, 64, 64, 32, Scheme::Das).macs, 8388608u);
    EXPECT_EQ(gen_flash_attention(t, 1024, 64, 128, 1, Scheme::Das).macs, 134217728u);
    EXPECT_EQ(gen_gemv(t, 512, 64, 16, Scheme::Das).expected().macs, 524288u);
    EXPECT_EQ(gen_gemm(t, 256, 1024, 256, 1, Scheme::Interleaved).expected().macs, 67108864u);
}

TEST(Kernels, GeneratedStreamsMatchClosedForm) {
    const auto t = desk_default();
    for (auto scheme : {Scheme::Das, Scheme::Interleaved}) {
        const KernelPlan plans[] = {
            gen_gemv(t, 256, 32, 1, scheme),
            gen_gemv(t, 512, 64, 2, scheme),
            gen_gemm(t, 64, 64, 64, 2, scheme),
            gen_gemm(t, 128, 128, 128, 1, scheme),
            gen_flash_attention(t, 128, 32, 32, 1, scheme),
            gen_layernorm(t, 64, 64, scheme),
            gen_compute(t, 16, scheme),
        };
        for (const auto& plan : plans) {
            EXPECT_EQ(count_ops(plan), plan.expected()) << plan.kernel << " " << plan.dims;
        }
    }
}

// Both schemes issue the same instruction sequence; only addresses differ.
TEST(Kernels, SchemeSymmetry) {
    const auto t = desk_default();
    const auto das = gen_gemm(t, 128, 128, 128, 1, Scheme::Das);
    const auto il = gen_gemm(t, 128, 128, 128, 1, Scheme::Interleaved);
    EXPECT_EQ(das.expected(), il.expected());
    EXPECT_EQ(das.macs, il.macs);
    EXPECT_EQ(das.workload.phases.size(), il.workload.phases.size());
    for (std::uint32_t pe : {0u, 1u, 17u, 63u}) {
        const auto a = trace(das, pe);
        const auto b = trace(il, pe);
        ASSERT_EQ(a.size(), b.size()) << "PE " << pe;
        for (std::size_t i = 0; i < a.size(); ++i) {
            ASSERT_EQ(a[i].kind, b[i].kind) << "PE " << pe << " op " << i;
            ASSERT_EQ(a[i].dst, b[i].dst);
            ASSERT_EQ(a[i].src, b[i].src);
            if (a[i].kind != OpKind::Load && a[i].kind != OpKind::Store) {
                ASSERT_EQ(a[i].arg, b[i].arg);
            }
        }
    }
}

TEST(Kernels, AttentionIterations) {
    const auto t = desk_default();
    const auto plan = gen_flash_attention(t, 256, 32, 32, 1, Scheme::Das);
    // S / tile_s = 8 iterations of QK, softmax and AV.
    EXPECT_EQ(count_named(plan, "qk"), 8u);
    EXPECT_EQ(count_named(plan, "softmax"), 8u);
    EXPECT_EQ(count_named(plan, "av"), 8u);
    EXPECT_EQ(plan.macs, 2ull * 256 * 256 * 32);
    EXPECT_THROW(gen_flash_attention(t, 256, 32, 48, 1, Scheme::Das), ConfigError);
}

TEST(Kernels, LayerNormOwnsTokensLocally) {
    const auto t = terapool_default();
    const auto plan = gen_layernorm(t, 197, 256, Scheme::Das);
    const auto& x = operand(plan, "X");
    ASSERT_EQ(x.config.kind, MapKind::Das);
    std::uint32_t active = 0;
    for (std::uint32_t pe = 0; pe < t.total_pes(); ++pe) {
        const auto ops = trace(plan, pe);
        bool any = false;
        for (const auto& op : ops) {
            if (op.kind != OpKind::Load || !x.config.contains(op.arg)) continue;
            any = true;
            const auto loc = das_map(t, x.config, op.arg);
            ASSERT_EQ(t.tile_of_bank(loc.bank), t.tile_of_pe(pe)) << "PE " << pe;
        }
        active += any;
    }
    EXPECT_EQ(active, 197u);
}

TEST(Kernels, VitGeometry) {
    VitConfig cfg;
    EXPECT_EQ(cfg.patches(), 196u);
    EXPECT_EQ(cfg.tokens(), 197u);
    EXPECT_EQ(cfg.padded_tokens(), 256u);
    EXPECT_EQ(cfg.heads(), 4u);
    cfg.head_dim = 48;
    EXPECT_THROW(cfg.validate(), ConfigError);

    const auto t = desk_default();
    VitConfig small;
    small.embed = 64;
    small.head_dim = 16;
    small.tile_s = 32;
    const auto plan = gen_vit_encoder(t, small, Scheme::Das);
    std::vector<std::string> stages;
    for (const auto& p : plan.workload.phases) {
        if (!p.stage.empty() && std::find(stages.begin(), stages.end(), p.stage) == stages.end()) {
            stages.push_back(p.stage);
        }
    }
    for (const char* s : {"Norm", "QKV", "SA", "OP", "FF"}) {
        EXPECT_NE(std::find(stages.begin(), stages.end(), s), stages.end()) << s;
    }
    EXPECT_EQ(plan.macs, vit_layer_macs(small));
}

TEST(Kernels, RejectsBadShapes) {
    const auto t = desk_default();
    EXPECT_THROW(gen_gemv(t, 0, 32, 1, Scheme::Das), ConfigError);
    EXPECT_THROW(gen_gemm(t, 62, 64, 64, 1, Scheme::Das), ConfigError);
    EXPECT_THROW(gen_layernorm(t, 0, 64, Scheme::Das), ConfigError);
    EXPECT_THROW(parse_scheme("banked"), ConfigError);
    EXPECT_EQ(parse_scheme("das"), Scheme::Das);
}

}  // namespace
}  // namespace das
