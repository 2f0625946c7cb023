#include "das/runner.hpp"

#include "das/errors.hpp"

#include <future>

namespace das {

KernelPlan make_plan(const Scenario& sc, Scheme scheme) {
    const auto& k = sc.kernel;
    const auto& t = sc.topology;
    const auto& o = sc.kernel_opts;
    if (k.name == "gemv") return gen_gemv(t, k.M, k.N, k.parallel, scheme, o);
    if (k.name == "gemm") return gen_gemm(t, k.M, k.N, k.P, k.parallel, scheme, o);
    if (k.name == "attention") return gen_flash_attention(t, k.S, k.head_dim, k.tile_s, k.heads, scheme, o);
    if (k.name == "layernorm") return gen_layernorm(t, k.tokens, k.E, scheme, o);
    if (k.name == "vit") return gen_vit_encoder(t, k.vit, scheme, o);
    if (k.name == "compute") return gen_compute(t, k.ops, scheme, o);
    throw ConfigError("unknown kernel '" + k.name + "'");
}

RunReport run_scheme(const Scenario& sc, Scheme scheme) {
    const KernelPlan plan = make_plan(sc, scheme);
    RunReport r;
    r.scenario = sc.name;
    r.scheme = scheme;
    r.topology = sc.topology;
    r.engine = sc.engine;
    r.kernel_opts = sc.kernel_opts;
    r.kernel = plan.kernel;
    r.dims = plan.dims;
    r.parallel = plan.parallel;
    r.macs = plan.macs;
    r.sim = run(sc.topology, plan.workload, sc.engine);
    return r;
}

PairResult run_pair(const Scenario& sc) {
    auto baseline = std::async(std::launch::async, [&sc] { return run_scheme(sc, Scheme::Interleaved); });
    PairResult out;
    out.das = run_scheme(sc, Scheme::Das);
    out.interleaved = baseline.get();
    out.speedup = speedup(out.das, out.interleaved);
    out.das.speedup = out.speedup;
    out.das.baseline = sc.name + ".interleaved";
    return out;
}

std::vector<RunReport> run_scenario(const Scenario& sc) {
    const bool both = sc.schemes.size() == 2;
    if (both) {
        PairResult p = run_pair(sc);
        if (sc.schemes.front() == Scheme::Das) return {std::move(p.das), std::move(p.interleaved)};
        return {std::move(p.interleaved), std::move(p.das)};
    }
    return {run_scheme(sc, sc.schemes.front())};
}

}  // namespace das
