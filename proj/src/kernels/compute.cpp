#include "builder.hpp"

namespace das {

namespace {

Generator<PeOp> compute_body(std::uint32_t ops, std::uint16_t alu) {
    for (std::uint32_t i = 0; i < ops; ++i) co_yield PeOp::compute(ComputeClass::ALU, alu, kNoReg);
}

}  // namespace

KernelPlan gen_compute(const ClusterTopology& topo, std::uint32_t ops, Scheme scheme, const KernelOptions& opts) {
    topo.validate();
    detail::PlanBuilder b(topo, scheme, opts);
    OpCounts e;
    e.alus = std::uint64_t{ops} * b.pes();
    const std::uint16_t alu = b.alu();
    b.parallel([ops, alu](std::uint32_t) { return compute_body(ops, alu); }, e);
    b.barrier("compute", "compute");
    return b.finish("compute", std::to_string(ops), 1, 0);
}

}  // namespace das
