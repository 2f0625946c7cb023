#include "builder.hpp"

#include "das/errors.hpp"

#include <algorithm>
#include <stdexcept>

namespace das {

std::string_view to_string(Scheme scheme) { return scheme == Scheme::Das ? "das" : "interleaved"; }

Scheme parse_scheme(std::string_view text) {
    if (text == "das") return Scheme::Das;
    if (text == "interleaved") return Scheme::Interleaved;
    throw ConfigError("unknown scheme '" + std::string(text) + "' (expected das or interleaved)");
}

std::vector<PeOp> trace(const KernelPlan& plan, std::uint32_t pe) {
    std::vector<PeOp> out;
    auto gen = plan.workload.stream(pe);
    while (const PeOp* op = gen.next()) out.push_back(*op);
    return out;
}

OpCounts count_ops(const KernelPlan& plan) {
    OpCounts c;
    for (std::uint32_t pe = 0; pe < plan.workload.num_pes; ++pe) {
        auto gen = plan.workload.stream(pe);
        while (const PeOp* op = gen.next()) c.add(*op);
    }
    return c;
}

namespace detail {

namespace {

Generator<PeOp> pe_stream(std::shared_ptr<const std::vector<Step>> steps, std::uint32_t pe) {
    for (const Step& st : *steps) {
        switch (st.kind) {
            case Step::Kind::Controller:
                if (pe == kController) {
                    for (const PeOp& op : st.ops) co_yield op;
                }
                break;
            case Step::Kind::Parallel: {
                auto body = st.body(pe);
                while (const PeOp* op = body.next()) co_yield *op;
                break;
            }
            case Step::Kind::Barrier:
                co_yield PeOp::barrier(st.id);
                break;
        }
    }
}

}  // namespace

std::uint64_t chunk_words(std::uint64_t words, std::uint64_t min_words) {
    return std::max(next_pow2(std::max<std::uint64_t>(words, 1)), min_words);
}

MapRequest chunked_request(const ClusterTopology& topo, std::uint64_t partition_banks, std::uint64_t chunk,
                           const std::string& what) {
    const unsigned p = log2_exact(partition_banks);
    const unsigned c = log2_exact(chunk);
    if (c < p) throw ConfigError(what + ": chunk smaller than its partition");
    const unsigned s = c - p;
    if (s > topo.row_bits()) {
        throw ConfigError(what + ": " + std::to_string(chunk) + " words per partition exceed the " +
                          std::to_string(partition_banks * topo.rows_per_bank) +
                          " words it can hold; reduce the problem size or raise the parallel count");
    }
    return MapRequest::das(p, s);
}

std::uint64_t words_to_bytes(const ClusterTopology& topo, std::uint64_t words) { return words * topo.word_bytes; }

PlanBuilder::PlanBuilder(const ClusterTopology& topo, Scheme scheme, const KernelOptions& opts)
    : topo_(topo),
      scheme_(scheme),
      opts_(opts),
      heap_(topo, opts.heap_base, opts.heap_size ? opts.heap_size : topo.total_bytes() - opts.heap_base),
      steps_(std::make_shared<std::vector<Step>>()) {
    w_.num_pes = topo.total_pes();
    w_.epochs.emplace_back();
}

std::vector<PeOp>& PlanBuilder::controller_ops() {
    if (steps_->empty() || steps_->back().kind != Step::Kind::Controller) {
        steps_->push_back({Step::Kind::Controller, {}, {}, 0});
    }
    return steps_->back().ops;
}

namespace {

void charge(std::vector<PeOp>& ops, OpCounts& expected, std::uint32_t cost, std::uint16_t alu, std::uint32_t tag) {
    for (std::uint32_t i = 0; i < cost; ++i) {
        PeOp op = PeOp::compute(ComputeClass::ALU, alu, kNoReg);
        if (i + 1 == cost) op.tag = tag;
        ops.push_back(op);
        ++expected.alus;
    }
    if (cost == 0) {
        // A zero-cost allocator still needs one op to carry the mapping switch.
        PeOp op = PeOp::compute(ComputeClass::ALU, alu, kNoReg);
        op.tag = tag;
        ops.push_back(op);
        ++expected.alus;
    }
}

}  // namespace

std::uint64_t PlanBuilder::alloc(const std::string& name, std::uint64_t bytes, MapRequest das_request) {
    const MapRequest req = scheme_ == Scheme::Das ? das_request : MapRequest::interleaved();
    std::uint64_t addr = 0;
    try {
        addr = heap_.das_malloc(bytes, req);
    } catch (const AllocFailure& e) {
        throw ConfigError("plan does not fit in L1 while allocating '" + name + "' (" + std::to_string(bytes) +
                          " bytes): " + e.what());
    }
    const Allocation& a = heap_.live().at(addr);

    AllocEvent ev;
    ev.kind = AllocEventKind::Malloc;
    ev.name = name;
    ev.addr = addr;
    ev.bytes = bytes;
    ev.config = a.config;
    if (req.kind == MapKind::Das) {
        w_.epochs.emplace_back(topo_, heap_.live_das_regions());
        ev.epoch = static_cast<int>(w_.epochs.size() - 1);
    }
    w_.events.push_back(ev);
    charge(controller_ops(), expected_, opts_.alloc_cost, alu(), static_cast<std::uint32_t>(w_.events.size()));
    operands_.push_back({name, addr, bytes, a.config});
    return addr;
}

void PlanBuilder::release(std::uint64_t addr) {
    const auto it = heap_.live().find(addr);
    if (it == heap_.live().end()) throw std::logic_error("plan frees an address it does not own");
    AllocEvent ev;
    ev.kind = AllocEventKind::Free;
    ev.addr = addr;
    ev.bytes = it->second.requested;
    ev.config = it->second.config;
    for (auto o = operands_.rbegin(); o != operands_.rend(); ++o) {
        if (o->addr == addr) {
            ev.name = o->name;
            break;
        }
    }
    const bool das_region = it->second.config.kind == MapKind::Das;
    heap_.das_free(addr);
    if (das_region) {
        w_.epochs.emplace_back(topo_, heap_.live_das_regions());
        ev.epoch = static_cast<int>(w_.epochs.size() - 1);
    }
    w_.events.push_back(ev);
    charge(controller_ops(), expected_, opts_.alloc_cost, alu(), static_cast<std::uint32_t>(w_.events.size()));
}

std::uint64_t PlanBuilder::dma(const std::string& name, ByteRange l1, DmaDirection dir) {
    const std::uint64_t id = w_.transfers.size() + 1;
    w_.transfers.push_back({id, name, l1, dir});
    controller_ops().push_back(PeOp::dma_start(id));
    ++expected_.dma_ops;
    return id;
}

namespace {

Generator<PeOp> wait_body(std::uint64_t id) { co_yield PeOp::dma_wait(id); }

}  // namespace

void PlanBuilder::wait_all(std::uint64_t id) {
    steps_->push_back({Step::Kind::Parallel, {}, [id](std::uint32_t) { return wait_body(id); }, 0});
    expected_.dma_ops += pes();
}

void PlanBuilder::parallel(Body body, const OpCounts& expected) {
    steps_->push_back({Step::Kind::Parallel, {}, std::move(body), 0});
    expected_ += expected;
}

void PlanBuilder::barrier(const std::string& name, const std::string& stage) {
    const std::uint64_t id = next_barrier_++;
    steps_->push_back({Step::Kind::Barrier, {}, {}, id});
    w_.phases.push_back({name, stage});
    expected_.barriers += pes();
}

KernelPlan PlanBuilder::finish(std::string kernel, std::string dims, std::uint32_t parallel, std::uint64_t macs) {
    KernelPlan plan;
    plan.kernel = std::move(kernel);
    plan.dims = std::move(dims);
    plan.parallel = parallel;
    plan.scheme = scheme_;
    plan.macs = macs;
    plan.operands = operands_;
    plan.workload = w_;
    plan.workload.expected = expected_;
    std::shared_ptr<const std::vector<Step>> steps = steps_;
    plan.workload.stream = [steps](std::uint32_t pe) { return pe_stream(steps, pe); };
    return plan;
}

}  // namespace detail
}  // namespace das
