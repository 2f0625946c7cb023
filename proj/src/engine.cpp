#include "das/engine.hpp"

#include "das/errors.hpp"

#include <algorithm>
#include <cstdio>
#include <queue>
#include <sstream>

namespace das {

std::string_view to_string(OpKind kind) {
    switch (kind) {
        case OpKind::Load: return "load";
        case OpKind::Store: return "store";
        case OpKind::Compute: return "compute";
        case OpKind::Barrier: return "barrier";
        case OpKind::DmaStart: return "dma_start";
        case OpKind::DmaWait: return "dma_wait";
    }
    return "?";
}

std::string_view to_string(ComputeClass cls) {
    switch (cls) {
        case ComputeClass::MAC: return "mac";
        case ComputeClass::ALU: return "alu";
        case ComputeClass::DIV: return "div";
    }
    return "?";
}

void EngineParams::validate() const {
    if (outstanding == 0) throw ConfigError("engine: outstanding must be >= 1");
    for (std::size_t l = 1; l < kNumLevels; ++l) {
        if (port_slots[l] == 0) throw ConfigError("engine: port_slots must be >= 1");
    }
    if (port_period == 0) throw ConfigError("engine: port_period must be >= 1");
    if (dma.words_per_cycle == 0) throw ConfigError("engine: dma.words_per_cycle must be >= 1");
    if (horizon_log2 < 7 || horizon_log2 > 24) throw ConfigError("engine: horizon_log2 must lie in [7, 24]");
}

StallCounters SimReport::totals() const {
    StallCounters t;
    for (const auto& p : pes) t += p.counters;
    return t;
}

double SimReport::ipc_mean() const {
    if (pes.empty() || cycles == 0) return 0.0;
    double sum = 0;
    for (const auto& p : pes) sum += static_cast<double>(p.counters.instr) / static_cast<double>(p.cycles);
    return sum / static_cast<double>(pes.size());
}

Generator<PeOp> replay(const std::vector<PeOp>& ops) {
    for (const auto& op : ops) co_yield op;
}

namespace {

enum class Stall : std::uint8_t { None, Lsu, Raw, Ins, Wfi };
enum class Producer : std::uint8_t { None, Load, Compute };

struct Pe {
    Generator<PeOp> gen;
    const PeOp* op = nullptr;
    std::uint64_t op_index = 0;
    std::uint32_t tile = 0;
    std::array<std::uint64_t, kNumRegs> ready{};
    std::array<Producer, kNumRegs> producer{};
    std::vector<std::uint64_t> slots;  // completion cycle of each in-flight memory op
    StallCounters counters;
    Stall stall = Stall::None;
    std::uint64_t stall_since = 0;
    bool exhausted = false;
    bool done = false;
    bool at_barrier = false;
    std::uint64_t done_cycle = 0;
};

struct Port {
    std::uint64_t cycle = 0;
    std::uint32_t used = 0;
};

class Simulator {
public:
    Simulator(const ClusterTopology& topo, const Workload& w, const EngineParams& params)
        : topo_(topo),
          w_(w),
          params_(params),
          banks_(topo.total_banks(), params.horizon_log2),
          dma_(topo, params.dma, banks_),
          ring_(std::size_t{1} << params.horizon_log2),
          mask_((std::uint64_t{1} << params.horizon_log2) - 1),
          ports_(std::size_t{topo.total_tiles()} * kNumLevels) {
        for (std::size_t l = 0; l < kNumLevels; ++l) {
            const std::uint32_t lat = topo.latency(static_cast<HierarchyLevel>(l));
            d_req_[l] = (lat - 1) / 2;
            d_resp_[l] = lat - 1 - d_req_[l];
        }
        if (!w.epochs.empty()) table_ = &w.epochs.front();
        for (std::size_t i = 0; i < w.transfers.size(); ++i) {
            for (std::size_t j = 0; j < i; ++j) {
                if (w.transfers[j].id == w.transfers[i].id) {
                    throw ConfigError("workload: duplicate dma transfer id " + std::to_string(w.transfers[i].id));
                }
            }
        }
    }

    SimReport run();

private:
    void schedule(std::uint32_t pe, std::uint64_t cycle);
    void step(std::uint32_t pe);
    void begin_stall(Pe& s, Stall why, std::uint64_t wake, std::uint32_t id);
    void end_stall(Pe& s);
    void issue(Pe& s, std::uint32_t id);
    std::uint64_t memory_access(Pe& s, std::uint32_t pe, std::uint64_t addr);
    bool window_full(Pe& s, std::uint64_t& wake) const;
    std::uint64_t drain_cycle(const Pe& s) const;
    void arrive(Pe& s, std::uint32_t pe, std::uint64_t id);
    void release_barrier();
    void close_phase(std::uint64_t end, const std::string& name, const std::string& stage);
    const DmaTransfer& transfer(std::uint64_t id, std::uint32_t pe) const;
    [[noreturn]] void fault(std::uint32_t pe, const std::string& what) const;
    std::uint64_t next_event() const;

    const ClusterTopology& topo_;
    const Workload& w_;
    const EngineParams& params_;
    BankCalendar banks_;
    DmaEngine dma_;
    std::vector<Pe> pes_;
    std::vector<std::vector<std::uint32_t>> ring_;
    std::uint64_t mask_;
    using Far = std::pair<std::uint64_t, std::uint32_t>;
    std::priority_queue<Far, std::vector<Far>, std::greater<>> far_;
    std::uint64_t scheduled_ = 0;
    std::vector<Port> ports_;
    std::array<std::uint32_t, kNumLevels> d_req_{};
    std::array<std::uint32_t, kNumLevels> d_resp_{};
    const RegionTable* table_ = nullptr;
    RegionTable empty_table_;
    std::uint64_t now_ = 0;
    std::uint32_t done_count_ = 0;

    // Barrier state.
    bool barrier_open_ = false;
    std::uint64_t barrier_id_ = 0;
    std::uint32_t arrivals_ = 0;
    std::vector<std::uint32_t> waiting_;
    std::vector<std::vector<std::uint32_t>> dma_waiters_;

    std::uint64_t phase_start_ = 0;
    StallCounters phase_mark_;

    SimReport report_;
};

void Simulator::schedule(std::uint32_t pe, std::uint64_t cycle) {
    ++scheduled_;
    if (cycle - now_ <= mask_) {
        ring_[cycle & mask_].push_back(pe);
    } else {
        far_.push({cycle, pe});
    }
}

void Simulator::fault(std::uint32_t pe, const std::string& what) const {
    std::ostringstream os;
    os << "cycle " << now_ << ", PE " << pe << ", op #" << pes_[pe].op_index << ": " << what;
    throw SimFault(os.str());
}

const DmaTransfer& Simulator::transfer(std::uint64_t id, std::uint32_t pe) const {
    for (const auto& t : w_.transfers) {
        if (t.id == id) return t;
    }
    fault(pe, "unknown dma transfer " + std::to_string(id));
}

void Simulator::begin_stall(Pe& s, Stall why, std::uint64_t wake, std::uint32_t id) {
    s.stall = why;
    s.stall_since = now_;
    if (wake != 0) schedule(id, wake);
}

void Simulator::end_stall(Pe& s) {
    if (s.stall == Stall::None) return;
    const std::uint64_t d = now_ - s.stall_since;
    switch (s.stall) {
        case Stall::Lsu: s.counters.lsu += d; break;
        case Stall::Raw: s.counters.raw += d; break;
        case Stall::Ins: s.counters.ins += d; break;
        case Stall::Wfi: s.counters.wfi += d; break;
        case Stall::None: break;
    }
    s.stall = Stall::None;
}

bool Simulator::window_full(Pe& s, std::uint64_t& wake) const {
    std::uint64_t earliest = ~0ull;
    for (auto c : s.slots) {
        if (c <= now_) return false;
        earliest = std::min(earliest, c);
    }
    if (s.slots.size() < params_.outstanding) return false;
    wake = earliest;
    return true;
}

std::uint64_t Simulator::drain_cycle(const Pe& s) const {
    std::uint64_t last = 0;
    for (auto c : s.slots) last = std::max(last, c);
    return last;
}

std::uint64_t Simulator::memory_access(Pe& s, std::uint32_t pe, std::uint64_t addr) {
    PhysicalLocation loc;
    try {
        loc = table_->resolve(topo_, addr);
    } catch (const ConfigError& e) {
        fault(pe, e.what());
    }
    const auto level = access_level_unchecked(topo_, s.tile, topo_.tile_of_bank(loc.bank));
    const auto l = static_cast<std::size_t>(level);
    ++report_.accesses[l];
    std::uint64_t grant = now_;
    if (level != HierarchyLevel::TileLocal) {
        Port& port = ports_[std::size_t{s.tile} * kNumLevels + l];
        // A port grants port_slots requests per window of port_period cycles;
        // requests beyond that queue into later windows.
        if (port.cycle + params_.port_period <= now_) {
            port.cycle = now_;
            port.used = 0;
        }
        if (port.used >= params_.port_slots[l]) {
            port.cycle += params_.port_period;
            port.used = 0;
        }
        ++port.used;
        grant = std::max(now_, port.cycle);
    }
    const std::uint64_t slot = banks_.book(loc.bank, grant + d_req_[l]);
    const std::uint64_t ready = slot + 1 + d_resp_[l];

    // Occupy a window slot until the response returns.
    bool placed = false;
    for (auto& c : s.slots) {
        if (c <= now_) {
            c = ready;
            placed = true;
            break;
        }
    }
    if (!placed) s.slots.push_back(ready);
    return ready;
}

void Simulator::close_phase(std::uint64_t end, const std::string& name, const std::string& stage) {
    StallCounters now_totals;
    for (const auto& p : pes_) now_totals += p.counters;
    PhaseStats ph;
    ph.name = name;
    ph.stage = stage;
    ph.start = phase_start_;
    ph.cycles = end - phase_start_;
    ph.counters = now_totals - phase_mark_;
    report_.phases.push_back(std::move(ph));
    phase_mark_ = now_totals;
    phase_start_ = end;
}

void Simulator::arrive(Pe& s, std::uint32_t pe, std::uint64_t id) {
    if (!barrier_open_) {
        barrier_open_ = true;
        barrier_id_ = id;
        arrivals_ = 0;
    } else if (id != barrier_id_) {
        fault(pe, "barrier " + std::to_string(id) + " while barrier " + std::to_string(barrier_id_) + " is open");
    }
    s.at_barrier = true;
    ++arrivals_;
    waiting_.push_back(pe);
    if (arrivals_ == pes_.size()) release_barrier();
}

void Simulator::release_barrier() {
    const std::uint64_t resume = now_ + 1;
    for (auto pe : waiting_) {
        Pe& s = pes_[pe];
        s.at_barrier = false;
        if (s.stall == Stall::Wfi) {
            s.counters.wfi += resume - s.stall_since;
            s.stall_since = resume;
        }
        schedule(pe, resume);
    }
    waiting_.clear();
    barrier_open_ = false;
    std::string name = "barrier" + std::to_string(barrier_id_);
    std::string stage;
    if (barrier_id_ < w_.phases.size()) {
        name = w_.phases[barrier_id_].name;
        stage = w_.phases[barrier_id_].stage;
    }
    close_phase(resume, name, stage);
}

void Simulator::issue(Pe& s, std::uint32_t id) {
    const PeOp& op = *s.op;
    ++s.counters.instr;
    report_.ops.add(op);
    if (op.tag != 0) {
        if (op.tag > w_.events.size()) fault(id, "allocator tag " + std::to_string(op.tag) + " has no event");
        const AllocEvent& ev = w_.events[op.tag - 1];
        report_.events.push_back({ev, now_});
        if (ev.epoch >= 0) {
            if (static_cast<std::size_t>(ev.epoch) >= w_.epochs.size()) fault(id, "mapping epoch out of range");
            table_ = &w_.epochs[static_cast<std::size_t>(ev.epoch)];
        }
    }
    s.op = nullptr;
    ++s.op_index;
}

void Simulator::step(std::uint32_t id) {
    Pe& s = pes_[id];
    end_stall(s);
    if (!s.op && !s.exhausted) {
        s.op = s.gen.next();
        if (!s.op) s.exhausted = true;
    }
    if (s.exhausted) {
        const std::uint64_t last = drain_cycle(s);
        if (last > now_) {
            begin_stall(s, Stall::Lsu, last, id);
            return;
        }
        s.done = true;
        s.done_cycle = now_;
        ++done_count_;
        return;
    }

    const PeOp& op = *s.op;
    auto blocked_on = [&](std::uint8_t reg) -> bool {
        if (reg == kNoReg) return false;
        if (reg >= kNumRegs) fault(id, "register " + std::to_string(reg) + " out of range");
        if (s.ready[reg] <= now_) return false;
        begin_stall(s, s.producer[reg] == Producer::Load ? Stall::Lsu : Stall::Raw, s.ready[reg], id);
        return true;
    };

    switch (op.kind) {
        case OpKind::Load:
        case OpKind::Store: {
            if (op.kind == OpKind::Load ? blocked_on(op.dst) : blocked_on(op.src[0])) return;
            std::uint64_t wake = 0;
            if (window_full(s, wake)) {
                begin_stall(s, Stall::Lsu, wake, id);
                return;
            }
            const std::uint64_t ready = memory_access(s, id, op.arg);
            if (op.kind == OpKind::Load && op.dst != kNoReg) {
                s.ready[op.dst] = ready;
                s.producer[op.dst] = Producer::Load;
            }
            break;
        }
        case OpKind::Compute: {
            for (auto r : op.src) {
                if (blocked_on(r)) return;
            }
            if (blocked_on(op.dst)) return;
            if (op.dst != kNoReg) {
                s.ready[op.dst] = now_ + std::max<std::uint16_t>(op.latency, 1);
                s.producer[op.dst] = Producer::Compute;
            }
            break;
        }
        case OpKind::Barrier: {
            const std::uint64_t last = drain_cycle(s);
            if (last > now_) {
                begin_stall(s, Stall::Lsu, last, id);
                return;
            }
            const std::uint64_t bid = op.arg;
            issue(s, id);
            s.stall = Stall::Wfi;
            s.stall_since = now_ + 1;
            arrive(s, id, bid);
            return;
        }
        case OpKind::DmaStart: {
            const DmaTransfer& t = transfer(op.arg, id);
            if (dma_.started(t.id)) fault(id, "dma transfer " + std::to_string(t.id) + " started twice");
            dma_.start(t, *table_, now_);
            break;
        }
        case OpKind::DmaWait: {
            const DmaTransfer& t = transfer(op.arg, id);
            // A wait may precede the start; the PE sleeps until the transfer lands.
            const auto done = dma_.started(t.id) ? dma_.completion(t.id) : std::nullopt;
            if (!done) {
                std::size_t idx = 0;
                while (w_.transfers[idx].id != t.id) ++idx;
                dma_waiters_[idx].push_back(id);
                begin_stall(s, Stall::Wfi, 0, id);
                return;
            }
            if (*done > now_) {
                begin_stall(s, Stall::Wfi, *done, id);
                return;
            }
            break;
        }
    }
    issue(s, id);
    schedule(id, now_ + 1);
}

std::uint64_t Simulator::next_event() const {
    if (dma_.active()) return now_ + 1;
    for (std::uint64_t c = now_ + 1; c <= now_ + mask_; ++c) {
        if (!ring_[c & mask_].empty()) return c;
    }
    return far_.top().first;
}

SimReport Simulator::run() {
    const std::uint32_t n = w_.num_pes;
    if (n == 0) throw ConfigError("workload: no PEs");
    if (n > topo_.total_pes()) throw ConfigError("workload: more PE streams than PEs in the topology");
    if (!table_) table_ = &empty_table_;
    pes_.resize(n);
    dma_waiters_.resize(w_.transfers.size());
    for (std::uint32_t i = 0; i < n; ++i) {
        pes_[i].gen = w_.stream(i);
        pes_[i].tile = topo_.tile_of_pe(i);
        pes_[i].slots.reserve(params_.outstanding);
        schedule(i, 0);
    }

    std::vector<std::uint32_t> bucket;
    while (done_count_ < n) {
        banks_.advance(now_);
        while (!far_.empty() && far_.top().first - now_ <= mask_) {
            ring_[far_.top().first & mask_].push_back(far_.top().second);
            far_.pop();
        }
        if (dma_.active()) {
            for (auto tid : dma_.advance(now_)) {
                std::size_t idx = 0;
                while (w_.transfers[idx].id != tid) ++idx;
                const std::uint64_t at = *dma_.completion(tid);
                for (auto pe : dma_waiters_[idx]) schedule(pe, std::max(at, now_ + 1));
                dma_waiters_[idx].clear();
            }
        }
        bucket.swap(ring_[now_ & mask_]);
        if (!bucket.empty()) {
            std::sort(bucket.begin(), bucket.end());
            scheduled_ -= bucket.size();
            for (auto pe : bucket) step(pe);
            bucket.clear();
        }
        if (done_count_ == n) break;
        if (scheduled_ == 0 && !dma_.active()) {
            std::ostringstream os;
            os << "deadlock at cycle " << now_ << ":";
            for (std::uint32_t i = 0; i < n && i < pes_.size(); ++i) {
                if (pes_[i].done) continue;
                os << " PE" << i << (pes_[i].at_barrier ? "@barrier" : "@dma_wait");
                if (os.tellp() > 400) {
                    os << " ...";
                    break;
                }
            }
            throw SimFault(os.str());
        }
        now_ = next_event();
    }

    if (barrier_open_) throw SimFault("barrier " + std::to_string(barrier_id_) + " never completed");

    std::uint64_t end = 0;
    for (const auto& p : pes_) end = std::max(end, p.done_cycle);
    report_.cycles = end;
    report_.pes.resize(n);
    for (std::uint32_t i = 0; i < n; ++i) {
        Pe& p = pes_[i];
        p.counters.wfi += end - p.done_cycle;
        report_.pes[i].cycles = end;
        report_.pes[i].counters = p.counters;
        if (p.counters.total() != end) {
            throw SimFault("stall accounting mismatch on PE " + std::to_string(i));
        }
    }
    if (end > phase_start_ || report_.phases.empty()) close_phase(end, w_.tail_phase, "");
    if (w_.expected && !(*w_.expected == report_.ops)) {
        const auto& e = *w_.expected;
        const auto& o = report_.ops;
        char buf[256];
        std::snprintf(buf, sizeof buf,
                      "plan self-check failed: expected ld/st/mac/alu/div %llu/%llu/%llu/%llu/%llu, "
                      "issued %llu/%llu/%llu/%llu/%llu",
                      (unsigned long long)e.loads, (unsigned long long)e.stores, (unsigned long long)e.macs,
                      (unsigned long long)e.alus, (unsigned long long)e.divs, (unsigned long long)o.loads,
                      (unsigned long long)o.stores, (unsigned long long)o.macs, (unsigned long long)o.alus,
                      (unsigned long long)o.divs);
        throw SimFault(buf);
    }
    return std::move(report_);
}

}  // namespace

SimReport run(const ClusterTopology& topo, const Workload& workload, const EngineParams& params) {
    topo.validate();
    params.validate();
    Simulator sim(topo, workload, params);
    return sim.run();
}

SimReport run(const ClusterTopology& topo, const Heap& heap, const std::vector<std::vector<PeOp>>& programs,
              const EngineParams& params) {
    Workload w;
    w.num_pes = static_cast<std::uint32_t>(programs.size());
    w.stream = [&programs](std::uint32_t pe) { return replay(programs[pe]); };
    w.epochs.emplace_back(topo, heap.live_das_regions());
    return run(topo, w, params);
}

}  // namespace das
