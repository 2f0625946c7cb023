#include "das/dma.hpp"

#include "das/errors.hpp"

#include <algorithm>

namespace das {

BankCalendar::BankCalendar(std::uint32_t banks, unsigned horizon_log2)
    : banks_(banks), words_(std::max(2u, (1u << horizon_log2) / 64)), bits_(std::size_t{words_} * banks, 0) {}

std::uint64_t BankCalendar::book(std::uint32_t bank, std::uint64_t earliest) {
    std::uint64_t word = earliest / 64;
    if (word < cleared_word_) word = cleared_word_;
    unsigned bit = word == earliest / 64 ? static_cast<unsigned>(earliest % 64) : 0;
    for (; word < cleared_word_ + words_; ++word, bit = 0) {
        std::uint64_t& w = bits_[(word % words_) * banks_ + bank];
        const std::uint64_t free = ~w & (~0ull << bit);
        if (free != 0) {
            const unsigned pos = static_cast<unsigned>(__builtin_ctzll(free));
            w |= 1ull << pos;
            return word * 64 + pos;
        }
    }
    throw SimFault("bank " + std::to_string(bank) + " queue exceeds the simulation horizon of " +
                   std::to_string(horizon()) + " cycles");
}

void BankCalendar::advance(std::uint64_t now) {
    const std::uint64_t target = now / 64;
    if (target <= cleared_word_) return;
    if (target - cleared_word_ >= words_) {
        std::fill(bits_.begin(), bits_.end(), 0);
    } else {
        for (std::uint64_t w = cleared_word_; w < target; ++w) {
            auto first = bits_.begin() + static_cast<std::ptrdiff_t>((w % words_) * banks_);
            std::fill(first, first + banks_, 0);
        }
    }
    cleared_word_ = target;
}

DmaEngine::DmaEngine(const ClusterTopology& topo, DmaParams params, BankCalendar& banks)
    : topo_(topo), params_(params), banks_(banks), queues_(topo.total_subgroups()) {
    if (params_.words_per_cycle == 0) throw ConfigError("dma: words_per_cycle must be >= 1");
}

const DmaEngine::State* DmaEngine::find(std::uint64_t id) const {
    for (const auto& t : transfers_) {
        if (t.id == id) return &t;
    }
    return nullptr;
}

bool DmaEngine::started(std::uint64_t id) const { return find(id) != nullptr; }

std::optional<std::uint64_t> DmaEngine::completion(std::uint64_t id) const {
    const State* s = find(id);
    return s ? s->done : std::nullopt;
}

const std::vector<TransferSegment>& DmaEngine::segments(std::uint64_t id) const {
    const State* s = find(id);
    if (!s) throw SimFault("dma: unknown transfer " + std::to_string(id));
    return s->segments;
}

void DmaEngine::start(const DmaTransfer& transfer, const RegionTable& regions, std::uint64_t now) {
    if (started(transfer.id)) throw SimFault("dma: transfer " + std::to_string(transfer.id) + " started twice");
    const MapConfig* region = regions.find(transfer.l1.begin);
    const MapConfig cfg = region ? *region : MapConfig::interleaved();

    State st;
    st.id = transfer.id;
    st.segments = segment_transfer(topo_, cfg, {0, transfer.l1.size()}, transfer.l1);
    const std::size_t index = transfers_.size();

    std::vector<std::vector<std::uint32_t>> per_backend(queues_.size());
    for (const auto& seg : st.segments) {
        for (std::uint64_t a = seg.dst.begin; a < seg.dst.end; a += topo_.word_bytes) {
            const auto loc = regions.resolve(topo_, a);
            const auto sg = topo_.subgroup_of_tile(topo_.tile_of_bank(loc.bank));
            per_backend[sg].push_back(loc.bank);
            ++st.words_left;
        }
    }
    if (st.words_left == 0) st.done = now;
    transfers_.push_back(std::move(st));

    for (std::size_t b = 0; b < per_backend.size(); ++b) {
        if (per_backend[b].empty()) continue;
        queues_[b].push_back({index, now + params_.l2_latency, std::move(per_backend[b]), 0});
        ++pending_jobs_;
    }
}

std::vector<std::uint64_t> DmaEngine::advance(std::uint64_t now) {
    std::vector<std::uint64_t> finished;
    for (auto& q : queues_) {
        std::uint32_t budget = params_.words_per_cycle;
        while (budget > 0 && !q.empty() && q.front().ready <= now) {
            Job& job = q.front();
            State& st = transfers_[job.transfer];
            while (budget > 0 && job.cursor < job.banks.size()) {
                const std::uint64_t slot = banks_.book(job.banks[job.cursor++], now);
                st.last_landing = std::max(st.last_landing, slot + 1);
                --budget;
                if (--st.words_left == 0) {
                    st.done = st.last_landing;
                    finished.push_back(st.id);
                }
            }
            if (job.cursor == job.banks.size()) {
                q.pop_front();
                --pending_jobs_;
            }
        }
    }
    return finished;
}

}  // namespace das
