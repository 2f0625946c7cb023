#pragma once

// Independent reference models used by the unit and acceptance tests. They
// are written from the behavioural description (fill order, first fit,
// FIFO service), not from the production code paths.

#include "das/alloc.hpp"
#include "das/errors.hpp"
#include "das/remap.hpp"
#include "das/topology.hpp"

#include <cstdint>
#include <iterator>
#include <map>
#include <optional>
#include <utility>
#include <vector>

namespace das::oracle {

/// Small cluster with 2^b banks and 2^r rows per bank.
inline ClusterTopology small_topology(unsigned b, unsigned r) {
    ClusterTopology t;
    const unsigned tile_bits = b < 2 ? b : 2;
    t.pes_per_tile = 1;
    t.banks_per_tile = 1u << tile_bits;
    t.tiles_per_subgroup = 1u << (b - tile_bits);
    t.subgroups_per_group = 1;
    t.groups = 1;
    t.rows_per_bank = 1u << r;
    t.word_bytes = 4;
    return t;
}

/// Physical (bank, row) of every word of a Das region, in address order,
/// produced by walking the fill order: a partition of 2^p banks is filled
/// bank-fastest across 2^s rows, then the next partition, and once every
/// partition holds 2^s rows the next slab of rows starts.
inline std::vector<std::pair<std::uint32_t, std::uint32_t>> fill_order(const ClusterTopology& topo, unsigned p,
                                                                       unsigned s, std::uint32_t first_row,
                                                                       std::uint64_t words) {
    std::vector<std::pair<std::uint32_t, std::uint32_t>> out;
    const std::uint32_t banks = topo.total_banks();
    const std::uint32_t part_banks = 1u << p;
    const std::uint32_t rows = 1u << s;
    for (std::uint32_t slab = 0; out.size() < words; ++slab) {
        for (std::uint32_t part = 0; part < banks / part_banks && out.size() < words; ++part) {
            for (std::uint32_t row = 0; row < rows && out.size() < words; ++row) {
                for (std::uint32_t bank = 0; bank < part_banks && out.size() < words; ++bank) {
                    out.emplace_back(part * part_banks + bank, first_row + slab * rows + row);
                }
            }
        }
    }
    return out;
}

/// Interleaved placement: word w sits in bank w mod B, row w div B.
inline std::pair<std::uint32_t, std::uint32_t> interleaved(const ClusterTopology& topo, std::uint64_t addr) {
    const std::uint64_t w = addr / topo.word_bytes;
    return {static_cast<std::uint32_t>(w % topo.total_banks()), static_cast<std::uint32_t>(w / topo.total_banks())};
}

/// Brute-force first-fit allocator over a sorted list of occupied
/// intervals. Rounding: whole words for interleaved requests; whole slabs
/// (word * banks * 2^s bytes), slab-aligned, for Das requests.
class ReferenceAllocator {
public:
    ReferenceAllocator(const ClusterTopology& topo, std::uint64_t base, std::uint64_t size)
        : topo_(topo), base_(base), end_(base + size) {}

    std::uint64_t unit(const MapRequest& req) const {
        std::uint64_t u = topo_.word_bytes;
        if (req.kind == MapKind::Das) u = std::uint64_t{topo_.word_bytes} * topo_.total_banks() << req.s;
        return u;
    }

    /// Placement address, or nullopt when nothing fits.
    std::optional<std::uint64_t> malloc(std::uint64_t size, const MapRequest& req) {
        const std::uint64_t u = unit(req);
        const std::uint64_t need = (size + u - 1) / u * u;
        std::uint64_t cursor = base_;
        auto up = [u](std::uint64_t a) { return (a + u - 1) / u * u; };
        for (auto it = used_.begin();; ++it) {
            const std::uint64_t limit = it == used_.end() ? end_ : it->first;
            const std::uint64_t start = up(cursor);
            if (start + need <= limit) {
                used_.emplace(start, start + need);
                return start;
            }
            if (it == used_.end()) return std::nullopt;
            cursor = it->second;
        }
    }

    bool free(std::uint64_t addr) { return used_.erase(addr) == 1; }

    /// Maximal free gaps, in address order.
    std::vector<FreeBlock> gaps() const {
        std::vector<FreeBlock> out;
        std::uint64_t cursor = base_;
        for (const auto& [s, e] : used_) {
            if (s > cursor) out.push_back({cursor, s - cursor});
            cursor = e;
        }
        if (end_ > cursor) out.push_back({cursor, end_ - cursor});
        return out;
    }

    const std::map<std::uint64_t, std::uint64_t>& used() const { return used_; }

private:
    ClusterTopology topo_;
    std::uint64_t base_;
    std::uint64_t end_;
    std::map<std::uint64_t, std::uint64_t> used_;  // start -> end
};

/// Single-bank FIFO queue stepped one cycle at a time: requests that arrive
/// in the same cycle are served in listed order.
inline std::vector<std::uint64_t> fifo_completions(const std::vector<std::uint64_t>& arrivals) {
    std::vector<std::uint64_t> done(arrivals.size());
    std::vector<std::size_t> queue;
    std::size_t served = 0;
    std::size_t next = 0;
    for (std::uint64_t cycle = 0; served < arrivals.size(); ++cycle) {
        for (std::size_t i = 0; i < arrivals.size(); ++i) {
            if (arrivals[i] == cycle) queue.push_back(i);
        }
        if (next < queue.size()) {
            done[queue[next++]] = cycle + 1;  // served in this cycle, data back next cycle
            ++served;
        }
    }
    return done;
}

}  // namespace das::oracle
