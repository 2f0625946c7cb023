#include "das/alloc.hpp"

#include "das/errors.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace das {

namespace {

std::uint64_t align_up(std::uint64_t v, std::uint64_t a) { return (v + a - 1) / a * a; }

}  // namespace

Heap::Heap(const ClusterTopology& topo, std::uint64_t base, std::uint64_t size) : topo_(topo), base_(base), size_(size) {
    topo_.validate();
    if (size == 0) throw ConfigError("heap_init: size must be > 0");
    if (base % topo_.word_bytes != 0 || size % topo_.word_bytes != 0) {
        throw ConfigError("heap_init: base " + std::to_string(base) + " and size " + std::to_string(size) +
                          " must be word aligned");
    }
    if (base + size > topo_.total_bytes()) throw ConfigError("heap_init: heap extends past the end of L1");
    free_.push_back({base, size});
}

std::uint64_t Heap::alignment(MapRequest request) const {
    if (request.kind == MapKind::Das) return slab_bytes(topo_, MapConfig::das(request.p, request.s));
    return topo_.word_bytes;
}

std::uint64_t Heap::rounded_size(std::uint64_t size, MapRequest request) const {
    return align_up(size, alignment(request));
}

std::uint64_t Heap::das_malloc(std::uint64_t size, MapRequest request) {
    if (size == 0) throw ConfigError("das_malloc: size must be > 0");
    if (request.kind == MapKind::Das) {
        if (request.p > topo_.bank_bits() || request.s > topo_.row_bits()) {
            throw ConfigError("das_malloc: p = " + std::to_string(request.p) + ", s = " + std::to_string(request.s) +
                              " out of range");
        }
    }
    const std::uint64_t need = rounded_size(size, request);
    const std::uint64_t align = alignment(request);

    for (auto it = free_.begin(); it != free_.end(); ++it) {
        const std::uint64_t start = align_up(it->start, align);
        if (start < it->start || start + need > it->end()) continue;

        const FreeBlock old = *it;
        auto pos = free_.erase(it);
        if (start + need < old.end()) pos = free_.insert(pos, {start + need, old.end() - start - need});
        if (start > old.start) free_.insert(pos, {old.start, start - old.start});

        Allocation a;
        a.requested = size;
        a.config = request.kind == MapKind::Das ? MapConfig::das(request.p, request.s, start, need)
                                                : MapConfig{MapKind::Interleaved, 0, 0, start, need};
        live_.emplace(start, a);

        if (request.kind == MapKind::Das && max_regions_ > 0 && region_hook_) {
            const auto n = live_das_regions().size();
            if (n > max_regions_) region_hook_(n);
        }
        return start;
    }
    throw AllocFailure("das_malloc: no free block fits " + std::to_string(need) + " bytes");
}

void Heap::das_free(std::uint64_t addr) {
    auto it = live_.find(addr);
    if (it == live_.end()) {
        throw InvalidFree("das_free: " + std::to_string(addr) + " is not the base of a live allocation");
    }
    FreeBlock blk{it->second.config.base_addr, it->second.config.size_bytes};
    live_.erase(it);

    auto pos = free_.begin();
    while (pos != free_.end() && pos->start < blk.start) ++pos;
    if (pos != free_.end() && blk.end() == pos->start) {
        blk.size += pos->size;
        pos = free_.erase(pos);
    }
    if (pos != free_.begin()) {
        auto prev = std::prev(pos);
        if (prev->end() == blk.start) {
            prev->size += blk.size;
            return;
        }
    }
    free_.insert(pos, blk);
}

std::optional<MapConfig> Heap::region_lookup(std::uint64_t addr) const {
    auto it = live_.upper_bound(addr);
    if (it == live_.begin()) return std::nullopt;
    --it;
    const MapConfig& cfg = it->second.config;
    if (cfg.kind != MapKind::Das || !cfg.contains(addr)) return std::nullopt;
    return cfg;
}

std::vector<MapConfig> Heap::live_das_regions() const {
    std::vector<MapConfig> out;
    for (const auto& [addr, a] : live_) {
        if (a.config.kind == MapKind::Das) out.push_back(a.config);
    }
    return out;
}

void Heap::set_region_limit(std::size_t max_regions, std::function<void(std::size_t)> hook) {
    max_regions_ = max_regions;
    region_hook_ = std::move(hook);
}

void Heap::check_invariants() const {
    std::uint64_t total = 0;
    std::uint64_t prev_end = 0;
    bool first = true;
    for (const auto& b : free_) {
        if (b.size == 0) throw std::logic_error("free list holds an empty block");
        if (b.start < base_ || b.end() > base_ + size_) throw std::logic_error("free block outside heap");
        if (!first && b.start < prev_end) throw std::logic_error("free list unsorted or overlapping");
        if (!first && b.start == prev_end) throw std::logic_error("adjacent free blocks not coalesced");
        prev_end = b.end();
        first = false;
        total += b.size;
    }
    std::vector<std::pair<std::uint64_t, std::uint64_t>> spans;
    for (const auto& b : free_) spans.emplace_back(b.start, b.end());
    for (const auto& [addr, a] : live_) {
        const auto& c = a.config;
        if (c.base_addr < base_ || c.end_addr() > base_ + size_) throw std::logic_error("region outside heap");
        spans.emplace_back(c.base_addr, c.end_addr());
        total += c.size_bytes;
    }
    std::sort(spans.begin(), spans.end());
    for (std::size_t i = 1; i < spans.size(); ++i) {
        if (spans[i].first < spans[i - 1].second) throw std::logic_error("free blocks and regions overlap");
    }
    if (total != size_) throw std::logic_error("heap accounting does not sum to the heap size");
}

}  // namespace das
