#pragma once

#include "das/remap.hpp"
#include "das/topology.hpp"

#include <cstdint>
#include <functional>
#include <list>
#include <map>
#include <optional>
#include <vector>

namespace das {

/// What the caller asks the allocator for: either plain interleaved memory
/// or a Das region with partition granularity p and slab height s.
struct MapRequest {
    MapKind kind = MapKind::Interleaved;
    unsigned p = 0;
    unsigned s = 0;

    static MapRequest interleaved() { return {}; }
    static MapRequest das(unsigned p, unsigned s) { return {MapKind::Das, p, s}; }

    friend bool operator==(const MapRequest&, const MapRequest&) = default;
};

struct FreeBlock {
    std::uint64_t start = 0;
    std::uint64_t size = 0;

    std::uint64_t end() const { return start + size; }
    friend bool operator==(const FreeBlock&, const FreeBlock&) = default;
};

struct Allocation {
    std::uint64_t requested = 0;
    MapConfig config;  // base_addr / size_bytes hold the placed extent
};

/**
 * Dynamic heap allocator with an address-ordered free list and a registry
 * of live regions (the software model of the mapper CSRs).
 *
 * Placement is first-fit. Interleaved requests are rounded to whole words;
 * Das requests are rounded to whole slabs (2^s rows across every bank) and
 * slab-aligned, so a Das region's physical footprint never shares a bank
 * row with any other allocation.
 */
class Heap {
public:
    /// heap_init: one free block covering [base, base + size).
    Heap(const ClusterTopology& topo, std::uint64_t base, std::uint64_t size);

    /// Returns the region start. Throws ConfigError on a bad request and
    /// AllocFailure when no free block fits.
    std::uint64_t das_malloc(std::uint64_t size, MapRequest request);

    /// Throws InvalidFree unless addr is the base of a live allocation.
    void das_free(std::uint64_t addr);

    /// The live Das region containing addr, if any.
    std::optional<MapConfig> region_lookup(std::uint64_t addr) const;

    std::vector<MapConfig> live_das_regions() const;
    const std::map<std::uint64_t, Allocation>& live() const { return live_; }
    const std::list<FreeBlock>& free_list() const { return free_; }

    std::uint64_t base() const { return base_; }
    std::uint64_t size() const { return size_; }
    const ClusterTopology& topology() const { return topo_; }

    /// Size and alignment the allocator will use for a request.
    std::uint64_t rounded_size(std::uint64_t size, MapRequest request) const;
    std::uint64_t alignment(MapRequest request) const;

    /// Soft limit on concurrently live Das regions (CSR slots). Exceeding it
    /// calls the hook with the new live count; allocation still succeeds.
    void set_region_limit(std::size_t max_regions, std::function<void(std::size_t)> hook);

    /// Throws std::logic_error if conservation, ordering, coalescing or
    /// disjointness is violated.
    void check_invariants() const;

private:
    ClusterTopology topo_;
    std::uint64_t base_ = 0;
    std::uint64_t size_ = 0;
    std::list<FreeBlock> free_;
    std::map<std::uint64_t, Allocation> live_;
    std::size_t max_regions_ = 0;
    std::function<void(std::size_t)> region_hook_;
};

}  // namespace das
