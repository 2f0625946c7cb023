#pragma once

#include "das/topology.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace das {

enum class MapKind : std::uint8_t { Interleaved, Das };

std::string_view to_string(MapKind kind);

/// One address-mapping scheme. For Das regions, 2^p banks form a partition
/// and 2^s rows of each partition are filled before moving to the next
/// partition.
struct MapConfig {
    MapKind kind = MapKind::Interleaved;
    unsigned p = 0;
    unsigned s = 0;
    std::uint64_t base_addr = 0;
    std::uint64_t size_bytes = 0;

    static MapConfig interleaved() { return {}; }
    static MapConfig das(unsigned p, unsigned s, std::uint64_t base = 0, std::uint64_t size = 0) {
        return {MapKind::Das, p, s, base, size};
    }

    bool contains(std::uint64_t addr) const { return addr >= base_addr && addr - base_addr < size_bytes; }
    std::uint64_t end_addr() const { return base_addr + size_bytes; }

    friend bool operator==(const MapConfig&, const MapConfig&) = default;
};

/// Bytes in one partition block: word_bytes * 2^(p+s).
std::uint64_t partition_block_bytes(const ClusterTopology& topo, const MapConfig& cfg);
/// Bytes in one full slab: 2^s rows across every bank.
std::uint64_t slab_bytes(const ClusterTopology& topo, const MapConfig& cfg);

struct PhysicalLocation {
    std::uint32_t bank = 0;
    std::uint32_t row = 0;
    std::uint32_t byte_offset = 0;

    friend bool operator==(const PhysicalLocation&, const PhysicalLocation&) = default;
};

/// Throws ConfigError unless p <= b, s <= r, and the region is
/// partition-block aligned and a whole number of words.
void validate_map_config(const ClusterTopology& topo, const MapConfig& cfg);

PhysicalLocation interleaved_map(const ClusterTopology& topo, std::uint64_t addr);

PhysicalLocation das_map(const ClusterTopology& topo, const MapConfig& cfg, std::uint64_t addr);

/// Inverse of das_map on the region; throws when loc lies outside its footprint.
std::uint64_t das_unmap(const ClusterTopology& topo, const MapConfig& cfg, const PhysicalLocation& loc);

/// Checks disjointness and applies the matching region's map, falling back
/// to interleaved_map.
PhysicalLocation resolve(const ClusterTopology& topo, std::span<const MapConfig> regions, std::uint64_t addr);

/**
 * Pre-validated, sorted set of Das regions for repeated lookups. This is
 * the model of the address mapper's CSR bank: construction checks every
 * region and rejects overlaps once, lookups are a binary search.
 */
class RegionTable {
public:
    RegionTable() = default;
    RegionTable(const ClusterTopology& topo, std::vector<MapConfig> regions);

    const MapConfig* find(std::uint64_t addr) const;
    PhysicalLocation resolve(const ClusterTopology& topo, std::uint64_t addr) const;
    std::span<const MapConfig> regions() const { return regions_; }
    bool empty() const { return regions_.empty(); }

private:
    std::vector<MapConfig> regions_;
};

struct ByteRange {
    std::uint64_t begin = 0;
    std::uint64_t end = 0;

    std::uint64_t size() const { return end - begin; }
    friend bool operator==(const ByteRange&, const ByteRange&) = default;
};

struct TransferSegment {
    ByteRange src;
    ByteRange dst;

    friend bool operator==(const TransferSegment&, const TransferSegment&) = default;
};

/// Split a transfer so that no destination piece crosses a partition block
/// (Das) or an L1 line (interleaved). Source pieces follow the same offsets.
std::vector<TransferSegment> segment_transfer(const ClusterTopology& topo, const MapConfig& cfg,
                                              ByteRange src, ByteRange dst);

}  // namespace das
