#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>

namespace das {

/// Position of a bank relative to a requesting PE in the interconnect
/// hierarchy. Ordered from nearest to farthest.
enum class HierarchyLevel : std::uint8_t {
    TileLocal = 0,
    SubGroupLocal = 1,
    GroupLocal = 2,
    Remote = 3,
};

inline constexpr std::size_t kNumLevels = 4;

std::string_view to_string(HierarchyLevel level);

/**
 * Geometry and per-level latency of a hierarchical shared-L1 cluster.
 *
 * Tiles are numbered contiguously; a subgroup is a run of
 * tiles_per_subgroup tiles and a group a run of subgroups_per_group
 * subgroups. PE p lives in tile p / pes_per_tile, bank k in tile
 * k / banks_per_tile.
 */
struct ClusterTopology {
    std::uint32_t pes_per_tile = 8;
    std::uint32_t banks_per_tile = 32;
    std::uint32_t tiles_per_subgroup = 8;
    std::uint32_t subgroups_per_group = 4;
    std::uint32_t groups = 4;
    std::uint32_t rows_per_bank = 256;
    std::uint32_t word_bytes = 4;
    /// Contention-free load-use latency in cycles, indexed by HierarchyLevel.
    std::array<std::uint32_t, kNumLevels> level_latency{1, 3, 5, 7};

    std::uint32_t total_tiles() const { return tiles_per_subgroup * subgroups_per_group * groups; }
    std::uint32_t total_pes() const { return pes_per_tile * total_tiles(); }
    std::uint32_t total_banks() const { return banks_per_tile * total_tiles(); }
    std::uint32_t total_subgroups() const { return subgroups_per_group * groups; }
    std::uint64_t total_words() const { return std::uint64_t{total_banks()} * rows_per_bank; }
    std::uint64_t total_bytes() const { return total_words() * word_bytes; }

    /// b: log2 of the bank count.
    unsigned bank_bits() const;
    /// r: log2 of rows per bank.
    unsigned row_bits() const;
    /// log2 of word size in bytes (the byte-offset field width).
    unsigned offset_bits() const;
    /// Width of an L1 byte address.
    unsigned address_bits() const { return offset_bits() + bank_bits() + row_bits(); }
    unsigned tile_bank_bits() const;

    std::uint32_t latency(HierarchyLevel level) const {
        return level_latency[static_cast<std::size_t>(level)];
    }

    std::uint32_t tile_of_pe(std::uint32_t pe) const { return pe / pes_per_tile; }
    std::uint32_t tile_of_bank(std::uint32_t bank) const { return bank / banks_per_tile; }
    std::uint32_t subgroup_of_tile(std::uint32_t tile) const { return tile / tiles_per_subgroup; }
    std::uint32_t group_of_tile(std::uint32_t tile) const {
        return tile / (tiles_per_subgroup * subgroups_per_group);
    }

    /// Throws ConfigError when a count is not a power of two or the
    /// latencies are not strictly increasing.
    void validate() const;

    friend bool operator==(const ClusterTopology&, const ClusterTopology&) = default;
};

/// The 1024-PE, 4096-bank, 4 MiB cluster.
ClusterTopology terapool_default();

/// Reduced cluster for fast experiments: 16 tiles x 4 PEs, 16 banks per
/// tile, 1 MiB of L1.
ClusterTopology desk_default();

/// Classify a PE -> bank access. Throws ConfigError on out-of-range ids.
HierarchyLevel access_level(const ClusterTopology& topo, std::uint32_t pe_id, std::uint32_t bank_id);

/// Unchecked variant for the engine hot path.
inline HierarchyLevel access_level_unchecked(const ClusterTopology& topo, std::uint32_t pe_tile,
                                             std::uint32_t bank_tile) {
    if (pe_tile == bank_tile) return HierarchyLevel::TileLocal;
    const auto sg_a = pe_tile / topo.tiles_per_subgroup;
    const auto sg_b = bank_tile / topo.tiles_per_subgroup;
    if (sg_a == sg_b) return HierarchyLevel::SubGroupLocal;
    if (sg_a / topo.subgroups_per_group == sg_b / topo.subgroups_per_group) {
        return HierarchyLevel::GroupLocal;
    }
    return HierarchyLevel::Remote;
}

/// Fraction of banks a PE reaches tile-locally.
double local_fraction(const ClusterTopology& topo);

bool is_pow2(std::uint64_t v);
unsigned log2_exact(std::uint64_t v);
std::uint64_t next_pow2(std::uint64_t v);

}  // namespace das
