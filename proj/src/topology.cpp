#include "das/topology.hpp"

#include "das/errors.hpp"

#include <bit>
#include <string>

namespace das {

std::string_view to_string(HierarchyLevel level) {
    switch (level) {
        case HierarchyLevel::TileLocal: return "tile";
        case HierarchyLevel::SubGroupLocal: return "subgroup";
        case HierarchyLevel::GroupLocal: return "group";
        case HierarchyLevel::Remote: return "remote";
    }
    return "unknown";
}

bool is_pow2(std::uint64_t v) { return v != 0 && std::has_single_bit(v); }

unsigned log2_exact(std::uint64_t v) {
    if (!is_pow2(v)) throw ConfigError("value " + std::to_string(v) + " is not a power of two");
    return static_cast<unsigned>(std::countr_zero(v));
}

std::uint64_t next_pow2(std::uint64_t v) { return v <= 1 ? 1 : std::bit_ceil(v); }

unsigned ClusterTopology::bank_bits() const { return log2_exact(total_banks()); }
unsigned ClusterTopology::row_bits() const { return log2_exact(rows_per_bank); }
unsigned ClusterTopology::offset_bits() const { return log2_exact(word_bytes); }
unsigned ClusterTopology::tile_bank_bits() const { return log2_exact(banks_per_tile); }

void ClusterTopology::validate() const {
    const std::pair<const char*, std::uint32_t> counts[] = {
        {"pes_per_tile", pes_per_tile},
        {"banks_per_tile", banks_per_tile},
        {"tiles_per_subgroup", tiles_per_subgroup},
        {"subgroups_per_group", subgroups_per_group},
        {"groups", groups},
        {"rows_per_bank", rows_per_bank},
        {"word_bytes", word_bytes},
    };
    for (const auto& [name, value] : counts) {
        if (!is_pow2(value)) {
            throw ConfigError(std::string("topology: ") + name + " = " + std::to_string(value) +
                              " must be a power of two");
        }
    }
    if (level_latency[0] == 0) throw ConfigError("topology: tile-local latency must be >= 1");
    for (std::size_t i = 1; i < kNumLevels; ++i) {
        if (level_latency[i] <= level_latency[i - 1]) {
            throw ConfigError("topology: level_latency must be strictly increasing");
        }
    }
    if (address_bits() > 40) throw ConfigError("topology: L1 larger than 2^40 bytes");
}

ClusterTopology terapool_default() { return ClusterTopology{}; }

ClusterTopology desk_default() {
    ClusterTopology t;
    t.pes_per_tile = 4;
    t.banks_per_tile = 16;
    t.tiles_per_subgroup = 4;
    t.subgroups_per_group = 2;
    t.groups = 2;
    t.rows_per_bank = 1024;
    return t;
}

HierarchyLevel access_level(const ClusterTopology& topo, std::uint32_t pe_id, std::uint32_t bank_id) {
    if (pe_id >= topo.total_pes()) {
        throw ConfigError("access_level: pe " + std::to_string(pe_id) + " out of range");
    }
    if (bank_id >= topo.total_banks()) {
        throw ConfigError("access_level: bank " + std::to_string(bank_id) + " out of range");
    }
    return access_level_unchecked(topo, topo.tile_of_pe(pe_id), topo.tile_of_bank(bank_id));
}

double local_fraction(const ClusterTopology& topo) {
    return static_cast<double>(topo.banks_per_tile) / static_cast<double>(topo.total_banks());
}

}  // namespace das
