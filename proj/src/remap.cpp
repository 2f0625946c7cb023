#include "das/remap.hpp"

#include "das/errors.hpp"

#include <algorithm>
#include <cstdio>

namespace das {

namespace {

std::string hex(std::uint64_t v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "0x%llx", static_cast<unsigned long long>(v));
    return buf;
}

std::uint64_t mask(unsigned bits) { return bits >= 64 ? ~0ull : ((1ull << bits) - 1); }

std::uint64_t base_row(const ClusterTopology& topo, const MapConfig& cfg) {
    const std::uint64_t row = (cfg.base_addr / topo.word_bytes) >> topo.bank_bits();
    return row & ~mask(cfg.s);
}

// Field order from the LSB of the region-relative word index:
// [bank_lo : p][row_lo : s][bank_hi : b-p][slab ...]
PhysicalLocation das_map_unchecked(const ClusterTopology& topo, const MapConfig& cfg, std::uint64_t addr) {
    const unsigned b = topo.bank_bits();
    const std::uint64_t rel = addr - cfg.base_addr;
    const std::uint64_t u = rel / topo.word_bytes;
    const std::uint64_t bank_lo = u & mask(cfg.p);
    const std::uint64_t row_lo = (u >> cfg.p) & mask(cfg.s);
    const std::uint64_t bank_hi = (u >> (cfg.p + cfg.s)) & mask(b - cfg.p);
    const std::uint64_t slab = u >> (b + cfg.s);
    PhysicalLocation loc;
    loc.bank = static_cast<std::uint32_t>((bank_hi << cfg.p) | bank_lo);
    loc.row = static_cast<std::uint32_t>(base_row(topo, cfg) + (slab << cfg.s) + row_lo);
    loc.byte_offset = static_cast<std::uint32_t>(addr % topo.word_bytes);
    return loc;
}

}  // namespace

std::string_view to_string(MapKind kind) { return kind == MapKind::Das ? "das" : "interleaved"; }

std::uint64_t partition_block_bytes(const ClusterTopology& topo, const MapConfig& cfg) {
    if (cfg.kind != MapKind::Das) return std::uint64_t{topo.word_bytes};
    return std::uint64_t{topo.word_bytes} << (cfg.p + cfg.s);
}

std::uint64_t slab_bytes(const ClusterTopology& topo, const MapConfig& cfg) {
    const unsigned s = cfg.kind == MapKind::Das ? cfg.s : 0;
    return std::uint64_t{topo.word_bytes} << (topo.bank_bits() + s);
}

void validate_map_config(const ClusterTopology& topo, const MapConfig& cfg) {
    if (cfg.kind != MapKind::Das) return;
    const unsigned b = topo.bank_bits();
    const unsigned r = topo.row_bits();
    if (cfg.p > b) {
        throw ConfigError("map config: p = " + std::to_string(cfg.p) + " exceeds bank bits " + std::to_string(b));
    }
    if (cfg.s > r) {
        throw ConfigError("map config: s = " + std::to_string(cfg.s) + " exceeds row bits " + std::to_string(r));
    }
    const std::uint64_t block = partition_block_bytes(topo, cfg);
    if (cfg.base_addr % block != 0) {
        throw ConfigError("map config: base " + hex(cfg.base_addr) + " is not aligned to the " +
                          std::to_string(block) + "-byte partition block");
    }
    if (cfg.size_bytes % topo.word_bytes != 0) {
        throw ConfigError("map config: size " + std::to_string(cfg.size_bytes) + " is not a whole number of words");
    }
    if (cfg.end_addr() > topo.total_bytes()) {
        throw ConfigError("map config: region [" + hex(cfg.base_addr) + ", " + hex(cfg.end_addr()) +
                          ") extends past the end of L1");
    }
    if (cfg.size_bytes > 0) {
        const auto last = das_map_unchecked(topo, cfg, cfg.end_addr() - topo.word_bytes);
        if (last.row >= topo.rows_per_bank) {
            throw ConfigError("map config: region at " + hex(cfg.base_addr) + " maps past the last bank row");
        }
    }
}

PhysicalLocation interleaved_map(const ClusterTopology& topo, std::uint64_t addr) {
    if (addr >= topo.total_bytes()) {
        throw ConfigError("interleaved_map: address " + hex(addr) + " is outside L1");
    }
    const std::uint64_t u = addr / topo.word_bytes;
    const unsigned b = topo.bank_bits();
    return {static_cast<std::uint32_t>(u & mask(b)), static_cast<std::uint32_t>(u >> b),
            static_cast<std::uint32_t>(addr % topo.word_bytes)};
}

PhysicalLocation das_map(const ClusterTopology& topo, const MapConfig& cfg, std::uint64_t addr) {
    if (cfg.kind != MapKind::Das) throw ConfigError("das_map: config is not a Das region");
    validate_map_config(topo, cfg);
    if (!cfg.contains(addr)) {
        throw ConfigError("das_map: address " + hex(addr) + " is outside region [" + hex(cfg.base_addr) + ", " +
                          hex(cfg.end_addr()) + ")");
    }
    return das_map_unchecked(topo, cfg, addr);
}

std::uint64_t das_unmap(const ClusterTopology& topo, const MapConfig& cfg, const PhysicalLocation& loc) {
    const unsigned b = topo.bank_bits();
    const std::uint64_t brow = base_row(topo, cfg);
    if (loc.row < brow) throw ConfigError("das_unmap: row below region footprint");
    const std::uint64_t rel_row = loc.row - brow;
    const std::uint64_t bank_lo = loc.bank & mask(cfg.p);
    const std::uint64_t bank_hi = loc.bank >> cfg.p;
    const std::uint64_t row_lo = rel_row & mask(cfg.s);
    const std::uint64_t slab = rel_row >> cfg.s;
    const std::uint64_t u = (slab << (b + cfg.s)) | (bank_hi << (cfg.p + cfg.s)) | (row_lo << cfg.p) | bank_lo;
    const std::uint64_t addr = cfg.base_addr + u * topo.word_bytes + loc.byte_offset;
    if (!cfg.contains(addr)) throw ConfigError("das_unmap: location outside region footprint");
    return addr;
}

PhysicalLocation resolve(const ClusterTopology& topo, std::span<const MapConfig> regions, std::uint64_t addr) {
    return RegionTable(topo, {regions.begin(), regions.end()}).resolve(topo, addr);
}

RegionTable::RegionTable(const ClusterTopology& topo, std::vector<MapConfig> regions) {
    for (const auto& r : regions) {
        if (r.kind != MapKind::Das) continue;
        validate_map_config(topo, r);
        if (r.size_bytes > 0) regions_.push_back(r);
    }
    std::sort(regions_.begin(), regions_.end(),
              [](const MapConfig& a, const MapConfig& b) { return a.base_addr < b.base_addr; });
    for (std::size_t i = 1; i < regions_.size(); ++i) {
        if (regions_[i].base_addr < regions_[i - 1].end_addr()) {
            throw ConfigError("region table: regions at " + hex(regions_[i - 1].base_addr) + " and " +
                              hex(regions_[i].base_addr) + " overlap");
        }
    }
}

const MapConfig* RegionTable::find(std::uint64_t addr) const {
    auto it = std::upper_bound(regions_.begin(), regions_.end(), addr,
                               [](std::uint64_t a, const MapConfig& r) { return a < r.base_addr; });
    if (it == regions_.begin()) return nullptr;
    --it;
    return it->contains(addr) ? &*it : nullptr;
}

PhysicalLocation RegionTable::resolve(const ClusterTopology& topo, std::uint64_t addr) const {
    if (const MapConfig* r = find(addr)) return das_map_unchecked(topo, *r, addr);
    return interleaved_map(topo, addr);
}

std::vector<TransferSegment> segment_transfer(const ClusterTopology& topo, const MapConfig& cfg, ByteRange src,
                                              ByteRange dst) {
    if (src.end < src.begin || dst.end < dst.begin) throw ConfigError("segment_transfer: inverted range");
    if (src.size() != dst.size()) {
        throw ConfigError("segment_transfer: source length " + std::to_string(src.size()) +
                          " != destination length " + std::to_string(dst.size()));
    }
    std::uint64_t block = 0;
    std::uint64_t origin = 0;
    if (cfg.kind == MapKind::Das) {
        validate_map_config(topo, cfg);
        if (dst.size() > 0 && (dst.begin < cfg.base_addr || dst.end > cfg.end_addr())) {
            throw ConfigError("segment_transfer: destination leaves the Das region");
        }
        block = partition_block_bytes(topo, cfg);
        origin = cfg.base_addr;
    } else {
        block = std::uint64_t{topo.word_bytes} << topo.bank_bits();
    }

    std::vector<TransferSegment> out;
    std::uint64_t pos = dst.begin;
    while (pos < dst.end) {
        const std::uint64_t next_boundary = origin + ((pos - origin) / block + 1) * block;
        const std::uint64_t stop = std::min(next_boundary, dst.end);
        const std::uint64_t off = pos - dst.begin;
        out.push_back({{src.begin + off, src.begin + off + (stop - pos)}, {pos, stop}});
        pos = stop;
    }
    return out;
}

}  // namespace das
