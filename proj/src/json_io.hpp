#pragma once

// JSON plumbing shared by scenario and report parsing.

#include "das/engine.hpp"
#include "das/errors.hpp"
#include "das/kernels.hpp"
#include "das/topology.hpp"

#include <json.hpp>

#include <functional>
#include <set>
#include <string>

namespace das::io {

using Json = nlohmann::ordered_json;

/// Builds the message for a problem at `path` (dotted) involving `key`.
using ErrorFormat = std::function<std::string(const std::string& path, const std::string& key, const std::string& msg)>;

/// Strict reader over one JSON object: every key must be consumed before
/// finish(), type mismatches become ConfigError.
class ObjectReader {
public:
    ObjectReader(const Json& obj, std::string path, ErrorFormat fmt)
        : obj_(obj), path_(std::move(path)), fmt_(std::move(fmt)) {
        if (!obj_.is_object()) fail("", "expected an object");
    }

    [[noreturn]] void fail(const std::string& key, const std::string& msg) const {
        throw ConfigError(fmt_(path_, key, msg));
    }

    bool has(const char* key) const { return obj_.contains(key); }

    template <typename T>
    bool get(const char* key, T& out) {
        auto it = obj_.find(key);
        if (it == obj_.end()) return false;
        used_.insert(key);
        try {
            out = it->template get<T>();
        } catch (const nlohmann::json::exception&) {
            fail(key, "has the wrong type (" + std::string(it->type_name()) + ")");
        }
        return true;
    }

    template <typename T>
    T require(const char* key) {
        T v{};
        if (!get(key, v)) fail(key, "is required");
        return v;
    }

    const Json* child(const char* key) {
        auto it = obj_.find(key);
        if (it == obj_.end()) return nullptr;
        used_.insert(key);
        return &*it;
    }

    std::string sub(const char* key) const { return path_.empty() ? key : path_ + "." + key; }
    const ErrorFormat& format() const { return fmt_; }

    void finish() const {
        for (auto it = obj_.begin(); it != obj_.end(); ++it) {
            if (!used_.count(it.key())) fail(it.key(), "is not a known key");
        }
    }

private:
    const Json& obj_;
    std::string path_;
    ErrorFormat fmt_;
    std::set<std::string> used_;
};

inline Json topology_json(const ClusterTopology& t) {
    Json j;
    j["pes_per_tile"] = t.pes_per_tile;
    j["banks_per_tile"] = t.banks_per_tile;
    j["tiles_per_subgroup"] = t.tiles_per_subgroup;
    j["subgroups_per_group"] = t.subgroups_per_group;
    j["groups"] = t.groups;
    j["rows_per_bank"] = t.rows_per_bank;
    j["word_bytes"] = t.word_bytes;
    j["level_latency"] = t.level_latency;
    return j;
}

/// Reads a topology object; "preset" picks the starting point and other
/// keys override it.
inline ClusterTopology read_topology(const Json& j, const std::string& path, const ErrorFormat& fmt) {
    ObjectReader r(j, path, fmt);
    ClusterTopology t;
    std::string preset = "terapool";
    r.get("preset", preset);
    if (preset == "desk") {
        t = desk_default();
    } else if (preset != "terapool") {
        r.fail("preset", "must be \"terapool\" or \"desk\"");
    }
    r.get("pes_per_tile", t.pes_per_tile);
    r.get("banks_per_tile", t.banks_per_tile);
    r.get("tiles_per_subgroup", t.tiles_per_subgroup);
    r.get("subgroups_per_group", t.subgroups_per_group);
    r.get("groups", t.groups);
    r.get("rows_per_bank", t.rows_per_bank);
    r.get("word_bytes", t.word_bytes);
    r.get("level_latency", t.level_latency);
    r.finish();
    try {
        t.validate();
    } catch (const ConfigError& e) {
        r.fail("", e.what());
    }
    return t;
}

inline Json engine_json(const EngineParams& e, const KernelOptions& k) {
    Json j;
    j["outstanding"] = e.outstanding;
    j["port_slots"] = std::array<std::uint32_t, 3>{e.port_slots[1], e.port_slots[2], e.port_slots[3]};
    j["port_period"] = e.port_period;
    j["dma_words_per_cycle"] = e.dma.words_per_cycle;
    j["l2_latency"] = e.dma.l2_latency;
    j["horizon_log2"] = e.horizon_log2;
    j["mac_latency"] = k.lat.mac;
    j["alu_latency"] = k.lat.alu;
    j["div_latency"] = k.lat.div;
    j["alloc_cost"] = k.alloc_cost;
    return j;
}

inline void read_engine(const Json& j, const std::string& path, const ErrorFormat& fmt, EngineParams& e,
                        KernelOptions& k) {
    ObjectReader r(j, path, fmt);
    r.get("outstanding", e.outstanding);
    std::array<std::uint32_t, 3> slots{e.port_slots[1], e.port_slots[2], e.port_slots[3]};
    if (r.get("port_slots", slots)) {
        for (std::size_t i = 0; i < 3; ++i) e.port_slots[i + 1] = slots[i];
    }
    r.get("port_period", e.port_period);
    r.get("dma_words_per_cycle", e.dma.words_per_cycle);
    r.get("l2_latency", e.dma.l2_latency);
    r.get("horizon_log2", e.horizon_log2);
    r.get("mac_latency", k.lat.mac);
    r.get("alu_latency", k.lat.alu);
    r.get("div_latency", k.lat.div);
    r.get("alloc_cost", k.alloc_cost);
    r.finish();
    try {
        e.validate();
    } catch (const ConfigError& ex) {
        r.fail("", ex.what());
    }
    if (k.lat.mac == 0 || k.lat.alu == 0 || k.lat.div == 0) r.fail("", "compute latencies must be >= 1");
}

}  // namespace das::io
