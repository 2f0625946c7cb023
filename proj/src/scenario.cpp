#include "das/scenario.hpp"

#include "das/errors.hpp"
#include "json_io.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <sstream>

namespace das {

namespace {

using io::Json;
using io::ObjectReader;

const std::map<std::string, std::vector<std::string>>& kernel_keys() {
    static const std::map<std::string, std::vector<std::string>> keys = {
        {"gemv", {"M", "N", "parallel"}},
        {"gemm", {"M", "N", "P", "parallel"}},
        {"attention", {"S", "head_dim", "tile_s", "heads"}},
        {"layernorm", {"tokens", "E"}},
        {"vit", {"model", "image", "patch", "embed", "head_dim", "mlp_ratio", "tile_s"}},
        {"compute", {"ops"}},
    };
    return keys;
}

const std::vector<std::string>& fixed_paths() {
    static const std::vector<std::string> paths = {
        "topology.preset",         "topology.pes_per_tile",   "topology.banks_per_tile",
        "topology.tiles_per_subgroup", "topology.subgroups_per_group", "topology.groups",
        "topology.rows_per_bank",  "topology.word_bytes",     "topology.level_latency",
        "heap.base",               "heap.size",               "engine.outstanding",
        "engine.port_slots",       "engine.port_period",       "engine.dma_words_per_cycle", "engine.l2_latency",
        "engine.horizon_log2",     "engine.mac_latency",      "engine.alu_latency",
        "engine.div_latency",      "engine.alloc_cost",
    };
    return paths;
}

std::size_t line_at(std::string_view text, std::size_t pos) {
    return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + std::min(pos, text.size()), '\n'));
}

// Position of `"name"` used as an object key at or after `from`.
std::size_t find_key(std::string_view text, const std::string& name, std::size_t from) {
    const std::string quoted = "\"" + name + "\"";
    for (std::size_t pos = text.find(quoted, from); pos != std::string_view::npos;
         pos = text.find(quoted, pos + 1)) {
        std::size_t after = pos + quoted.size();
        while (after < text.size() && std::isspace(static_cast<unsigned char>(text[after]))) ++after;
        if (after < text.size() && text[after] == ':') return pos;
    }
    return std::string_view::npos;
}

// Best-effort source line of `path.key`; 0 when it cannot be located.
std::size_t locate(std::string_view text, const std::string& path, const std::string& key) {
    std::vector<std::string> parts;
    std::stringstream ss(path);
    for (std::string part; std::getline(ss, part, '.');) {
        if (!part.empty()) parts.push_back(part);
    }
    if (!key.empty()) parts.push_back(key);
    std::size_t pos = 0;
    bool found = false;
    for (const auto& part : parts) {
        const std::size_t next = find_key(text, part, pos);
        if (next == std::string_view::npos) break;
        pos = next;
        found = true;
    }
    return found ? line_at(text, pos) : 0;
}

KernelSpec read_kernel(ObjectReader& top, const io::ErrorFormat& fmt) {
    const Json* j = top.child("kernel");
    if (!j) top.fail("kernel", "is required");
    ObjectReader r(*j, "kernel", fmt);
    KernelSpec k;
    k.name = r.require<std::string>("name");
    const auto it = kernel_keys().find(k.name);
    if (it == kernel_keys().end()) {
        r.fail("name", "unknown kernel '" + k.name + "' (expected gemv, gemm, attention, layernorm, vit or compute)");
    }
    auto positive = [&r](const char* key, std::uint32_t& v, bool required) {
        const bool present = required ? (v = r.require<std::uint32_t>(key), true) : r.get(key, v);
        if (present && v == 0) r.fail(key, "must be positive");
    };
    if (k.name == "gemv") {
        positive("M", k.M, true);
        positive("N", k.N, true);
        positive("parallel", k.parallel, false);
    } else if (k.name == "gemm") {
        positive("M", k.M, true);
        positive("N", k.N, true);
        positive("P", k.P, true);
        positive("parallel", k.parallel, false);
    } else if (k.name == "attention") {
        positive("S", k.S, true);
        positive("head_dim", k.head_dim, true);
        positive("tile_s", k.tile_s, true);
        positive("heads", k.heads, false);
    } else if (k.name == "layernorm") {
        positive("tokens", k.tokens, true);
        positive("E", k.E, true);
    } else if (k.name == "vit") {
        r.get("model", k.vit.name);
        positive("image", k.vit.image, false);
        positive("patch", k.vit.patch, false);
        positive("embed", k.vit.embed, false);
        positive("head_dim", k.vit.head_dim, false);
        positive("mlp_ratio", k.vit.mlp_ratio, false);
        positive("tile_s", k.vit.tile_s, false);
        try {
            k.vit.validate();
        } catch (const ConfigError& e) {
            r.fail("", e.what());
        }
    } else {
        k.ops = r.require<std::uint32_t>("ops");
    }
    r.finish();
    return k;
}

}  // namespace

bool Scenario::has_tag(std::string_view tag) const {
    return std::find(tags.begin(), tags.end(), tag) != tags.end();
}

Scenario parse_scenario(std::string_view text, const std::string& source) {
    const io::ErrorFormat fmt = [text, &source](const std::string& path, const std::string& key,
                                                const std::string& msg) {
        std::string where = path;
        if (!key.empty()) where += (where.empty() ? "" : ".") + key;
        const std::size_t line = locate(text, path, key);
        return source + (line ? ":" + std::to_string(line) : std::string()) + ": " +
               (where.empty() ? "" : where + ": ") + msg;
    };
    Json j;
    try {
        j = Json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        const std::size_t line = e.byte ? line_at(text, e.byte - 1) : 1;
        std::string what = e.what();
        if (const auto p = what.find("parse error"); p != std::string::npos) what = what.substr(p);
        throw ConfigError(source + ":" + std::to_string(line) + ": invalid JSON: " + what);
    }
    ObjectReader r(j, "", fmt);
    const auto schema = r.require<std::string>("schema");
    if (schema != kScenarioSchema) {
        r.fail("schema", "is '" + schema + "', expected '" + std::string(kScenarioSchema) + "'");
    }
    Scenario sc;
    sc.name = r.require<std::string>("name");
    if (sc.name.empty()) r.fail("name", "must not be empty");
    r.get("description", sc.description);
    r.get("tags", sc.tags);
    if (const Json* t = r.child("topology")) sc.topology = io::read_topology(*t, "topology", fmt);
    if (const Json* e = r.child("engine")) io::read_engine(*e, "engine", fmt, sc.engine, sc.kernel_opts);
    if (const Json* h = r.child("heap")) {
        ObjectReader hr(*h, "heap", fmt);
        hr.get("base", sc.kernel_opts.heap_base);
        hr.get("size", sc.kernel_opts.heap_size);
        hr.finish();
        const std::uint64_t total = sc.topology.total_bytes();
        const std::uint64_t size = sc.kernel_opts.heap_size ? sc.kernel_opts.heap_size : total - std::min(total, sc.kernel_opts.heap_base);
        if (sc.kernel_opts.heap_base >= total || sc.kernel_opts.heap_base + size > total) {
            hr.fail("", "heap exceeds the " + std::to_string(total) + "-byte L1");
        }
    }
    sc.kernel = read_kernel(r, fmt);
    std::vector<std::string> schemes;
    if (r.get("schemes", schemes)) {
        if (schemes.empty()) r.fail("schemes", "must name at least one scheme");
        sc.schemes.clear();
        for (const auto& s : schemes) {
            Scheme v{};
            try {
                v = parse_scheme(s);
            } catch (const ConfigError& e) {
                r.fail("schemes", e.what());
            }
            if (std::find(sc.schemes.begin(), sc.schemes.end(), v) != sc.schemes.end()) {
                r.fail("schemes", "lists '" + s + "' twice");
            }
            sc.schemes.push_back(v);
        }
    }
    r.get("output_dir", sc.output_dir);
    r.finish();
    return sc;
}

Scenario load_scenario(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError(path + ": cannot open file");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_scenario(ss.str(), path);
}

std::string resolve_axis(const Scenario& base, const std::string& axis) {
    std::vector<std::string> known = fixed_paths();
    for (const auto& k : kernel_keys().at(base.kernel.name)) known.push_back("kernel." + k);
    if (axis.find('.') != std::string::npos) {
        if (std::find(known.begin(), known.end(), axis) == known.end()) {
            throw ConfigError("unknown sweep axis '" + axis + "' for kernel " + base.kernel.name);
        }
        return axis;
    }
    std::vector<std::string> hits;
    for (const auto& k : known) {
        if (k.substr(k.rfind('.') + 1) == axis) hits.push_back(k);
    }
    if (hits.empty()) throw ConfigError("unknown sweep axis '" + axis + "' for kernel " + base.kernel.name);
    if (hits.size() > 1) throw ConfigError("ambiguous sweep axis '" + axis + "'; use a dotted path");
    return hits.front();
}

std::string with_axis(std::string_view text, const std::string& source, const std::string& path,
                      const std::string& value) {
    Json j;
    try {
        j = Json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(source + ": invalid JSON: " + e.what());
    }
    Json v;
    try {
        v = Json::parse(value);
    } catch (const nlohmann::json::parse_error&) {
        v = value;
    }
    Json* node = &j;
    std::stringstream ss(path);
    std::vector<std::string> parts;
    for (std::string part; std::getline(ss, part, '.');) parts.push_back(part);
    for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
        if (!node->is_object()) throw ConfigError(source + ": cannot set '" + path + "'");
        node = &(*node)[parts[i]];
        if (node->is_null()) *node = Json::object();
    }
    if (!node->is_object()) throw ConfigError(source + ": cannot set '" + path + "'");
    (*node)[parts.back()] = v;
    return j.dump(2) + "\n";
}

}  // namespace das
