#include "das/report.hpp"

#include "das/errors.hpp"
#include "json_io.hpp"

#include <cstdio>
#include <map>
#include <sstream>

namespace das {

namespace {

using io::Json;
using io::ObjectReader;

std::string fixed(double v, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

void put_counters(Json& j, const StallCounters& c) {
    j["instr"] = c.instr;
    j["lsu"] = c.lsu;
    j["raw"] = c.raw;
    j["ins"] = c.ins;
    j["wfi"] = c.wfi;
}

void read_counters(ObjectReader& r, StallCounters& c) {
    c.instr = r.require<std::uint64_t>("instr");
    c.lsu = r.require<std::uint64_t>("lsu");
    c.raw = r.require<std::uint64_t>("raw");
    c.ins = r.require<std::uint64_t>("ins");
    c.wfi = r.require<std::uint64_t>("wfi");
}

Json map_json(const MapConfig& m) {
    Json j;
    j["kind"] = std::string(to_string(m.kind));
    j["p"] = m.p;
    j["s"] = m.s;
    j["base"] = m.base_addr;
    j["size"] = m.size_bytes;
    return j;
}

MapConfig read_map(const Json& j, const std::string& path, const io::ErrorFormat& fmt) {
    ObjectReader r(j, path, fmt);
    MapConfig m;
    const auto kind = r.require<std::string>("kind");
    if (kind == "das") {
        m.kind = MapKind::Das;
    } else if (kind != "interleaved") {
        r.fail("kind", "must be \"das\" or \"interleaved\"");
    }
    m.p = r.require<unsigned>("p");
    m.s = r.require<unsigned>("s");
    m.base_addr = r.require<std::uint64_t>("base");
    m.size_bytes = r.require<std::uint64_t>("size");
    r.finish();
    return m;
}

constexpr const char* kLevelKeys[kNumLevels] = {"tile", "subgroup", "group", "remote"};

const Json& array_at(ObjectReader& r, const char* key) {
    const Json* j = r.child(key);
    if (!j) r.fail(key, "is required");
    if (!j->is_array()) r.fail(key, "must be an array");
    return *j;
}

std::string kernel_label(const std::string& kernel) {
    if (kernel == "gemv") return "GEMV";
    if (kernel == "gemm") return "GEMM";
    if (kernel == "attention") return "SA";
    if (kernel == "layernorm") return "Norm";
    if (kernel == "vit") return "ViT";
    return kernel;
}

double utilization(std::uint64_t instr, std::uint64_t cycles, std::size_t pes) {
    if (cycles == 0 || pes == 0) return 0.0;
    return static_cast<double>(instr) / (static_cast<double>(cycles) * static_cast<double>(pes));
}

bool same_events(const std::vector<EventRecord>& a, const std::vector<EventRecord>& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const auto& x = a[i];
        const auto& y = b[i];
        if (x.cycle != y.cycle || x.event.kind != y.event.kind || x.event.name != y.event.name ||
            x.event.addr != y.event.addr || x.event.bytes != y.event.bytes || !(x.event.config == y.event.config) ||
            x.event.epoch != y.event.epoch) {
            return false;
        }
    }
    return true;
}

}  // namespace

bool operator==(const RunReport& a, const RunReport& b) {
    return a.scenario == b.scenario && a.scheme == b.scheme && a.topology == b.topology && a.engine == b.engine &&
           a.kernel_opts == b.kernel_opts && a.kernel == b.kernel && a.dims == b.dims && a.parallel == b.parallel &&
           a.macs == b.macs && a.sim.cycles == b.sim.cycles && a.sim.pes == b.sim.pes &&
           a.sim.phases == b.sim.phases && same_events(a.sim.events, b.sim.events) && a.sim.ops == b.sim.ops &&
           a.sim.accesses == b.sim.accesses && a.speedup == b.speedup && a.baseline == b.baseline;
}

std::vector<StageStats> stage_breakdown(const SimReport& sim) {
    std::vector<StageStats> out;
    std::map<std::string, std::size_t> index;
    for (const auto& ph : sim.phases) {
        if (ph.stage.empty()) continue;
        auto [it, fresh] = index.emplace(ph.stage, out.size());
        if (fresh) out.push_back({ph.stage, 0, {}, 0});
        StageStats& s = out[it->second];
        s.cycles += ph.cycles;
        s.counters += ph.counters;
    }
    for (auto& s : out) s.utilization = utilization(s.counters.instr, s.cycles, sim.pes.size());
    return out;
}

std::string to_json(const RunReport& r) {
    Json j;
    j["schema"] = std::string(kReportSchema);
    j["scenario"] = r.scenario;
    j["scheme"] = std::string(to_string(r.scheme));
    j["topology"] = io::topology_json(r.topology);
    j["engine"] = io::engine_json(r.engine, r.kernel_opts);
    j["heap"] = {{"base", r.kernel_opts.heap_base}, {"size", r.kernel_opts.heap_size}};
    j["workload"] = {{"kernel", r.kernel}, {"dims", r.dims}, {"parallel", r.parallel}, {"macs", r.macs}};

    const StallCounters tot = r.sim.totals();
    Json agg;
    agg["cycles"] = r.sim.cycles;
    agg["ipc_mean"] = r.sim.ipc_mean();
    put_counters(agg, tot);
    if (r.speedup) agg["speedup"] = *r.speedup;
    if (!r.baseline.empty()) agg["baseline"] = r.baseline;
    j["aggregate"] = agg;

    j["ops"] = {{"loads", r.sim.ops.loads}, {"stores", r.sim.ops.stores}, {"macs", r.sim.ops.macs},
                {"alus", r.sim.ops.alus},   {"divs", r.sim.ops.divs},     {"barriers", r.sim.ops.barriers},
                {"dma_ops", r.sim.ops.dma_ops}};
    Json acc;
    for (std::size_t l = 0; l < kNumLevels; ++l) acc[kLevelKeys[l]] = r.sim.accesses[l];
    j["accesses"] = acc;

    Json phases = Json::array();
    for (const auto& ph : r.sim.phases) {
        Json p;
        p["name"] = ph.name;
        p["stage"] = ph.stage;
        p["start"] = ph.start;
        p["cycles"] = ph.cycles;
        put_counters(p, ph.counters);
        phases.push_back(std::move(p));
    }
    j["phases"] = std::move(phases);

    Json stages = Json::array();
    for (const auto& s : stage_breakdown(r.sim)) {
        Json st;
        st["stage"] = s.stage;
        st["cycles"] = s.cycles;
        st["utilization"] = s.utilization;
        put_counters(st, s.counters);
        stages.push_back(std::move(st));
    }
    j["stages"] = std::move(stages);

    Json allocs = Json::array();
    for (const auto& e : r.sim.events) {
        Json a;
        a["op"] = e.event.kind == AllocEventKind::Malloc ? "malloc" : "free";
        a["name"] = e.event.name;
        a["addr"] = e.event.addr;
        a["bytes"] = e.event.bytes;
        a["map"] = map_json(e.event.config);
        a["epoch"] = e.event.epoch;
        a["cycle"] = e.cycle;
        allocs.push_back(std::move(a));
    }
    j["allocations"] = std::move(allocs);

    Json pes = Json::array();
    for (std::size_t i = 0; i < r.sim.pes.size(); ++i) {
        Json p;
        p["pe"] = i;
        p["cycles"] = r.sim.pes[i].cycles;
        put_counters(p, r.sim.pes[i].counters);
        pes.push_back(std::move(p));
    }
    j["pes"] = std::move(pes);
    return j.dump(2) + "\n";
}

RunReport parse_report(std::string_view text, const std::string& source) {
    const io::ErrorFormat fmt = [&source](const std::string& path, const std::string& key, const std::string& msg) {
        std::string where = path;
        if (!key.empty()) where += (where.empty() ? "" : ".") + key;
        return source + ": " + (where.empty() ? "" : where + ": ") + msg;
    };
    Json j;
    try {
        j = Json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(source + ": not valid JSON: " + e.what());
    }
    ObjectReader r(j, "", fmt);
    const auto schema = r.require<std::string>("schema");
    if (schema != kReportSchema) {
        r.fail("schema", "is '" + schema + "', expected '" + std::string(kReportSchema) + "'");
    }
    RunReport out;
    out.scenario = r.require<std::string>("scenario");
    try {
        out.scheme = parse_scheme(r.require<std::string>("scheme"));
    } catch (const ConfigError& e) {
        r.fail("scheme", e.what());
    }
    const Json* topo = r.child("topology");
    if (!topo) r.fail("topology", "is required");
    out.topology = io::read_topology(*topo, "topology", fmt);
    const Json* eng = r.child("engine");
    if (!eng) r.fail("engine", "is required");
    io::read_engine(*eng, "engine", fmt, out.engine, out.kernel_opts);
    {
        const Json* heap = r.child("heap");
        if (!heap) r.fail("heap", "is required");
        ObjectReader h(*heap, "heap", fmt);
        out.kernel_opts.heap_base = h.require<std::uint64_t>("base");
        out.kernel_opts.heap_size = h.require<std::uint64_t>("size");
        h.finish();
    }
    {
        const Json* w = r.child("workload");
        if (!w) r.fail("workload", "is required");
        ObjectReader wr(*w, "workload", fmt);
        out.kernel = wr.require<std::string>("kernel");
        out.dims = wr.require<std::string>("dims");
        out.parallel = wr.require<std::uint32_t>("parallel");
        out.macs = wr.require<std::uint64_t>("macs");
        wr.finish();
    }
    StallCounters declared;
    {
        const Json* a = r.child("aggregate");
        if (!a) r.fail("aggregate", "is required");
        ObjectReader ar(*a, "aggregate", fmt);
        out.sim.cycles = ar.require<std::uint64_t>("cycles");
        ar.require<double>("ipc_mean");  // derived
        read_counters(ar, declared);
        double sp = 0;
        if (ar.get("speedup", sp)) out.speedup = sp;
        ar.get("baseline", out.baseline);
        ar.finish();
    }
    {
        const Json* o = r.child("ops");
        if (!o) r.fail("ops", "is required");
        ObjectReader orr(*o, "ops", fmt);
        out.sim.ops.loads = orr.require<std::uint64_t>("loads");
        out.sim.ops.stores = orr.require<std::uint64_t>("stores");
        out.sim.ops.macs = orr.require<std::uint64_t>("macs");
        out.sim.ops.alus = orr.require<std::uint64_t>("alus");
        out.sim.ops.divs = orr.require<std::uint64_t>("divs");
        out.sim.ops.barriers = orr.require<std::uint64_t>("barriers");
        out.sim.ops.dma_ops = orr.require<std::uint64_t>("dma_ops");
        orr.finish();
    }
    {
        const Json* a = r.child("accesses");
        if (!a) r.fail("accesses", "is required");
        ObjectReader ar(*a, "accesses", fmt);
        for (std::size_t l = 0; l < kNumLevels; ++l) out.sim.accesses[l] = ar.require<std::uint64_t>(kLevelKeys[l]);
        ar.finish();
    }
    const Json& phases = array_at(r, "phases");
    for (std::size_t i = 0; i < phases.size(); ++i) {
        ObjectReader pr(phases[i], "phases[" + std::to_string(i) + "]", fmt);
        PhaseStats ph;
        ph.name = pr.require<std::string>("name");
        ph.stage = pr.require<std::string>("stage");
        ph.start = pr.require<std::uint64_t>("start");
        ph.cycles = pr.require<std::uint64_t>("cycles");
        read_counters(pr, ph.counters);
        pr.finish();
        out.sim.phases.push_back(std::move(ph));
    }
    array_at(r, "stages");  // derived from phases
    const Json& allocs = array_at(r, "allocations");
    for (std::size_t i = 0; i < allocs.size(); ++i) {
        const std::string path = "allocations[" + std::to_string(i) + "]";
        ObjectReader ar(allocs[i], path, fmt);
        EventRecord e;
        const auto op = ar.require<std::string>("op");
        if (op == "free") {
            e.event.kind = AllocEventKind::Free;
        } else if (op != "malloc") {
            ar.fail("op", "must be \"malloc\" or \"free\"");
        }
        e.event.name = ar.require<std::string>("name");
        e.event.addr = ar.require<std::uint64_t>("addr");
        e.event.bytes = ar.require<std::uint64_t>("bytes");
        const Json* m = ar.child("map");
        if (!m) ar.fail("map", "is required");
        e.event.config = read_map(*m, path + ".map", fmt);
        e.event.epoch = ar.require<int>("epoch");
        e.cycle = ar.require<std::uint64_t>("cycle");
        ar.finish();
        out.sim.events.push_back(std::move(e));
    }
    const Json& pes = array_at(r, "pes");
    for (std::size_t i = 0; i < pes.size(); ++i) {
        ObjectReader pr(pes[i], "pes[" + std::to_string(i) + "]", fmt);
        if (pr.require<std::size_t>("pe") != i) pr.fail("pe", "is out of order");
        PeStats ps;
        ps.cycles = pr.require<std::uint64_t>("cycles");
        read_counters(pr, ps.counters);
        pr.finish();
        out.sim.pes.push_back(ps);
    }
    r.finish();
    if (!(out.sim.totals() == declared)) r.fail("aggregate", "counters disagree with the per-PE rows");
    return out;
}

std::string to_csv(const RunReport& r) {
    std::ostringstream os;
    os << "pe,cycles,instr,lsu,raw,ins,wfi\n";
    for (std::size_t i = 0; i < r.sim.pes.size(); ++i) {
        const auto& p = r.sim.pes[i];
        os << i << ',' << p.cycles << ',' << p.counters.instr << ',' << p.counters.lsu << ',' << p.counters.raw
           << ',' << p.counters.ins << ',' << p.counters.wfi << '\n';
    }
    return os.str();
}

double speedup(const RunReport& das, const RunReport& interleaved) {
    if (das.sim.cycles == 0) return 1.0;
    return static_cast<double>(interleaved.sim.cycles) / static_cast<double>(das.sim.cycles);
}

void check_comparable(const std::vector<RunReport>& reports, const std::vector<std::string>& sources) {
    for (std::size_t i = 1; i < reports.size(); ++i) {
        if (!(reports[i].topology == reports[0].topology)) {
            const std::string a = i < sources.size() ? sources[i] : "report " + std::to_string(i);
            const std::string b = sources.empty() ? "report 0" : sources[0];
            throw ConfigError(a + ": topology differs from " + b + "; reports are not comparable");
        }
    }
}

std::string markdown_table(const std::vector<RunReport>& reports) {
    std::vector<std::string> speed(reports.size(), "-");
    bool any = false;
    for (std::size_t i = 0; i < reports.size(); ++i) {
        const auto& r = reports[i];
        if (r.scheme != Scheme::Das) continue;
        std::optional<double> s = r.speedup;
        for (std::size_t k = 0; k < reports.size() && !s; ++k) {
            const auto& o = reports[k];
            if (o.scheme == Scheme::Interleaved && o.scenario == r.scenario && o.dims == r.dims &&
                o.kernel == r.kernel && o.parallel == r.parallel) {
                s = speedup(r, o);
            }
        }
        if (s) {
            speed[i] = fixed(*s, 2) + "x";
            any = true;
        }
    }
    std::ostringstream os;
    os << "| Mapping Scheme | Workload Dimension | #Parallel | Utilization (IPC) |";
    if (any) os << " Speedup |";
    os << "\n|---|---|---:|---:|";
    if (any) os << "---:|";
    os << '\n';
    for (std::size_t i = 0; i < reports.size(); ++i) {
        const auto& r = reports[i];
        os << "| " << (r.scheme == Scheme::Das ? "DAS" : "Interleaved") << " | " << kernel_label(r.kernel) << ' '
           << r.dims << " | " << r.parallel << " | " << fixed(r.sim.ipc_mean(), 2) << " |";
        if (any) os << ' ' << speed[i] << " |";
        os << '\n';
    }
    return os.str();
}

std::string stall_bars_csv(const std::vector<RunReport>& reports) {
    std::ostringstream os;
    os << "scenario,scheme,stage,cycles,instr,lsu,raw,ins,wfi\n";
    auto row = [&os](const RunReport& r, const std::string& stage, std::uint64_t cycles, const StallCounters& c) {
        const double denom = static_cast<double>(cycles) * static_cast<double>(r.sim.pes.size());
        auto frac = [denom](std::uint64_t v) { return fixed(denom > 0 ? static_cast<double>(v) / denom : 0.0, 6); };
        os << r.scenario << ',' << to_string(r.scheme) << ',' << stage << ',' << cycles << ',' << frac(c.instr)
           << ',' << frac(c.lsu) << ',' << frac(c.raw) << ',' << frac(c.ins) << ',' << frac(c.wfi) << '\n';
    };
    for (const auto& r : reports) {
        for (const auto& s : stage_breakdown(r.sim)) row(r, s.stage, s.cycles, s.counters);
        row(r, "total", r.sim.cycles, r.sim.totals());
    }
    return os.str();
}

}  // namespace das
