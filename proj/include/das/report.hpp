#pragma once

#include "das/engine.hpp"
#include "das/kernels.hpp"
#include "das/topology.hpp"

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace das {

inline constexpr std::string_view kReportSchema = "das-sim/report/1";

/// One simulated run with everything needed to interpret it later.
struct RunReport {
    std::string scenario;
    Scheme scheme = Scheme::Das;
    ClusterTopology topology;
    EngineParams engine;
    KernelOptions kernel_opts;
    std::string kernel;
    std::string dims;
    std::uint32_t parallel = 1;
    std::uint64_t macs = 0;
    SimReport sim;
    /// Set on a Das run when the matching interleaved run exists.
    std::optional<double> speedup;
    std::string baseline;
};

bool operator==(const RunReport& a, const RunReport& b);

struct StageStats {
    std::string stage;
    std::uint64_t cycles = 0;
    StallCounters counters;  // summed over PEs
    double utilization = 0;  // instr / (cycles * PEs)
};

/// Phases grouped by stage label, in order of first appearance. Phases with
/// an empty stage are skipped.
std::vector<StageStats> stage_breakdown(const SimReport& sim);

std::string to_json(const RunReport& report);
/// Throws ConfigError naming `source` on malformed input or schema mismatch.
RunReport parse_report(std::string_view text, const std::string& source);

/// One row per PE: pe,cycles,instr,lsu,raw,ins,wfi.
std::string to_csv(const RunReport& report);

/// Table with columns Mapping Scheme, Workload Dimension, #Parallel,
/// Utilization (IPC), Speedup. Speedup is filled for Das rows whose
/// interleaved partner (same scenario) is present.
std::string markdown_table(const std::vector<RunReport>& reports);

/// Plot-ready stall fractions: one row per (run, phase stage) and one for
/// the whole run.
std::string stall_bars_csv(const std::vector<RunReport>& reports);

/// Throws ConfigError when the reports were produced on different topologies.
void check_comparable(const std::vector<RunReport>& reports, const std::vector<std::string>& sources);

/// cycles_interleaved / cycles_das.
double speedup(const RunReport& das, const RunReport& interleaved);

}  // namespace das
