#pragma once

#include "das/engine.hpp"
#include "das/kernels.hpp"
#include "das/topology.hpp"

#include <string>
#include <string_view>
#include <vector>

namespace das {

inline constexpr std::string_view kScenarioSchema = "das-sim/scenario/1";

/// Kernel selection and shape. Only the fields of the named kernel are read
/// from a scenario file.
struct KernelSpec {
    std::string name;  // gemv, gemm, attention, layernorm, vit, compute
    // gemv / gemm
    std::uint32_t M = 0;
    std::uint32_t N = 0;
    std::uint32_t P = 0;
    std::uint32_t parallel = 1;
    // attention
    std::uint32_t S = 0;
    std::uint32_t head_dim = 0;
    std::uint32_t tile_s = 0;
    std::uint32_t heads = 1;
    // layernorm
    std::uint32_t tokens = 0;
    std::uint32_t E = 0;
    // vit
    VitConfig vit;
    // compute
    std::uint32_t ops = 0;
};

struct Scenario {
    std::string name;
    std::string description;
    std::vector<std::string> tags;
    ClusterTopology topology;
    EngineParams engine;
    KernelOptions kernel_opts;
    KernelSpec kernel;
    std::vector<Scheme> schemes{Scheme::Das, Scheme::Interleaved};
    /// Relative to the scenario file; empty means the caller decides.
    std::string output_dir;

    bool has_tag(std::string_view tag) const;
};

/// Parse a scenario document. Errors are ConfigError with messages of the
/// form "<source>:<line>: <key path>: <problem>".
Scenario parse_scenario(std::string_view text, const std::string& source);
Scenario load_scenario(const std::string& path);

/// Resolve a sweep axis to its full dotted path. Accepts a dotted path
/// ("engine.outstanding") or a leaf name that is unique for the scenario's
/// kernel ("head_dim"). Throws ConfigError for unknown or ambiguous axes.
std::string resolve_axis(const Scenario& base, const std::string& axis);

/// Return `text` with the field at `path` set to `value` (parsed as JSON
/// when possible, otherwise taken as a string).
std::string with_axis(std::string_view text, const std::string& source, const std::string& path,
                      const std::string& value);

}  // namespace das
