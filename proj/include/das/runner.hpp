#pragma once

#include "das/kernels.hpp"
#include "das/report.hpp"
#include "das/scenario.hpp"

#include <vector>

namespace das {

/// Build the kernel plan a scenario describes under `scheme`.
KernelPlan make_plan(const Scenario& sc, Scheme scheme);

/// Generate and simulate one scheme.
RunReport run_scheme(const Scenario& sc, Scheme scheme);

struct PairResult {
    RunReport das;
    RunReport interleaved;
    double speedup = 1.0;  // cycles_interleaved / cycles_das
};

/// Identical workloads under Das and interleaved mapping; the two runs
/// execute concurrently and share nothing.
PairResult run_pair(const Scenario& sc);

/// Every scheme the scenario lists, in listed order. When both schemes are
/// present the Das report carries the speedup.
std::vector<RunReport> run_scenario(const Scenario& sc);

}  // namespace das
