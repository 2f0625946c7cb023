// dassim: run scenarios, sweep one parameter, merge reports.
//
// Exit codes: 0 success, 1 simulation fault, 2 input error.

#include "das/errors.hpp"
#include "das/report.hpp"
#include "das/runner.hpp"
#include "das/scenario.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <utility>

namespace fs = std::filesystem;

namespace {

constexpr int kOk = 0;
constexpr int kSimFault = 1;
constexpr int kInputError = 2;

struct Formats {
    bool json = true;
    bool csv = true;
    bool md = true;
};

Formats parse_formats(const std::vector<std::string>& list) {
    if (list.empty()) return {};
    Formats f{false, false, false};
    for (const auto& s : list) {
        if (s == "json") f.json = true;
        else if (s == "csv") f.csv = true;
        else if (s == "md") f.md = true;
        else throw das::ConfigError("unknown format '" + s + "' (expected json, csv or md)");
    }
    return f;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw das::ConfigError(path + ": cannot open file");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

using Outputs = std::vector<std::pair<fs::path, std::string>>;

// All-or-nothing: every file is staged next to its target, then renamed.
void commit(const Outputs& outs) {
    std::vector<fs::path> staged;
    try {
        for (const auto& [path, text] : outs) {
            fs::create_directories(path.parent_path().empty() ? fs::path(".") : path.parent_path());
            fs::path tmp = path;
            tmp += ".partial";
            std::ofstream f(tmp, std::ios::binary);
            f << text;
            f.close();
            if (!f) throw std::runtime_error("cannot write " + path.string());
            staged.push_back(tmp);
        }
    } catch (...) {
        for (const auto& t : staged) fs::remove(t);
        throw;
    }
    for (std::size_t i = 0; i < outs.size(); ++i) fs::rename(staged[i], outs[i].first);
}

fs::path output_dir(const std::string& flag, const das::Scenario& sc, const std::string& scenario_path) {
    if (!flag.empty()) return flag;
    if (!sc.output_dir.empty()) return fs::path(scenario_path).parent_path() / sc.output_dir;
    return "out";
}

std::string fmt(double v, const char* spec) {
    char buf[64];
    std::snprintf(buf, sizeof buf, spec, v);
    return buf;
}

void add_reports(Outputs& outs, const fs::path& dir, const std::vector<das::RunReport>& reports, const Formats& f) {
    for (const auto& r : reports) {
        const std::string stem = r.scenario + "." + std::string(das::to_string(r.scheme));
        if (f.json) outs.emplace_back(dir / (stem + ".json"), das::to_json(r));
        if (f.csv) outs.emplace_back(dir / (stem + ".csv"), das::to_csv(r));
    }
}

void print_summary(const std::vector<das::RunReport>& reports) {
    for (const auto& r : reports) {
        std::cout << r.scenario << " [" << das::to_string(r.scheme) << "] cycles=" << r.sim.cycles
                  << " ipc=" << fmt(r.sim.ipc_mean(), "%.3f");
        if (r.speedup) std::cout << " speedup=" << fmt(*r.speedup, "%.2f") << "x";
        std::cout << "\n";
    }
}

int cmd_run(const std::string& file, const std::string& out_flag, const Formats& f) {
    const das::Scenario sc = das::load_scenario(file);
    const auto reports = das::run_scenario(sc);
    const fs::path dir = output_dir(out_flag, sc, file);
    Outputs outs;
    add_reports(outs, dir, reports, f);
    if (f.md) outs.emplace_back(dir / (sc.name + ".md"), das::markdown_table(reports));
    commit(outs);
    print_summary(reports);
    return kOk;
}

int cmd_sweep(const std::string& file, const std::string& axis, const std::vector<std::string>& values,
              const std::string& out_flag, const Formats& f) {
    const std::string text = read_file(file);
    const das::Scenario base = das::parse_scenario(text, file);
    const std::string path = das::resolve_axis(base, axis);
    if (values.empty()) {
        std::cerr << "warning: empty value list for axis '" << axis << "'; nothing to run\n";
        return kOk;
    }
    const std::string leaf = path.substr(path.rfind('.') + 1);
    std::vector<das::Scenario> runs;
    for (const auto& v : values) {
        const std::string label = file + "[" + leaf + "=" + v + "]";
        das::Scenario sc = das::parse_scenario(das::with_axis(text, label, path, v), label);
        sc.name = base.name + "@" + leaf + "=" + v;
        runs.push_back(std::move(sc));
    }
    std::vector<das::RunReport> all;
    for (const auto& sc : runs) {
        auto reports = das::run_scenario(sc);
        print_summary(reports);
        for (auto& r : reports) all.push_back(std::move(r));
    }
    const fs::path dir = output_dir(out_flag, base, file);
    Outputs outs;
    add_reports(outs, dir, all, f);
    const std::string stem = base.name + ".sweep." + leaf;
    outs.emplace_back(dir / (stem + ".csv"), das::stall_bars_csv(all));
    if (f.md) outs.emplace_back(dir / (stem + ".md"), das::markdown_table(all));
    commit(outs);
    return kOk;
}

int cmd_report(const std::vector<std::string>& files, const std::string& bars, const std::string& out_flag) {
    std::vector<das::RunReport> reports;
    for (const auto& file : files) reports.push_back(das::parse_report(read_file(file), file));
    das::check_comparable(reports, files);
    const std::string table = das::markdown_table(reports);
    Outputs outs;
    if (!out_flag.empty()) outs.emplace_back(fs::path(out_flag) / "report.md", table);
    if (!bars.empty()) outs.emplace_back(bars, das::stall_bars_csv(reports));
    commit(outs);
    std::cout << table;
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Cycle-approximate simulator of a shared-L1 manycore cluster with dynamic address mapping"};
    app.require_subcommand(1);
    std::string out_dir;
    std::vector<std::string> formats;
    app.add_option("--out-dir", out_dir, "Directory for generated files");
    app.add_option("--format", formats, "Output formats to write (json, csv, md; default all)")->delimiter(',');

    std::string run_file;
    auto* run = app.add_subcommand("run", "Run a scenario under its configured schemes");
    run->add_option("file", run_file, "Scenario file")->required();
    run->fallthrough();

    std::string sweep_file, axis;
    std::vector<std::string> values;
    auto* sweep = app.add_subcommand("sweep", "Run a scenario once per value of one parameter");
    sweep->add_option("file", sweep_file, "Scenario file")->required();
    sweep->add_option("--axis", axis, "Parameter to vary (dotted path or unique leaf name)")->required();
    sweep->add_option("--values", values, "Comma-separated values")->delimiter(',')->expected(0, -1);
    sweep->fallthrough();

    std::vector<std::string> report_files;
    std::string bars;
    auto* report = app.add_subcommand("report", "Merge report files into one comparison table");
    report->add_option("files", report_files, "Report JSON files")->required();
    report->add_option("--bars", bars, "Also write stall-breakdown bar data (CSV) to this file");
    report->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kInputError;
    }

    try {
        const Formats f = parse_formats(formats);
        if (run->parsed()) return cmd_run(run_file, out_dir, f);
        if (sweep->parsed()) {
            std::vector<std::string> clean;
            for (auto& v : values) {
                if (!v.empty()) clean.push_back(v);
            }
            return cmd_sweep(sweep_file, axis, clean, out_dir, f);
        }
        return cmd_report(report_files, bars, out_dir);
    } catch (const das::ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kInputError;
    } catch (const das::SimFault& e) {
        std::cerr << "simulation fault: " << e.what() << "\n";
        return kSimFault;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kSimFault;
    }
}
