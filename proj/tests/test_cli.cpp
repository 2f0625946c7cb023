#include <gtest/gtest.h>

#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

struct Result {
    int code = -1;
    std::string out;
};

/// Run the CLI with `args`, capturing stdout and stderr together.
Result dassim(const std::string& args) {
    const std::string cmd = std::string(DASSIM_BIN) + " " + args + " 2>&1";
    Result r;
    FILE* p = popen(cmd.c_str(), "r");
    if (!p) return r;
    std::array<char, 4096> buf{};
    std::size_t n = 0;
    while ((n = fread(buf.data(), 1, buf.size(), p)) > 0) r.out.append(buf.data(), n);
    const int status = pclose(p);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

class Cli : public ::testing::Test {
protected:
    void SetUp() override {
        dir_ = fs::temp_directory_path() /
               ("dassim_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    std::string write(const std::string& name, const std::string& text) const {
        const auto path = dir_ / name;
        std::ofstream(path) << text;
        return path.string();
    }
    std::string out() const { return (dir_ / "out").string(); }
    std::size_t files_in_out() const {
        if (!fs::exists(dir_ / "out")) return 0;
        return static_cast<std::size_t>(std::distance(fs::directory_iterator(dir_ / "out"), fs::directory_iterator{}));
    }

    fs::path dir_;
};

const std::string kGemv = R"({
  "schema": "das-sim/scenario/1",
  "name": "cli_gemv",
  "topology": {"preset": "desk"},
  "kernel": {"name": "gemv", "M": 256, "N": 32}
})";

TEST_F(Cli, RunWritesAllFormats) {
    const auto r = dassim("--out-dir " + out() + " run " + write("g.json", kGemv));
    ASSERT_EQ(r.code, 0) << r.out;
    EXPECT_NE(r.out.find("cli_gemv [das]"), std::string::npos);
    EXPECT_NE(r.out.find("speedup="), std::string::npos);
    for (const char* f : {"cli_gemv.das.json", "cli_gemv.interleaved.json", "cli_gemv.das.csv",
                          "cli_gemv.interleaved.csv", "cli_gemv.md"}) {
        EXPECT_TRUE(fs::exists(dir_ / "out" / f)) << f;
    }
}

TEST_F(Cli, FormatFilter) {
    const auto r = dassim("--out-dir " + out() + " --format csv run " + write("g.json", kGemv));
    ASSERT_EQ(r.code, 0) << r.out;
    EXPECT_EQ(files_in_out(), 2u);
    EXPECT_EQ(dassim("--format xml run " + write("h.json", kGemv)).code, 2);
}

TEST_F(Cli, MalformedScenarioWritesNothing) {
    const auto r = dassim("--out-dir " + out() + " run " + write("bad.json", "{\n  \"schema\": \"das-sim/scenario/1\",\n  \"name\": \"x\",\n  \"kernel\": {\"name\": \"gemv\", \"M\": 256, \"N\": 32},\n  \"schemse\": [\"das\"]\n}\n"));
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.out.find("bad.json:5:"), std::string::npos) << r.out;
    EXPECT_EQ(files_in_out(), 0u);
}

TEST_F(Cli, RuntimeFailureExitsOne) {
    // A 128-cycle bank horizon is too short for the queues this run builds.
    const auto r = dassim("--out-dir " + out() + " run " + write("short.json", R"({
      "schema": "das-sim/scenario/1",
      "name": "short",
      "topology": {"preset": "desk"},
      "engine": {"horizon_log2": 7, "outstanding": 64, "port_period": 2},
      "kernel": {"name": "gemv", "M": 1024, "N": 32}
    })"));
    EXPECT_EQ(r.code, 1) << r.out;
    EXPECT_NE(r.out.find("simulation fault"), std::string::npos) << r.out;
    EXPECT_EQ(files_in_out(), 0u);
    // A heap too small for the operands is a configuration error.
    EXPECT_EQ(dassim("run " + write("small.json", R"({
      "schema": "das-sim/scenario/1",
      "name": "small",
      "topology": {"preset": "desk"},
      "heap": {"size": 1024},
      "kernel": {"name": "gemv", "M": 256, "N": 32}
    })")).code, 2);
}

TEST_F(Cli, UsageErrors) {
    EXPECT_EQ(dassim("").code, 2);
    EXPECT_EQ(dassim("run").code, 2);
    EXPECT_EQ(dassim("--bogus run x.json").code, 2);
    EXPECT_EQ(dassim("run /nonexistent.json").code, 2);
}

TEST_F(Cli, ReportAddsSpeedupColumnForPairs) {
    ASSERT_EQ(dassim("--out-dir " + out() + " --format json run " + write("g.json", kGemv)).code, 0);
    const auto das = (dir_ / "out" / "cli_gemv.das.json").string();
    const auto il = (dir_ / "out" / "cli_gemv.interleaved.json").string();
    const auto both = dassim("report " + das + " " + il);
    ASSERT_EQ(both.code, 0) << both.out;
    EXPECT_NE(both.out.find("Speedup"), std::string::npos);
    const auto one = dassim("report " + il);
    ASSERT_EQ(one.code, 0) << one.out;
    EXPECT_EQ(one.out.find("Speedup"), std::string::npos);

    const auto bars = (dir_ / "bars.csv").string();
    ASSERT_EQ(dassim("report " + das + " --bars " + bars).code, 0);
    EXPECT_TRUE(fs::exists(bars));
}

TEST_F(Cli, ReportRejectsMismatchedTopologies) {
    ASSERT_EQ(dassim("--out-dir " + out() + " --format json run " + write("g.json", kGemv)).code, 0);
    std::string other = kGemv;
    other.replace(other.find("cli_gemv"), 8, "cli_rows");
    other.replace(other.find("\"preset\": \"desk\""), 16, "\"preset\": \"desk\", \"rows_per_bank\": 2048");
    ASSERT_EQ(dassim("--out-dir " + out() + " --format json run " + write("o.json", other)).code, 0);
    const auto r = dassim("report " + (dir_ / "out" / "cli_gemv.das.json").string() + " " +
                          (dir_ / "out" / "cli_rows.das.json").string());
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.out.find("cli_rows.das.json"), std::string::npos) << r.out;
    EXPECT_EQ(dassim("report " + write("junk.json", "[1,2]")).code, 2);
}

TEST_F(Cli, SweepRunsEachValue) {
    const auto r = dassim("--out-dir " + out() + " sweep " + write("g.json", kGemv) + " --axis outstanding --values 1,4");
    ASSERT_EQ(r.code, 0) << r.out;
    EXPECT_TRUE(fs::exists(dir_ / "out" / "cli_gemv@outstanding=1.das.json"));
    EXPECT_TRUE(fs::exists(dir_ / "out" / "cli_gemv@outstanding=4.interleaved.json"));
    EXPECT_TRUE(fs::exists(dir_ / "out" / "cli_gemv.sweep.outstanding.csv"));
    EXPECT_TRUE(fs::exists(dir_ / "out" / "cli_gemv.sweep.outstanding.md"));
}

TEST_F(Cli, EmptySweepWarns) {
    const auto r = dassim("--out-dir " + out() + " sweep " + write("g.json", kGemv) + " --axis outstanding --values");
    EXPECT_EQ(r.code, 0) << r.out;
    EXPECT_NE(r.out.find("warning"), std::string::npos);
    EXPECT_EQ(files_in_out(), 0u);
    EXPECT_EQ(dassim("sweep " + write("h.json", kGemv) + " --axis nope --values 1").code, 2);
}

}  // namespace
