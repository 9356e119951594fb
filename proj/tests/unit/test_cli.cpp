#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cli.hpp"
#include "mfgcn/parallel.hpp"

namespace fs = std::filesystem;
using mfgcn::cli::run_command;

namespace {

struct CommandResult {
    int code;
    std::string out;
    std::string err;
};

CommandResult run(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = run_command(args, out, err);
    return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path scratch(const std::string& name) {
    const fs::path d = fs::temp_directory_path() / "mfgcn_cli_test" / name;
    fs::remove_all(d);
    return d;
}

const std::string kConfigDir = MFGCN_CONFIG_DIR;
const std::vector<std::string> kSmall = {"--paths", "3000", "--steps", "10"};

std::vector<std::string> cmd(std::initializer_list<std::string> head, const std::vector<std::string>& tail = kSmall) {
    std::vector<std::string> v(head);
    v.insert(v.end(), tail.begin(), tail.end());
    return v;
}

}  // namespace

TEST(Cli, NoSubcommandIsError) {
    EXPECT_EQ(run({}).code, 1);
    EXPECT_EQ(run({"frobnicate"}).code, 1);
    EXPECT_EQ(run({"solve", "--bogus"}).code, 1);
}

TEST(Cli, HelpSucceeds) {
    const CommandResult r = run({"--help"});
    EXPECT_EQ(r.code, 0);
    EXPECT_NE(r.out.find("mimic-check"), std::string::npos);
}

TEST(Cli, NoInteractionSolveExitsZero) {
    const fs::path d = scratch("ni");
    const CommandResult r = run(cmd({"solve", "--config", kConfigDir + "/no_interaction.cfg", "--out-dir", d.string()}));
    EXPECT_EQ(r.code, 0) << r.err;
    for (const char* f : {"residuals.csv", "flow.csv", "policy.csv", "bsde.csv", "manifest.txt"})
        EXPECT_TRUE(fs::exists(d / f)) << f;
    const std::string res = slurp(d / "residuals.csv");
    EXPECT_EQ(std::count(res.begin(), res.end(), '\n'), 3);
    const std::string manifest = slurp(d / "manifest.txt");
    EXPECT_NE(manifest.find("solver.n_paths=3000"), std::string::npos);
    EXPECT_NE(manifest.find("status=converged"), std::string::npos);
    EXPECT_NE(manifest.find("wall_ms.total="), std::string::npos);
}

TEST(Cli, SingleIterationIsNonConvergence) {
    const fs::path d = scratch("one");
    const CommandResult r = run(cmd({"solve", "--config", kConfigDir + "/lq1.cfg", "--max-iters", "1", "--out-dir", d.string()}));
    EXPECT_EQ(r.code, 2);
    EXPECT_TRUE(fs::exists(d / "residuals.csv"));
}

TEST(Cli, ByteIdenticalOutputsAcrossRunsAndThreads) {
    const fs::path a = scratch("a"), b = scratch("b");
    ASSERT_EQ(run(cmd({"solve", "--config", kConfigDir + "/lq1.cfg", "--seed", "7", "--out-dir", a.string(),
                       "--threads", "1"}))
                  .code,
              0);
    ASSERT_EQ(run(cmd({"solve", "--config", kConfigDir + "/lq1.cfg", "--seed", "7", "--out-dir", b.string(),
                       "--threads", "3"}))
                  .code,
              0);
    for (const char* f : {"residuals.csv", "flow.csv", "policy.csv", "bsde.csv"})
        EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
    mfgcn::set_worker_count(1);
}

TEST(Cli, BadDampingFlagIsError) {
    const CommandResult r = run(cmd({"solve", "--damping", "0", "--out-dir", scratch("bad").string()}));
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.err.find("damping"), std::string::npos);
}

TEST(Cli, ConfigErrorReportsLine) {
    const fs::path d = scratch("cfg");
    fs::create_directories(d);
    std::ofstream(d / "bad.cfg") << "[problem]\nfamily = lq\nsigmma = 1\n";
    const CommandResult r = run({"validate", "--config", (d / "bad.cfg").string()});
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.err.find("line 3"), std::string::npos);
    EXPECT_NE(r.err.find("sigmma"), std::string::npos);
}

TEST(Cli, ThreadsEnvHonoredOnlyWithoutFlag) {
    setenv(mfgcn::cli::kThreadsEnv, "3", 1);
    EXPECT_EQ(run({"validate"}).code, 0);
    EXPECT_EQ(mfgcn::worker_count(), 3u);
    EXPECT_EQ(run({"validate", "--threads", "2"}).code, 0);
    EXPECT_EQ(mfgcn::worker_count(), 2u);
    setenv(mfgcn::cli::kThreadsEnv, "zero", 1);
    EXPECT_EQ(run({"validate"}).code, 1);
    unsetenv(mfgcn::cli::kThreadsEnv);
    EXPECT_EQ(run({"validate"}).code, 0);
    EXPECT_EQ(mfgcn::worker_count(), 1u);
}

TEST(Cli, PhiWritesFlow) {
    const fs::path d = scratch("phi");
    const CommandResult r = run(cmd({"phi", "--out-dir", d.string()}));
    EXPECT_EQ(r.code, 0) << r.err;
    EXPECT_TRUE(fs::exists(d / "flow.csv"));
    EXPECT_NE(r.out.find("d_M"), std::string::npos);
}

TEST(Cli, TransportOracle) {
    const CommandResult r = run({"w1-oracle"});
    EXPECT_EQ(r.code, 0);
    EXPECT_EQ(r.out.rfind("PASS", 0), 0u);
}
