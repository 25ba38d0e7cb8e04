#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "gmfg/io.hpp"

namespace fs = std::filesystem;
using gmfg::io::json;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("gmfg_cli_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

int run(const std::string& args, const fs::path& err = {}) {
    std::string cmd = std::string(GMFG_CLI_PATH) + " " + args;
    cmd += err.empty() ? " 2>/dev/null" : " 2>" + err.string();
    cmd += " >/dev/null";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

void write(const fs::path& p, const json& j) { gmfg::io::write_json(p, j); }

}  // namespace

TEST(Cli, VersionAndUsageErrors) {
    EXPECT_EQ(run("--version"), 0);
    EXPECT_EQ(run("no-such-command"), 2);
    EXPECT_EQ(run("lq solve"), 2);
}

TEST(Cli, UnsolvableKernelExitsWithBound) {
    const auto dir = scratch("unsolvable");
    write(dir / "k.json", {{"type", "constant"}, {"p", 2.0}});
    write(dir / "m0.json", {{"type", "point"}, {"x0", 1.0}});
    const std::string args = "lq solve --kernel " + (dir / "k.json").string() + " --initial " +
                             (dir / "m0.json").string() + " --c 1 --T 1 --L 16 --out " + (dir / "out").string();
    EXPECT_EQ(run(args, dir / "err.txt"), 3);
    const std::string err = slurp(dir / "err.txt");
    EXPECT_NE(err.find("1 + 1/(cT)"), std::string::npos);
    const auto rec = gmfg::io::read_json(dir / "out" / "error.json");
    EXPECT_EQ(rec["error"]["type"], "solvability");
    EXPECT_NEAR(rec["error"]["bound"].get<double>(), 2.0, 1e-15);
}

TEST(Cli, LqSolveWritesSolutionAndIsByteStable) {
    const auto dir = scratch("lqsolve");
    write(dir / "k.json", {{"type", "two_block"}, {"w", {1.6, 0.4, 0.2, 1.0}}});
    const std::string base = "lq solve --kernel " + (dir / "k.json").string() + " --L 32 --out ";
    ASSERT_EQ(run(base + (dir / "a").string()), 0);
    ASSERT_EQ(run(base + (dir / "b").string()), 0);
    for (const char* f : {"solution.json", "target.csv", "centrality.csv"})
        EXPECT_EQ(slurp(dir / "a" / f), slurp(dir / "b" / f)) << f;
    const auto sol = gmfg::io::read_json(dir / "a" / "solution.json");
    EXPECT_EQ(sol["target"].size(), 32u);
    const auto manifest = gmfg::io::read_json(dir / "a" / "manifest.json");
    EXPECT_EQ(manifest["command"], "lq-solve");
    EXPECT_TRUE(manifest["config"]["kernel"].is_object());
}

TEST(Cli, StochasticCommandNeedsSeed) {
    const auto dir = scratch("seed");
    write(dir / "cfg.json", {{"command", "netgen"}, {"generator", "erdos_renyi"}, {"n", 10}, {"p", 0.5}, {"out", "o"}});
    EXPECT_EQ(run("run --config " + (dir / "cfg.json").string(), dir / "err.txt"), 2);
    EXPECT_NE(slurp(dir / "err.txt").find("seed"), std::string::npos);
    EXPECT_EQ(run("run --config " + (dir / "cfg.json").string() + " --seed 4"), 0);
    EXPECT_TRUE(fs::exists(dir / "o" / "xi.txt"));
    EXPECT_TRUE(fs::exists(dir / "o" / "labels.csv"));
}

TEST(Cli, ManifestReplaysToIdenticalOutputs) {
    const auto dir = scratch("replay");
    write(dir / "cfg.json", {{"command", "netgen"},
                             {"generator", "sampled_weighted"},
                             {"kernel", {{"type", "two_block"}, {"w", {1.6, 0.4, 0.2, 1.0}}}},
                             {"n", 12},
                             {"seed", 9},
                             {"out", "first"}});
    ASSERT_EQ(run("run --config " + (dir / "cfg.json").string()), 0);
    ASSERT_EQ(run("run --config " + (dir / "first" / "manifest.json").string() + " --out " + (dir / "second").string()), 0);
    EXPECT_EQ(slurp(dir / "first" / "xi.txt"), slurp(dir / "second" / "xi.txt"));
    EXPECT_EQ(slurp(dir / "first" / "labels.csv"), slurp(dir / "second" / "labels.csv"));
}

TEST(Cli, SweepReportHasOneAggregateRowPerSize) {
    const auto dir = scratch("sweep");
    write(dir / "cfg.json", {{"command", "nashgap-sweep"},
                             {"generator", "erdos_renyi"},
                             {"p", 0.5},
                             {"sizes", {4, 6}},
                             {"trials", 2},
                             {"paths", 40},
                             {"label_cells", 8},
                             {"lq", {{"kernel", {{"type", "constant"}, {"p", 1.0}}},
                                     {"initial", {{"type", "normal"}, {"mean", 1.0}, {"sd", 0.5}}}}},
                             {"seed", 3},
                             {"out", "o"}});
    ASSERT_EQ(run("run --config " + (dir / "cfg.json").string()), 0);
    std::ifstream in(dir / "o" / "report.csv");
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line, "kind,n,trial,i,label,eps_hat,stderr");
    int aggregates = 0, players = 0;
    while (std::getline(in, line)) {
        aggregates += line.rfind("aggregate,", 0) == 0;
        players += line.rfind("player,", 0) == 0;
    }
    EXPECT_EQ(aggregates, 2);
    EXPECT_EQ(players, 2 * (4 + 6));
    EXPECT_TRUE(fs::exists(dir / "o" / "fractions.csv"));
}

TEST(Cli, SchemaErrorsAreReported) {
    const auto dir = scratch("schema");
    write(dir / "cfg.json", {{"command", "lq-solve"}, {"kernel", {{"type", "nope"}}}, {"out", "o"}});
    EXPECT_EQ(run("run --config " + (dir / "cfg.json").string()), 2);
    const auto rec = gmfg::io::read_json(dir / "o" / "error.json");
    EXPECT_EQ(rec["error"]["type"], "schema");
}

TEST(Cli, KernelNormsOnSmallMatrixAreExact) {
    const auto dir = scratch("norms");
    {
        std::ofstream m(dir / "m.txt");
        m << "0 1\n1 0\n";
    }
    ASSERT_EQ(run("kernel norms --matrix " + (dir / "m.txt").string() + " --out " + (dir / "o").string()), 0);
    const auto norms = gmfg::io::read_json(dir / "o" / "norms.json");
    bool found = false;
    for (const auto& r : norms)
        if (r["name"] == "cut_norm") {
            found = true;
            EXPECT_EQ(r["mode"], "exact");
            EXPECT_DOUBLE_EQ(r["value"].get<double>(), 0.5);
        }
    EXPECT_TRUE(found);
}
