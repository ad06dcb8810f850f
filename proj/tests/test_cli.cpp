#include "test_util.hpp"

#include <gtest/gtest.h>

#include <fstream>
#include <sys/wait.h>

namespace fs = std::filesystem;

namespace {

struct Run {
    int code;
    std::string out;
};

Run run_cli(const std::string& args, const fs::path& cwd) {
    const fs::path log = cwd / "cli.log";
    const std::string cmd = "cd '" + cwd.string() + "' && '" LDAE_CLI_PATH "' " + args + " > '" + log.string() + "' 2>&1";
    const int status = std::system(cmd.c_str());
    std::ifstream in(log);
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, std::string(std::istreambuf_iterator<char>(in), {})};
}

std::string read(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

std::size_t data_lines(const std::string& text) {
    std::size_t n = 0;
    std::istringstream ss(text);
    for (std::string line; std::getline(ss, line);)
        if (!line.empty() && line[0] != '#') ++n;
    return n;
}

}  // namespace

TEST(Cli, GradcheckPrintsThreeErrorsAndPasses) {
    const auto dir = ldae::testing::temp_dir("cli_grad");
    const auto r = run_cli("gradcheck", dir);
    EXPECT_EQ(r.code, 0) << r.out;
    EXPECT_EQ(data_lines(r.out), 3u);
    for (const char* v : {"nolat", "add", "mod"}) EXPECT_NE(r.out.find(std::string(v) + " max_relative_error"), std::string::npos);
}

TEST(Cli, UsageErrorsExitTwo) {
    const auto dir = ldae::testing::temp_dir("cli_usage");
    EXPECT_EQ(run_cli("", dir).code, 2);
    const auto bogus = run_cli("bogus", dir);
    EXPECT_EQ(bogus.code, 2);
    EXPECT_NE(bogus.out.find("Usage"), std::string::npos);
    EXPECT_EQ(run_cli("train --no-such-flag 1", dir).code, 2);
    std::ofstream(dir / "bad.cfg") << "[model]\nwidth = 2\n";
    EXPECT_EQ(run_cli("train --config bad.cfg", dir).code, 2);
    EXPECT_EQ(run_cli("analyze --checkpoint missing.ldae", dir).code, 2);
    EXPECT_EQ(run_cli("gradcheck --threshold 1e-30", dir).code, 1);
}

TEST(Cli, TrainWritesCheckpointAndHistoryReproducibly) {
    const auto dir = ldae::testing::temp_dir("cli_train");
    const std::string args =
        "train --variant mod --alpha 0.1 --budget 3000 --updates 60 --seed 1 --synthetic_dim 16 "
        "--validation_batches 3 --validation_interval 20 ";
    ASSERT_EQ(run_cli(args + "--history h.csv --out a.ldae", dir).code, 0);
    ASSERT_EQ(run_cli(args + "--history h.csv --out b.ldae", dir).code, 0);
    EXPECT_TRUE(fs::exists(dir / "a.ldae"));
    EXPECT_EQ(data_lines(read(dir / "h.csv")), 5u);
    EXPECT_NE(read(dir / "h.csv").find("# seed = 1"), std::string::npos);
    // Only the embedded output path differs between the two checkpoints.
    std::string a = read(dir / "a.ldae"), b = read(dir / "b.ldae");
    EXPECT_EQ(a.size(), b.size());
    EXPECT_EQ(a.substr(a.size() - 2000), b.substr(b.size() - 2000));
}

TEST(Cli, SweepWritesOneRowPerReplica) {
    const auto dir = ldae::testing::temp_dir("cli_sweep");
    const auto r = run_cli("sweep --variant nolat --alphas 0.5,1.0,2.0 --seeds 2 --budget 800 --synthetic_dim 8 "
                           "--updates 20 --validation_batches 2",
                           dir);
    ASSERT_EQ(r.code, 0) << r.out;
    EXPECT_EQ(data_lines(read(dir / "sweep.csv")), 7u);
    EXPECT_EQ(data_lines(read(dir / "sweep_summary.csv")), 4u);
    ASSERT_EQ(run_cli("report --sweep_input sweep.csv --out cost.svg", dir).code, 0);
    EXPECT_NE(read(dir / "cost.svg").find("<svg"), std::string::npos);
}
