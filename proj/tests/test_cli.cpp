#include <gtest/gtest.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>

namespace fs = std::filesystem;

namespace {

struct Result {
    int code = -1;
    std::string out;
};

Result run(const std::string& args, const std::string& env = "") {
    const std::string cmd = env + " \"" ADFQ_CLI_PATH "\" " + args + " 2>&1";
    Result r;
    FILE* pipe = popen(cmd.c_str(), "r");
    if (!pipe) return r;
    char buf[4096];
    while (std::size_t n = fread(buf, 1, sizeof buf, pipe)) r.out.append(buf, n);
    const int status = pclose(pipe);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

class CliTest : public ::testing::Test {
protected:
    void SetUp() override {
        dir_ = fs::temp_directory_path() / ("adfq_cli_" + std::to_string(::getpid()) + "_" +
                                            ::testing::UnitTest::GetInstance()->current_test_info()->name());
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }
    fs::path dir_;
};

}  // namespace

TEST_F(CliTest, UpdateDemoDefaults) {
    const auto r = run("update-demo");
    EXPECT_EQ(r.code, 0);
    EXPECT_NE(r.out.find("adfq           mean=2.881521"), std::string::npos) << r.out;
    EXPECT_NE(r.out.find("quadrature     mean=2.882716"), std::string::npos) << r.out;
}

TEST_F(CliTest, UpdateDemoTwoActionsPrintsExact) {
    const auto r = run("update-demo --next-means -2,1 --next-vars 2,0.5 --reward 0.5");
    EXPECT_EQ(r.code, 0);
    EXPECT_NE(r.out.find("exact          mean=1.01406776"), std::string::npos) << r.out;
}

TEST_F(CliTest, SolveLoopHasEighteenRows) {
    const auto r = run("solve --domain loop");
    EXPECT_EQ(r.code, 0);
    std::istringstream in(r.out);
    std::string line;
    int rows = 0;
    std::getline(in, line);
    EXPECT_EQ(line, "state,action,q");
    while (std::getline(in, line)) ++rows;
    EXPECT_EQ(rows, 18);
}

TEST_F(CliTest, HelpShowsDefaults) {
    const auto r = run("learn --help");
    EXPECT_EQ(r.code, 0);
    EXPECT_NE(r.out.find("--init-var FLOAT [100]"), std::string::npos);
    EXPECT_NE(r.out.find("--policy TEXT [egreedy]"), std::string::npos);
}

TEST_F(CliTest, ConfigErrorsExitTwo) {
    EXPECT_EQ(run("learn --horizon 10").code, 2);  // missing seed
    EXPECT_EQ(run("learn --seed 1 --bogus").code, 2);
    EXPECT_EQ(run("learn --seed 1 --policy nope").code, 2);
    EXPECT_EQ(run("learn --seed 1 --agents qlearning --policy ts").code, 2);
    EXPECT_EQ(run("learn --seed 1 --domain loop --slip 0.9").code, 2);
    EXPECT_EQ(run("").code, 2);
    std::ofstream(dir_ / "bad.txt") << "S.\n.x\n";
    const auto r = run("learn --seed 1 --domain maze --maze " + (dir_ / "bad.txt").string());
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.out.find("maze:2:2"), std::string::npos) << r.out;
    EXPECT_EQ(run("learn --config " + (dir_ / "missing.toml").string()).code, 2);
}

TEST_F(CliTest, LearnWritesRawAndMeanFiles) {
    const auto r = run("learn --seed 3 --horizon 200 --trials 2 --output " + dir_.string());
    EXPECT_EQ(r.code, 0) << r.out;
    const auto raw = slurp(dir_ / "loop_adfq_egreedy.csv");
    const auto mean = slurp(dir_ / "loop_adfq_egreedy_mean.csv");
    EXPECT_EQ(raw.rfind("trial,step,rmse,greedy_return,wall_ms\n", 0), 0u);
    EXPECT_EQ(mean.rfind("step,rmse,greedy_return,n_trials\n", 0), 0u);
    EXPECT_EQ(std::count(raw.begin(), raw.end(), '\n'), 1 + 2 * 101);
}

TEST_F(CliTest, OutputDirFromEnvironment) {
    const auto r = run("convergence --seed 1 --horizon 100 --trials 1", "ADFQ_OUTPUT_DIR=" + dir_.string());
    EXPECT_EQ(r.code, 0) << r.out;
    EXPECT_TRUE(fs::exists(dir_ / "arms2_adfq_uniform.csv"));
    EXPECT_TRUE(fs::exists(dir_ / "arms2_qlearning_uniform_mean.csv"));
}

TEST_F(CliTest, ConfigFileWithCommandLineOverride) {
    std::ofstream(dir_ / "run.toml") << "seed = 4\nhorizon = 500\ntrials = 1\nagents = \"adfq,qlearning\"\ndomain = \"arms\"\narms = 3\n";
    const auto r = run("convergence --config " + (dir_ / "run.toml").string() + " --horizon 100 --output " +
                       dir_.string());
    EXPECT_EQ(r.code, 0) << r.out;
    const auto raw = slurp(dir_ / "arms3_adfq_uniform.csv");
    EXPECT_NE(raw.find("\n0,100,"), std::string::npos) << raw;
    EXPECT_EQ(raw.find("\n0,500,"), std::string::npos);
    std::ofstream(dir_ / "bad.toml") << "[section]\nseed = 4\n";
    EXPECT_EQ(run("convergence --config " + (dir_ / "bad.toml").string()).code, 2);
    std::ofstream(dir_ / "unknown.toml") << "seedz = 4\n";
    EXPECT_EQ(run("convergence --config " + (dir_ / "unknown.toml").string()).code, 2);
}

TEST_F(CliTest, JobsDoNotChangeOutput) {
    const auto a = dir_ / "a", b = dir_ / "b";
    ASSERT_EQ(run("learn --seed 9 --horizon 300 --trials 3 --agents adfq,qlearning --jobs 1 --output " + a.string()).code, 0);
    ASSERT_EQ(run("learn --seed 9 --horizon 300 --trials 3 --agents adfq,qlearning --jobs 3 --output " + b.string()).code, 0);
    for (const char* f : {"loop_adfq_egreedy.csv", "loop_qlearning_egreedy_mean.csv"}) EXPECT_EQ(slurp(a / f), slurp(b / f));
}

TEST_F(CliTest, OracleCheckIsDeterministic) {
    const auto a = run("oracle-check --trials 50 --seed 7");
    const auto b = run("oracle-check --trials 50 --seed 7");
    EXPECT_EQ(a.code, 0);
    EXPECT_EQ(a.out, b.out);
    EXPECT_EQ(run("oracle-check --trials 5").code, 2);
}
