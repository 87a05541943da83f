#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

namespace fs = std::filesystem;

namespace {

class Cli : public ::testing::Test {
protected:
    void SetUp() override {
        dir_ = fs::temp_directory_path() /
               ("exo_cli_" + std::to_string(::getpid()) + "_" +
                ::testing::UnitTest::GetInstance()->current_test_info()->name());
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    fs::path write(const std::string& name, const std::string& text) const {
        const fs::path p = dir_ / name;
        std::ofstream(p, std::ios::binary) << text;
        return p;
    }

    /// Runs the simulator with `args`; stdout and stderr land in `out`.
    int exo(const std::string& args, std::string* out = nullptr) const {
        const fs::path log = dir_ / "log.txt";
        const std::string cmd = std::string(EXO_SIM_PATH) + " " + args + " > " + log.string() + " 2>&1";
        const int status = std::system(cmd.c_str());
        if (out) {
            std::ifstream in(log);
            std::stringstream ss;
            ss << in.rdbuf();
            *out = ss.str();
        }
        return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    }

    fs::path short_scenario(const std::string& extra = "") const {
        return write("short.jsonc", "{\"name\": \"short\", \"simulation\": {\"duration\": 0.05}" + extra + "}");
    }

    fs::path dir_;
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_F(Cli, HelpListsExitCodesAndKeys) {
    std::string out;
    EXPECT_EQ(exo("--help", &out), 0);
    EXPECT_NE(out.find("Exit codes"), std::string::npos);
    EXPECT_NE(out.find("plant.valve_gain"), std::string::npos);
    EXPECT_NE(out.find("[assumed]"), std::string::npos);
}

TEST_F(Cli, MissingScenarioFileIsIoError) {
    std::string out;
    EXPECT_EQ(exo("check --scenario " + (dir_ / "absent.jsonc").string(), &out), 4);
    EXPECT_NE(out.find("cannot open"), std::string::npos);
}

TEST_F(Cli, EmptyScenarioIsSchemaError) {
    EXPECT_EQ(exo("check --scenario " + write("empty.jsonc", "").string()), 2);
}

TEST_F(Cli, UnknownKeyNamesPath) {
    std::string out;
    EXPECT_EQ(exo("check --scenario " + write("bad.jsonc", R"({"plant": {"valve_gian": 1}})").string(), &out), 2);
    EXPECT_NE(out.find("plant.valve_gian"), std::string::npos);
}

TEST_F(Cli, SeedRejected) {
    std::string out;
    EXPECT_EQ(exo("run --scenario " + short_scenario().string() + " --seed 3", &out), 1);
    EXPECT_NE(out.find("--seed"), std::string::npos);
}

TEST_F(Cli, MissingSubcommandIsUsageError) {
    EXPECT_EQ(exo(""), 1);
    EXPECT_EQ(exo("run"), 1);
}

TEST_F(Cli, UnwritableOutputIsIoError) {
    const fs::path file = write("plain_file", "x");
    EXPECT_EQ(exo("run --scenario " + short_scenario().string() + " --out " + (file / "sub").string()), 4);
}

TEST_F(Cli, CheckNominalPrintsResolvedParameters) {
    std::string out;
    EXPECT_EQ(exo("check --scenario " + std::string(EXO_SOURCE_DIR) + "/scenarios/nominal.jsonc", &out), 0);
    EXPECT_NE(out.find("# valid"), std::string::npos);
    EXPECT_NE(out.find("lowlevel.k_force = 1000.0"), std::string::npos);
    EXPECT_NE(out.find("accumulator.recharge_time = 1.0   [assumed]"), std::string::npos);
}

TEST_F(Cli, DegenerateGeometryRejected) {
    std::string out;
    EXPECT_EQ(exo("check --scenario " + write("g.jsonc", R"({"plant": {"arm_side1": 0}})").string(), &out), 2);
    EXPECT_NE(out.find("plant.arm_side1"), std::string::npos);
    EXPECT_EQ(exo("run --scenario " + write("g2.jsonc", R"({"plant": {"arm_side1": 0.0}})").string() +
                  " --out " + (dir_ / "o").string()),
              2);
}

TEST_F(Cli, InvertedCurrentLimitsRejected) {
    std::string out;
    const fs::path p = write("c.jsonc", R"({"plant": {"current_min": 0.05, "current_max": 0.01}})");
    EXPECT_EQ(exo("run --scenario " + p.string() + " --out " + (dir_ / "o").string(), &out), 2);
    EXPECT_NE(out.find("plant.current_min"), std::string::npos);
}

TEST_F(Cli, RunWritesOutputs) {
    const fs::path out = dir_ / "run";
    ASSERT_EQ(exo("run --scenario " + short_scenario().string() + " --out " + out.string() +
                  " --plots e1,F_L --log-weights"),
              0);
    EXPECT_TRUE(fs::exists(out / "trace.csv"));
    EXPECT_TRUE(fs::exists(out / "metrics.txt"));
    EXPECT_TRUE(fs::exists(out / "e1.svg"));
    EXPECT_TRUE(fs::exists(out / "F_L.svg"));
    EXPECT_TRUE(fs::exists(out / "weights.csv"));
    const std::string csv = slurp(out / "trace.csv");
    EXPECT_EQ(csv.rfind("t,phi,phi_dot,", 0), 0u);
    std::size_t lines = 0;
    for (const char c : csv) lines += c == '\n';
    EXPECT_EQ(lines, 51u);
}

TEST_F(Cli, RunIsByteIdenticalAcrossInvocations) {
    const fs::path sc = short_scenario();
    ASSERT_EQ(exo("run --scenario " + sc.string() + " --out " + (dir_ / "a").string()), 0);
    ASSERT_EQ(exo("run --scenario " + sc.string() + " --out " + (dir_ / "b").string()), 0);
    for (const char* f : {"trace.csv", "metrics.txt", "e1.svg"}) {
        EXPECT_EQ(slurp(dir_ / "a" / f), slurp(dir_ / "b" / f)) << f;
    }
}

TEST_F(Cli, BadPlotColumnIsUsageError) {
    EXPECT_EQ(exo("run --scenario " + short_scenario().string() + " --plots e1,bogus --out " +
                  (dir_ / "o").string()),
              1);
}

TEST_F(Cli, CompareWritesTableAndOverlays) {
    std::string text;
    const fs::path out = dir_ / "cmp";
    ASSERT_EQ(exo("compare --scenario " + short_scenario().string() + " --out " + out.string(), &text), 0);
    EXPECT_TRUE(fs::exists(out / "Cascade" / "trace.csv"));
    EXPECT_TRUE(fs::exists(out / "Pd" / "trace.csv"));
    EXPECT_TRUE(fs::exists(out / "overlay_e1.svg"));
    const std::string table = slurp(out / "comparison.txt");
    EXPECT_NE(table.find("rms_e1"), std::string::npos);
    EXPECT_NE(table.find("winner"), std::string::npos);
    EXPECT_NE(text.find("rms_e1"), std::string::npos);
}

TEST_F(Cli, CompareIdenticalVariantsTies) {
    const fs::path out = dir_ / "same";
    ASSERT_EQ(exo("compare --scenario " + short_scenario().string() + " --variant Pd --variant Pd --out " +
                  out.string()),
              0);
    EXPECT_TRUE(fs::exists(out / "Pd"));
    EXPECT_TRUE(fs::exists(out / "Pd_1"));
    const std::string table = slurp(out / "comparison.txt");
    std::istringstream in(table);
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) EXPECT_EQ(line.substr(line.size() - 3), "tie") << line;
}

TEST_F(Cli, CompareNeedsTwoVariants) {
    EXPECT_EQ(exo("compare --scenario " + short_scenario().string() + " --variant Pd --out " +
                  (dir_ / "o").string()),
              1);
    EXPECT_EQ(exo("compare --scenario " + short_scenario().string() + " --variant Pd --variant Nope --out " +
                  (dir_ / "o").string()),
              2);
}

TEST_F(Cli, SweepWritesOneDirectoryPerValue) {
    const fs::path sc = short_scenario(R"(, "sweep": {"path": "plant.current_max", "values": [0.01, 0.02, 0.025]})");
    const fs::path out = dir_ / "sw";
    ASSERT_EQ(exo("run --scenario " + sc.string() + " --out " + out.string()), 0);
    for (int i = 0; i < 3; ++i) EXPECT_TRUE(fs::exists(out / ("sweep_" + std::to_string(i)) / "trace.csv"));
    EXPECT_NE(slurp(out / "sweep.txt").find("plant.current_max=0.02"), std::string::npos);
}

TEST_F(Cli, NumericAbortWritesPartialTrace) {
    const fs::path sc = short_scenario(R"(, "initial_estimates": {"inertia": 2e9})");
    const fs::path out = dir_ / "abort";
    std::string text;
    EXPECT_EQ(exo("run --scenario " + sc.string() + " --out " + out.string(), &text), 3);
    EXPECT_TRUE(fs::exists(out / "trace.csv"));
    EXPECT_NE(text.find("aborted"), std::string::npos);
}
