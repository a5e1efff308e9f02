#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <sys/wait.h>
#include <unistd.h>

#include <gtest/gtest.h>
#include <json.hpp>

namespace fs = std::filesystem;

namespace {

const fs::path kCli = FCA_CLI_PATH;

struct Result {
    int code;
    std::string output;
};

Result run(const std::string& args) {
    const fs::path log = fs::temp_directory_path() / ("fca_cli_test_" + std::to_string(::getpid()) + ".log");
    const std::string cmd = kCli.string() + " " + args + " > " + log.string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    std::ifstream is(log);
    std::stringstream ss;
    ss << is.rdbuf();
    fs::remove(log);
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, ss.str()};
}

std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

class CliTest : public ::testing::Test {
protected:
    void SetUp() override {
        dir = fs::temp_directory_path() / ("fca_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
        fs::remove_all(dir);
        fs::create_directories(dir);
    }
    void TearDown() override { fs::remove_all(dir); }

    fs::path write(const std::string& name, const std::string& text) {
        const auto p = dir / name;
        std::ofstream(p) << text;
        return p;
    }

    fs::path dir;
};

const char* kSmallDensity = R"({
  "experiment": "density",
  "model": {"type": "quadratic", "a": -20, "b": 0.1, "c": 4.5, "d": 0.1, "e": 0.1},
  "grid": {"z_min": -10.24, "m": 512},
  "time": {"dtau": 0.001, "snapshot_taus": [0.01, 0.05]},
  "mc": {"n_paths": 2000, "seed": 3, "bins": 20}
})";

}  // namespace

TEST_F(CliTest, EmptyConfigIsConfigError) {
    const auto r = run("run " + write("empty.json", "").string());
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.output.find("experiment"), std::string::npos) << r.output;
}

TEST_F(CliTest, MissingFieldIsNamed) {
    const auto r = run("run " + write("c.json", R"({"experiment": "density", "model": {"type": "piecewise"}})").string());
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.output.find("model.epsilon"), std::string::npos) << r.output;
}

TEST_F(CliTest, UnknownKeyIsConfigError) {
    auto j = nlohmann::json::parse(kSmallDensity);
    j["grid"]["zmin"] = -5;
    const auto r = run("run " + write("c.json", j.dump()).string() + " --output " + (dir / "out").string());
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.output.find("grid.zmin"), std::string::npos) << r.output;
}

TEST_F(CliTest, InvalidJsonAndBadValues) {
    EXPECT_EQ(run("run " + write("a.json", "{ not json").string()).code, 2);
    auto j = nlohmann::json::parse(kSmallDensity);
    j["grid"]["m"] = 500;
    EXPECT_EQ(run("run " + write("b.json", j.dump()).string() + " --output " + (dir / "o").string()).code, 2);
}

TEST_F(CliTest, MissingFileIsIoError) {
    EXPECT_EQ(run("run " + (dir / "nope.json").string()).code, 4);
}

TEST_F(CliTest, DensityRunWritesFilesAndManifestRoundTrips) {
    const auto cfg = write("small.json", kSmallDensity);
    const auto out1 = dir / "first", out2 = dir / "second", out3 = dir / "third";
    ASSERT_EQ(run("run " + cfg.string() + " --output " + out1.string()).code, 0);
    for (const char* f : {"density_tau_0.01.csv", "density_tau_0.05.csv", "density_x_tau_0.05.csv", "histogram_tau_0.05.csv",
                          "manifest.json"}) {
        EXPECT_TRUE(fs::exists(out1 / f)) << f;
    }
    const auto manifest = nlohmann::json::parse(slurp(out1 / "manifest.json"));
    EXPECT_TRUE(manifest.contains("manifest"));
    EXPECT_EQ(manifest["engine"]["scheme"], "strang");  // defaults are recorded
    EXPECT_TRUE(manifest["manifest"]["snapshots"][0].contains("mass_deficit"));

    // Same config twice: identical bytes.
    ASSERT_EQ(run("run " + cfg.string() + " --output " + out2.string()).code, 0);
    // The manifest alone reproduces the run.
    ASSERT_EQ(run("run " + (out1 / "manifest.json").string() + " --output " + out3.string()).code, 0);
    for (const auto& e : fs::directory_iterator(out1)) {
        if (e.path().extension() != ".csv") continue;
        const auto name = e.path().filename();
        EXPECT_EQ(slurp(e.path()), slurp(out2 / name)) << name;
        EXPECT_EQ(slurp(e.path()), slurp(out3 / name)) << name;
    }
}

TEST_F(CliTest, SeedOverrideChangesHistogram) {
    const auto cfg = write("small.json", kSmallDensity);
    ASSERT_EQ(run("run " + cfg.string() + " --output " + (dir / "a").string()).code, 0);
    ASSERT_EQ(run("run " + cfg.string() + " --seed 99 --output " + (dir / "b").string()).code, 0);
    EXPECT_NE(slurp(dir / "a" / "histogram_tau_0.05.csv"), slurp(dir / "b" / "histogram_tau_0.05.csv"));
    EXPECT_EQ(slurp(dir / "a" / "density_tau_0.05.csv"), slurp(dir / "b" / "density_tau_0.05.csv"));
    const auto m = nlohmann::json::parse(slurp(dir / "b" / "manifest.json"));
    EXPECT_EQ(m["mc"]["seed"], 99);
}

TEST_F(CliTest, OutputRootFromEnvironment) {
    const auto cfg = write("small.json", kSmallDensity);
    const std::string root = (dir / "root").string();
    const std::string cmd = "FCA_OUTPUT_ROOT=" + root + " " + kCli.string() + " run " + cfg.string() + " > /dev/null 2>&1";
    ASSERT_EQ(std::system(cmd.c_str()), 0);
    EXPECT_TRUE(fs::exists(dir / "root" / "small" / "manifest.json"));
}

TEST_F(CliTest, PriceAndJointRuns) {
    const auto price = write("price.json", R"({
      "experiment": "price",
      "model": {"type": "piecewise", "epsilon": 2, "r": 0.03},
      "option": {"style": "vanilla-piecewise", "strikes": [90, 100], "T": 0.25},
      "grid": {"m": 512}, "time": {"dtau": 0.002},
      "mc": {"n_paths": 2000, "seed": 1}
    })");
    ASSERT_EQ(run("run " + price.string() + " --output " + (dir / "p").string()).code, 0);
    EXPECT_TRUE(fs::exists(dir / "p" / "prices.csv"));
    EXPECT_TRUE(fs::exists(dir / "p" / "estimates.csv"));

    const auto joint = write("joint.json", R"({
      "experiment": "joint-density",
      "model": {"type": "vnb", "alpha": 0.1},
      "grid": {"z_min": -10.24, "m": 128, "u_min": -1.28, "m_u": 64},
      "time": {"dtau": 0.02}
    })");
    ASSERT_EQ(run("run " + joint.string() + " --output " + (dir / "j").string()).code, 0);
    for (const char* f : {"joint.csv", "marginal_u.csv", "marginal_z.csv"}) EXPECT_TRUE(fs::exists(dir / "j" / f)) << f;
}

TEST_F(CliTest, MismatchedStyleIsConfigError) {
    const auto price = write("price.json", R"({
      "experiment": "price",
      "model": {"type": "vnb", "alpha": 0.1},
      "option": {"style": "vanilla-piecewise", "strikes": [100], "T": 1}
    })");
    EXPECT_EQ(run("run " + price.string() + " --output " + (dir / "p").string()).code, 2);
}

TEST_F(CliTest, ValidateSubcommandReport) {
    const auto r = run("validate --only 8,10 --output " + (dir / "v").string());
    EXPECT_EQ(r.code, 0) << r.output;
    EXPECT_NE(r.output.find("PASS [8]"), std::string::npos);
    const auto csv = slurp(dir / "v" / "validation.csv");
    EXPECT_EQ(csv.rfind("id,name,passed,measured,tolerance,seconds,details", 0), 0u);
}

TEST_F(CliTest, BenchRejectsNonPowerOfTwo) {
    EXPECT_EQ(run("bench --sizes 1000 --output " + (dir / "b").string()).code, 2);
}
