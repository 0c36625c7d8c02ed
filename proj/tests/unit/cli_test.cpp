#include "shrinkrisk/cli.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "support/oracles.hpp"

using namespace shrinkrisk;
namespace fs = std::filesystem;

namespace {

class CliTest : public ::testing::Test {
protected:
    void SetUp() override {
        dir_ = fs::temp_directory_path() /
               ("shrinkrisk_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    std::string path(const std::string& name) const { return (dir_ / name).string(); }

    std::string write_config(const std::string& name, const std::string& json) const {
        std::ofstream(path(name)) << json;
        return path(name);
    }

    fs::path dir_;
};

std::string read_file(const std::string& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

int run_binary(const std::string& args) {
    const std::string cmd = std::string(SHRINKRISK_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

const char* kFixture = R"({
  "instance": { "design": [[2, 1], [2, -1], [0, 0], [0, 0]], "beta": [1, 1], "noise_variance": 1 },
  "lambdas": [1.0],
  "monte_carlo": { "trials": 100000, "seed": 5 }
})";

const char* kNoiseless = R"({
  "instance": { "design": [[2, 1], [2, -1], [0, 0], [0, 0]], "beta": [1, 1], "noise_variance": 0 },
  "lambdas": [0, 0.5, 1, 3],
  "monte_carlo": { "trials": 50, "seed": 5 }
})";

const char* kTight = R"({ "instance": { "design": [[1]], "beta": [0], "noise_variance": 1 }, "lambdas": [1] })";

std::vector<std::string> csv_fields(const std::string& line) {
    std::vector<std::string> f;
    std::stringstream s(line);
    for (std::string cell; std::getline(s, cell, ',');) {
        f.push_back(cell);
    }
    return f;
}

std::vector<std::string> data_lines(const std::string& csv) {
    std::vector<std::string> lines;
    std::stringstream s(csv);
    std::string line;
    std::getline(s, line);
    while (std::getline(s, line)) {
        lines.push_back(line);
    }
    return lines;
}

} // namespace

TEST_F(CliTest, SweepFixtureValues) {
    std::ostringstream out, err;
    ASSERT_EQ(cli::run_sweep(write_config("c.json", kFixture), {}, out, err), 0) << err.str();
    const std::string csv = out.str();
    EXPECT_EQ(csv.substr(0, csv.find('\n')), std::string(kSweepHeader));
    const auto rows = data_lines(csv);
    ASSERT_EQ(rows.size(), 1U);
    const auto f = csv_fields(rows[0]);
    ASSERT_EQ(f.size(), 10U);
    EXPECT_LE(oracle::rel_err(std::stod(f[3]), 7.0 / 12.0), 1e-12);
    EXPECT_LE(oracle::rel_err(std::stod(f[6]), 0.75), 1e-12);
    EXPECT_EQ(f[9], "true");
}

TEST_F(CliTest, SweepAtZeroHasUnitRatio) {
    std::ostringstream out, err;
    const std::string cfg = write_config("c.json", R"({
      "instance": { "design": [[2, 1], [2, -1], [0, 0], [0, 0]], "beta": [1, 1], "noise_variance": 1 },
      "lambdas": [0] })");
    ASSERT_EQ(cli::run_sweep(cfg, {}, out, err), 0);
    const auto f = csv_fields(data_lines(out.str()).at(0));
    EXPECT_EQ(std::stod(f[7]), 1.0);
}

TEST_F(CliTest, MalformedConfigExitsTwoWithoutOutput) {
    const std::string bad[] = {
        R"({ "instance": { "design": [[1]], "beta": [0], "noise_variance": 1 } })",
        R"({ "instance": { "design": [[1]], "beta": [0], "noise_variance": -1 }, "lambdas": [1] })",
        R"({ "instance": { "design": [[1]], "beta": [0], "noise_variance": 1 }, "lambdas": [2, 1] })",
        R"({ "instance": { "design": [[1]], "beta": [0], "noise_variance": 1 }, "lambdas": [1], "extra": 1 })",
        R"({ "lambdas": [1] })",
        R"({ not json )",
    };
    int i = 0;
    for (const std::string& text : bad) {
        const std::string cfg = write_config("bad" + std::to_string(i) + ".json", text);
        const std::string csv = path("out" + std::to_string(i) + ".csv");
        const std::string svg = path("out" + std::to_string(i) + ".svg");
        std::ostringstream out, err;
        cli::RunOptions opts;
        opts.out = csv;
        opts.plot = svg;
        EXPECT_EQ(cli::run_sweep(cfg, opts, out, err), 2) << text;
        EXPECT_FALSE(err.str().empty());
        EXPECT_FALSE(fs::exists(csv));
        EXPECT_FALSE(fs::exists(svg));
        ++i;
    }
    EXPECT_EQ(run_binary("sweep " + path("missing.json") + " --out " + path("never.csv")), 2);
    EXPECT_FALSE(fs::exists(path("never.csv")));
}

TEST_F(CliTest, VerifyFixtureAgrees) {
    std::ostringstream out, err;
    ASSERT_EQ(cli::run_verify(write_config("c.json", kFixture), {}, out, err), 0) << out.str();
    const std::string header = out.str().substr(0, out.str().find('\n'));
    EXPECT_EQ(header, std::string(kSweepHeader) + std::string(kVerifyHeaderSuffix));
    const auto f = csv_fields(data_lines(out.str()).at(0));
    ASSERT_EQ(f.size(), 15U);
    EXPECT_EQ(f[14], "true");
}

TEST_F(CliTest, VerifyNoiselessIsExact) {
    std::ostringstream out, err;
    ASSERT_EQ(cli::run_verify(write_config("c.json", kNoiseless), {}, out, err), 0) << out.str();
    for (const std::string& line : data_lines(out.str())) {
        const auto f = csv_fields(line);
        EXPECT_EQ(std::stod(f[11]), 0.0);
        EXPECT_EQ(std::stod(f[13]), 0.0);
        EXPECT_LE(oracle::rel_err(std::stod(f[10]), std::stod(f[2])), 1e-12) << line;
        EXPECT_LE(oracle::rel_err(std::stod(f[12]), std::stod(f[5])), 1e-12) << line;
        EXPECT_EQ(f[14], "true");
    }
}

TEST_F(CliTest, VerifyCorruptedOracleFails) {
    std::ostringstream out, err;
    cli::RunOptions opts;
    opts.corrupt_analytic = [](double v) { return 1.1 * v + 0.01; };
    EXPECT_EQ(cli::run_verify(write_config("c.json", kFixture), opts, out, err), 1);
    EXPECT_NE(out.str().find("false"), std::string::npos);
}

TEST_F(CliTest, VerifyNeedsMonteCarloBlock) {
    std::ostringstream out, err;
    EXPECT_EQ(cli::run_verify(write_config("c.json", kTight), {}, out, err), 2);
}

TEST_F(CliTest, CertifyTightCase) {
    std::ostringstream out, err;
    ASSERT_EQ(cli::run_certify(write_config("c.json", kTight), {}, out, err), 0);
    const std::string report = out.str();
    const auto pos = report.find("worst ratio: ");
    ASSERT_NE(pos, std::string::npos);
    const double worst = std::stod(report.substr(pos + 13));
    EXPECT_NEAR(worst, 4.0, 1e-9);
    EXPECT_NE(report.find("lambda=1"), std::string::npos);
}

TEST_F(CliTest, CertifyZeroOnly) {
    std::ostringstream out, err;
    const std::string cfg = write_config("c.json", R"({
      "instance": { "design": [[3, 0], [0, 1], [1, 1]], "beta": [1, -2], "noise_variance": 2 },
      "lambdas": [0] })");
    ASSERT_EQ(cli::run_certify(cfg, {}, out, err), 0);
    EXPECT_NE(out.str().find("worst ratio: 1 at lambda=0"), std::string::npos) << out.str();
}

TEST_F(CliTest, CertifyBattery) {
    cli::RunOptions opts;
    opts.battery = true;
    std::ostringstream out, err;
    EXPECT_EQ(cli::run_certify(std::nullopt, opts, out, err), 0) << out.str();
    EXPECT_EQ(run_binary("certify --battery"), 0);
    EXPECT_EQ(run_binary("certify"), 2);
}

TEST_F(CliTest, SweepIsByteIdenticalAcrossRuns) {
    const std::string cfg = std::string(SHRINKRISK_CONFIG_DIR) + "/poly_decay_sweep.json";
    ASSERT_EQ(run_binary("sweep " + cfg + " --out " + path("a.csv") + " --plot " + path("a.svg")), 0);
    ASSERT_EQ(run_binary("sweep " + cfg + " --out " + path("b.csv") + " --plot " + path("b.svg")), 0);
    EXPECT_EQ(read_file(path("a.csv")), read_file(path("b.csv")));
    EXPECT_EQ(read_file(path("a.svg")), read_file(path("b.svg")));
    EXPECT_FALSE(read_file(path("a.csv")).empty());
}

TEST_F(CliTest, SeedOverrideChangesSynthesis) {
    const std::string cfg = std::string(SHRINKRISK_CONFIG_DIR) + "/poly_decay_sweep.json";
    ASSERT_EQ(run_binary("sweep " + cfg + " --out " + path("a.csv")), 0);
    ASSERT_EQ(run_binary("sweep " + cfg + " --seed 99 --out " + path("b.csv")), 0);
    ASSERT_EQ(run_binary("sweep " + cfg + " --seed 99 --out " + path("c.csv")), 0);
    EXPECT_NE(read_file(path("a.csv")), read_file(path("b.csv")));
    EXPECT_EQ(read_file(path("b.csv")), read_file(path("c.csv")));
}

TEST_F(CliTest, CsvRoundTripsAndPlotIsPureFunctionOfCsv) {
    std::ostringstream out, err;
    cli::RunOptions opts;
    opts.out = path("s.csv");
    opts.plot = path("s.svg");
    ASSERT_EQ(cli::run_sweep(std::string(SHRINKRISK_CONFIG_DIR) + "/two_coordinate.json", opts, out, err), 0);
    const std::string csv = read_file(path("s.csv"));
    const SweepResult parsed = parse_sweep_csv(csv);
    EXPECT_EQ(sweep_csv(parsed), csv);
    EXPECT_EQ(render_svg(parsed), read_file(path("s.svg")));
    EXPECT_EQ(csv.find('\r'), std::string::npos);
}

TEST_F(CliTest, WriteFailureExitsThree) {
    std::ostringstream out, err;
    cli::RunOptions opts;
    opts.out = path("no/such/dir/out.csv");
    EXPECT_EQ(cli::run_sweep(write_config("c.json", kTight), opts, out, err), 3);
    EXPECT_EQ(run_binary("sweep " + path("c.json") + " --out " + path("no/such/dir/out.csv")), 3);
}

TEST_F(CliTest, UsageErrorsExitTwo) {
    EXPECT_EQ(run_binary(""), 2);
    EXPECT_EQ(run_binary("sweep"), 2);
    EXPECT_EQ(run_binary("sweep a.json --seed notanumber"), 2);
    EXPECT_EQ(run_binary("--help"), 0);
}
