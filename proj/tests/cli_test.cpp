#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "vhs/commands.h"
#include "vhs/config.h"
#include "vhs/csv.h"
#include "vhs/errors.h"
#include "vhs/experiments.h"

namespace fs = std::filesystem;
using namespace vhs;

namespace {

class Cli : public ::testing::Test {
  protected:
    void SetUp() override {
        dir_ = fs::temp_directory_path() / ("vhs_cli_test_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    int run(const std::string& args) const {
        const std::string cmd = std::string(VHS_CLI_PATH) + " " + args + " > " + (dir_ / "stdout.txt").string() + " 2> " +
                                (dir_ / "stderr.txt").string();
        const int status = std::system(cmd.c_str());
        return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    }

    std::string path(const std::string& name) const { return (dir_ / name).string(); }

    static std::string slurp(const std::string& p) {
        std::ifstream in(p, std::ios::binary);
        std::ostringstream s;
        s << in.rdbuf();
        return s.str();
    }

    static std::size_t lines(const std::string& p) {
        const auto s = slurp(p);
        return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n'));
    }

    fs::path dir_;
};

}  // namespace

TEST_F(Cli, SimulateShapeAndMetadata) {
    ASSERT_EQ(run("simulate --design E --n 2000 --seed 7 --output " + path("sim")), 0);
    EXPECT_EQ(lines(path("sim/returns.csv")), 2001u);
    auto p = csv::read_prices(path("sim/panel.csv"));
    EXPECT_EQ(p.rows(), 2001u);
    EXPECT_EQ(p.cols(), 2u);
    const auto meta = slurp(path("sim/simulate.meta"));
    EXPECT_NE(meta.find("seed=7"), std::string::npos);
    EXPECT_NE(meta.find("burn_in=500"), std::string::npos);
    EXPECT_NE(meta.find("param_alpha_c=0.04"), std::string::npos);
}

TEST_F(Cli, SimulateIsDeterministic) {
    std::vector<std::string> first;
    const std::vector<std::string> files{"panel.csv", "returns.csv", "simulate.meta"};
    ASSERT_EQ(run("simulate --design B --n 300 --seed 3 --output " + path("a")), 0);
    for (const auto& f : files) first.push_back(slurp(path("a/" + f)));
    fs::remove_all(path("a"));
    ASSERT_EQ(run("simulate --design B --n 300 --seed 3 --output " + path("a")), 0);
    for (std::size_t i = 0; i < files.size(); ++i) EXPECT_EQ(slurp(path("a/" + files[i])), first[i]) << files[i];
    ASSERT_EQ(run("simulate --design B --n 300 --seed 4 --output " + path("c")), 0);
    EXPECT_NE(slurp(path("c/panel.csv")), first[0]);
}

TEST_F(Cli, UnsupportedDesigns) {
    EXPECT_EQ(run("simulate --design Astar --output " + path("x")), 4);
    EXPECT_EQ(run("experiment --table 1 --design Astar --output " + path("x")), 4);
    EXPECT_NE(slurp(path("stderr.txt")).find("not supported"), std::string::npos);
}

TEST_F(Cli, VarHappyPathAndDeterminism) {
    ASSERT_EQ(run("simulate --design E --n 1000 --seed 2 --output " + path("sim")), 0);
    const std::string common = "var --method vhs --alpha 0.05 --policy static:equal --prices " + path("sim/panel.csv");
    ASSERT_EQ(run(common + " --output " + path("v1")), 0);
    ASSERT_EQ(run(common + " --output " + path("v2")), 0);
    const auto report = slurp(path("v1/var_report.txt"));
    for (auto key : {"var=", "ci_lower=", "ci_upper=", "delta=", "zeta=", "lemma2_all_ok="})
        EXPECT_NE(report.find(key), std::string::npos) << key;
    EXPECT_EQ(report, slurp(path("v2/var_report.txt")));
    EXPECT_EQ(slurp(path("v1/sigma_alpha.csv")), slurp(path("v2/sigma_alpha.csv")));
}

TEST_F(Cli, ValidationErrorsAreAggregated) {
    ASSERT_EQ(run("simulate --design C --n 600 --output " + path("sim")), 0);
    EXPECT_EQ(run("var --alpha 0.7 --alpha0 3 --policy nonsense --prices " + path("sim/panel.csv") + " --output " +
                  path("v")),
              2);
    const auto err = slurp(path("stderr.txt"));
    EXPECT_NE(err.find("3 problems"), std::string::npos);
    EXPECT_NE(err.find("alpha:"), std::string::npos);
    EXPECT_NE(err.find("alpha0:"), std::string::npos);
    EXPECT_NE(err.find("policy:"), std::string::npos);
    EXPECT_FALSE(fs::exists(path("v")));
}

TEST_F(Cli, MissingCsvIsIoError) {
    EXPECT_EQ(run("var --prices " + path("missing.csv") + " --output " + path("v")), 3);
    EXPECT_EQ(run("backtest --prices " + path("missing.csv") + " --output " + path("b")), 3);
}

TEST_F(Cli, UnknownSubcommandOrFlag) {
    EXPECT_EQ(run("frobnicate"), 2);
    EXPECT_EQ(run("var --bogus 1"), 2);
}

TEST_F(Cli, ConfigFileWithFlagOverride) {
    ASSERT_EQ(run("simulate --design C --n 700 --output " + path("sim")), 0);
    {
        std::ofstream cfg(path("run.cfg"));
        cfg << "# settings\nprices = " << path("sim/panel.csv") << "\nalpha = 0.01\npolicy = crystallized:equal\n";
    }
    ASSERT_EQ(run("var --config " + path("run.cfg") + " --alpha 0.05 --output " + path("v")), 0);
    const auto report = slurp(path("v/var_report.txt"));
    EXPECT_NE(report.find("alpha=0.05\n"), std::string::npos);
    const auto meta = slurp(path("v/var.meta"));
    EXPECT_NE(meta.find("config.alpha=0.05  # flag"), std::string::npos);
    EXPECT_NE(meta.find("config.policy=crystallized:equal  # file"), std::string::npos);

    std::ofstream bad(path("bad.cfg"));
    bad << "prices = x.csv\ncolour = blue\n";
    bad.close();
    EXPECT_EQ(run("var --config " + path("bad.cfg") + " --output " + path("w")), 2);
    EXPECT_NE(slurp(path("stderr.txt")).find("colour"), std::string::npos);
}

TEST_F(Cli, BacktestSingleMethodHasNoDmColumn) {
    ASSERT_EQ(run("simulate --design factor --n 560 --seed 5 --output " + path("sim")), 0);
    ASSERT_EQ(run("backtest --methods vhs --window rolling:500 --policy alternate:100 --prices " + path("sim/panel.csv") +
                  " --output " + path("b")),
              0);
    const auto csv = slurp(path("b/backtest.csv"));
    EXPECT_EQ(csv.find("dm_p"), std::string::npos);
    EXPECT_EQ(lines(path("b/backtest.csv")), 2u);
}

TEST_F(Cli, MultivariateBacktestNeedsTwoAssets) {
    ASSERT_EQ(run("simulate --design factor --m 4 --n 560 --output " + path("sim")), 0);
    EXPECT_EQ(run("backtest --methods vhs,fhs --window rolling:500 --prices " + path("sim/panel.csv") + " --output " +
                  path("b")),
              4);
    EXPECT_NE(slurp(path("stderr.txt")).find("m = 2"), std::string::npos);
}

TEST_F(Cli, BacktestMatchesFactorExperiment) {
    const std::size_t window = 500, horizon = 30;
    ASSERT_EQ(run("simulate --design factor --n " + std::to_string(window + horizon) + " --seed 9 --output " + path("sim")), 0);
    ASSERT_EQ(run("backtest --methods naive-garch,vhs --window rolling:500 --policy alternate:100 --prices " +
                  path("sim/panel.csv") + " --output " + path("b")),
              0);
    experiments::FactorBacktestSpec spec;
    spec.window = window;
    spec.horizon = horizon;
    spec.seed = 9;
    spec.methods = {Method::NaiveGarch, Method::VHS};
    auto ref = experiments::run_factor_backtest(spec);

    std::ifstream in(path("b/backtest_traces.csv"));
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line, "t,date,return,naive-garch,vhs");
    for (std::size_t k = 0; k < horizon; ++k) {
        ASSERT_TRUE(std::getline(in, line));
        auto cells = split(line, ',');
        ASSERT_EQ(cells.size(), 5u);
        EXPECT_NEAR(std::stod(cells[2]), 0.01 * ref.returns[k], 1e-12);
        EXPECT_NEAR(std::stod(cells[3]) / (0.01 * ref.traces[0].var[k]), 1.0, 1e-5);
        EXPECT_NEAR(std::stod(cells[4]) / (0.01 * ref.traces[1].var[k]), 1.0, 1e-5);
    }
    const auto csv = slurp(path("b/backtest.csv"));
    EXPECT_NE(csv.find(",dm_p\n"), std::string::npos);
    EXPECT_EQ(lines(path("b/backtest.csv")), 3u);
}

TEST_F(Cli, ExperimentTableOneMatchesLibrary) {
    ASSERT_EQ(run("experiment --table 1 --designs C --replications 1 --predictions 5 --workers 1 --output " + path("e")), 0);
    auto spec = experiments::DesignSpec::desk("C");
    spec.N = 1;
    spec.n = spec.n1 + 5;
    std::ostringstream expect;
    experiments::write_re_table(expect, experiments::run_design(spec));
    EXPECT_EQ(slurp(path("e/table1.csv")), expect.str());
}

TEST_F(Cli, ExperimentStaticIsDeterministic) {
    ASSERT_EQ(run("experiment --table static --n 400 --seed 2 --output " + path("a")), 0);
    ASSERT_EQ(run("experiment --table static --n 400 --seed 2 --output " + path("b")), 0);
    EXPECT_EQ(slurp(path("a/static.csv")), slurp(path("b/static.csv")));
    EXPECT_EQ(lines(path("a/static.csv")), 301u);
}

TEST(ConfigParse, CommentsAndErrors) {
    std::istringstream ok("# comment\n alpha = 0.1  # trailing\n\nwindow=rolling:300\n");
    auto c = RunConfig::parse(ok, "var");
    EXPECT_EQ(c.get("alpha").value(), "0.1");
    EXPECT_EQ(c.get("window").value(), "rolling:300");
    c.set_flag("alpha", "0.2");
    EXPECT_EQ(c.get("alpha").value(), "0.2");
    std::istringstream bad("alpha\n=3\n");
    EXPECT_THROW(RunConfig::parse(bad), ValidationError);
}

TEST(ConfigParse, ReaderAggregatesProblems) {
    RunConfig c("var");
    c.set_flag("alpha", "x");
    c.set_flag("n", "-3");
    ConfigReader rd(c);
    rd.real("alpha", 0.05, 0, 0.5);
    rd.count("n", 1);
    rd.required("prices");
    try {
        rd.finish();
        FAIL();
    } catch (const ValidationError& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("3 problems"), std::string::npos);
    }
}

TEST(Policy, Parsing) {
    PriceMatrix p;
    p.prices = Eigen::MatrixXd::Constant(5, 2, 2.0);
    p.dates = make_dates(5, "2021-01-01");
    p.assets = {"a", "b"};
    EXPECT_TRUE(std::holds_alternative<policy::Static>(cli::parse_policy("static:equal", p)));
    EXPECT_TRUE(std::holds_alternative<policy::Crystallized>(cli::parse_policy("crystallized:1,3", p)));
    EXPECT_TRUE(std::holds_alternative<policy::RebalancedEvery>(cli::parse_policy("rebalance:5:0.2,0.8", p)));
    EXPECT_TRUE(std::holds_alternative<policy::MinVariance>(cli::parse_policy("minvar:40", p)));
    EXPECT_TRUE(std::holds_alternative<policy::Schedule>(cli::parse_policy("alternate:2", p)));
    EXPECT_THROW(cli::parse_policy("static:1,2,3", p), ValidationError);
    EXPECT_FALSE(cli::check_policy_syntax("rebalance:0:equal").empty());
    EXPECT_FALSE(cli::check_policy_syntax("static:-1,2").empty());
}

TEST(ExitCodes, Mapping) {
    EXPECT_EQ(cli::exit_code(ValidationError("x")), 2);
    EXPECT_EQ(cli::exit_code(IoError("x")), 3);
    EXPECT_EQ(cli::exit_code(UnsupportedError("x")), 4);
    EXPECT_EQ(cli::exit_code(ConvergenceError("x")), 1);
    EXPECT_EQ(cli::exit_code(std::runtime_error("x")), 1);
}
