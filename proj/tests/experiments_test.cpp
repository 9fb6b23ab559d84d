#include <cmath>
#include <sstream>

#include <gtest/gtest.h>

#include "vhs/errors.h"
#include "vhs/experiments.h"
#include "vhs/mgarch.h"
#include "vhs/stats.h"

using namespace vhs;
using namespace vhs::experiments;

TEST(Spec, Validation) {
    auto s = DesignSpec::desk("C");
    EXPECT_NO_THROW(s.validate());
    EXPECT_EQ(s.n - s.n1, 200u);
    EXPECT_EQ(s.N, 20u);
    s.n1 = 400;
    EXPECT_THROW(s.validate(), ValidationError);
    EXPECT_THROW(DesignSpec::desk("Astar").validate(), UnsupportedError);
    auto f = DesignSpec::full("A");
    EXPECT_EQ(f.N, 100u);
    EXPECT_EQ(f.n - f.n1, 1000u);
}

TEST(Alternating, BlocksSwitchBetweenEvenAndOddAssets) {
    auto w = alternating_composition(250, 4, 100);
    EXPECT_DOUBLE_EQ(w(0, 1), 0.5);
    EXPECT_DOUBLE_EQ(w(0, 3), 0.5);
    EXPECT_DOUBLE_EQ(w(0, 0), 0.0);
    EXPECT_DOUBLE_EQ(w(100, 0), 0.5);
    EXPECT_DOUBLE_EQ(w(100, 1), 0.0);
    EXPECT_DOUBLE_EQ(w(200, 3), 0.5);
    for (Eigen::Index t = 0; t < w.rows(); ++t) EXPECT_DOUBLE_EQ(w.row(t).sum(), 1.0);
}

TEST(Design, SmallRunAuditsAgainstTraces) {
    auto s = DesignSpec::desk("C");
    s.N = 2;
    s.n = s.n1 + 40;
    s.keep_traces = true;
    auto t = run_design(s);
    ASSERT_EQ(t.rows.size(), 2u);
    for (const auto& row : t.rows) {
        EXPECT_GT(row.ratio_fhs, 0.0);
        EXPECT_GT(row.ratio_vhs, 0.0);
        EXPECT_TRUE(std::isfinite(row.ratio_vhs));
        double s2 = 0.0, v2 = 0.0;
        std::size_t k = 0;
        for (const auto& tr : t.traces)
            if (tr.alpha == row.alpha) {
                s2 += (tr.spherical - tr.truth) * (tr.spherical - tr.truth);
                v2 += (tr.vhs - tr.truth) * (tr.vhs - tr.truth);
                ++k;
            }
        ASSERT_EQ(k, 80u);
        EXPECT_NEAR(row.mse_s, s2 / 80.0, 1e-12 * row.mse_s);
        EXPECT_NEAR(row.mse_vhs, v2 / 80.0, 1e-12 * row.mse_vhs);
    }
}

TEST(Design, DeterministicAcrossWorkerCounts) {
    auto s = DesignSpec::desk("E");
    s.N = 3;
    s.n = s.n1 + 20;
    auto a = run_design(s);
    s.workers = 3;
    auto b = run_design(s);
    std::ostringstream x, y;
    write_re_table(x, a);
    write_re_table(y, b);
    EXPECT_EQ(x.str(), y.str());
}

TEST(Design, TruthUsesInnovationLaw) {
    auto s = DesignSpec::desk("B");
    s.N = 1;
    s.n = s.n1 + 5;
    s.alphas = {0.05};
    s.keep_traces = true;
    auto t = run_design(s);
    auto sample = mgarch::simulate_cdcc(mgarch::design_params("B"), mgarch::Innovation::StudentT7, s.n, s.burn_in, s.seed);
    const auto& tr = t.traces.front();
    const Eigen::MatrixXd H = sample.truth.covariance(tr.t);
    const Eigen::VectorXd a = min_variance_weights(H);
    EXPECT_NEAR(tr.truth, std::sqrt(a.dot(H * a)) * mgarch::innovation_var(mgarch::Innovation::StudentT7, 0.05),
                1e-12 * tr.truth);
}

TEST(FactorBacktest, LargePanelRunsUnivariateOnly) {
    FactorBacktestSpec s;
    s.m = 4;
    s.window = 500;
    s.horizon = 20;
    auto r = run_factor_backtest(s);
    ASSERT_EQ(r.reports.size(), 2u);
    EXPECT_EQ(r.reports[0].method, "naive-garch");
    EXPECT_EQ(r.reports[1].method, "vhs");
    EXPECT_TRUE(r.reports[1].dm_p.has_value());
    EXPECT_FALSE(r.notes.empty());
}

TEST(FactorBacktest, BivariateRunsEveryMethod) {
    FactorBacktestSpec s;
    s.window = 500;
    s.horizon = 10;
    auto r = run_factor_backtest(s);
    ASSERT_EQ(r.reports.size(), 4u);
    for (const auto& tr : r.traces)
        for (double v : tr.var) EXPECT_GT(v, 0.0);
}

TEST(Rolling, MultivariateNeedsTwoAssets) {
    Eigen::MatrixXd y = Eigen::MatrixXd::Random(700, 3);
    Eigen::MatrixXd w = Eigen::MatrixXd::Constant(700, 3, 1.0 / 3.0);
    RollingSpec rs;
    rs.start = 600;
    rs.end = 610;
    rs.window = Window::rolling(500);
    rs.min_window = 500;
    rs.methods = {Method::VHS, Method::FHS};
    EXPECT_THROW(run_rolling_evaluation(y, w, rs), UnsupportedError);
}

TEST(Static, FhsEqualsVhs) {
    auto b = run_static_crystallized(3, 600);
    ASSERT_EQ(b.fhs.size(), 500u);
    for (std::size_t k = 0; k < b.fhs.size(); ++k) EXPECT_NEAR(b.fhs[k], b.vhs[k], 1e-12 * std::abs(b.vhs[k]));
}

TEST(Static, TruthFromCovariance) {
    auto b = run_static_crystallized(4, 300, 0.05, false);
    const auto c = static_covariance();
    EXPECT_NEAR(c(0, 1), -0.855 * 0.01 * 0.02, 1e-18);
    for (std::size_t k = 0; k < b.truth.size(); k += 50) {
        Eigen::VectorXd a = b.weights.row(static_cast<Eigen::Index>(b.start + k)).transpose();
        EXPECT_NEAR(b.truth[k], std::sqrt(a.dot(c * a)) * 1.6448536269514722, 1e-12);
        EXPECT_NEAR(a.sum(), 1.0, 1e-12);
    }
    EXPECT_TRUE(b.naive.empty());
}

TEST(Static, NaiveDriftsAwayFromTruth) {
    int naive_worse = 0;
    const int seeds = 9;
    for (int s = 0; s < seeds; ++s) {
        auto b = run_static_crystallized(100 + static_cast<std::uint64_t>(s), 3000);
        const auto k = b.truth.size() - 1;
        if (std::abs(b.naive[k] - b.truth[k]) > std::abs(b.spherical[k] - b.truth[k])) ++naive_worse;
    }
    EXPECT_GT(naive_worse, seeds / 2);
}
