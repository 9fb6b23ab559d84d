#include <cmath>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "oracles.h"
#include "test_util.h"
#include "vhs/backtest.h"
#include "vhs/errors.h"
#include "vhs/stats.h"

using namespace vhs;
using namespace vhs::backtest;

namespace {

ViolationSeries hits_with(std::size_t n, std::size_t k, double alpha) {
    ViolationSeries v;
    v.alpha = alpha;
    v.hits.assign(n, 0);
    for (std::size_t i = 0; i < k; ++i) v.hits[i * (n / k)] = 1;
    return v;
}

}  // namespace

TEST(Violations, StrictInequality) {
    std::vector<double> r{-0.06, -0.05}, var{0.05, 0.05};
    auto v = violations(r, var, 0.05);
    EXPECT_EQ(v.hits[0], 1);
    EXPECT_EQ(v.hits[1], 0);
    EXPECT_THROW(violations(r, std::vector<double>{0.05}, 0.05), ShapeError);
}

TEST(Violations, HitRateUnderTrueVar) {
    auto r = test::gaussian(100000, 71);
    std::vector<double> var(r.size(), -stats::normal_quantile(0.05));
    const double rate = static_cast<double>(violations(r, var, 0.05).count()) / 100000.0;
    EXPECT_NEAR(rate, 0.05, 3.0 * std::sqrt(0.05 * 0.95 / 100000.0));
}

TEST(Christoffersen, ExactCoverageGivesZero) {
    auto t = christoffersen_tests(hits_with(1000, 50, 0.05));
    EXPECT_NEAR(t.lr_uc, 0.0, 1e-9);
    EXPECT_NEAR(t.p_uc, 1.0, 1e-6);
}

TEST(Christoffersen, UnconditionalCoverageByHand) {
    auto t = christoffersen_tests(hits_with(100, 10, 0.05));
    const double expected = -2.0 * (90 * std::log(0.95) + 10 * std::log(0.05) - 90 * std::log(0.9) - 10 * std::log(0.1));
    EXPECT_NEAR(t.lr_uc, expected, 1e-12);
    EXPECT_NEAR(t.lr_uc, 4.1308, 1e-4);
    EXPECT_NEAR(t.p_uc, 0.04211, 1e-5);
}

TEST(Christoffersen, AlternatingPatternRejectsIndependence) {
    ViolationSeries v;
    v.alpha = 0.05;
    for (int i = 0; i < 200; ++i) v.hits.push_back(static_cast<std::uint8_t>(i % 2));
    auto t = christoffersen_tests(v);
    EXPECT_LT(t.p_ind, 0.01);
    EXPECT_EQ(t.n01 + t.n10, 199u);
}

TEST(Christoffersen, NoHitsIsDegenerate) {
    ViolationSeries v;
    v.alpha = 0.05;
    v.hits.assign(300, 0);
    auto t = christoffersen_tests(v);
    EXPECT_TRUE(t.ind_degenerate);
    EXPECT_EQ(t.p_ind, 1.0);
    EXPECT_GT(t.lr_uc, 0.0);
    EXPECT_NEAR(t.lr_uc, -2.0 * 300 * std::log(0.95), 1e-10);
}

TEST(Christoffersen, ShortSampleIsFlagged) {
    auto t = christoffersen_tests(hits_with(50, 2, 0.05));
    EXPECT_TRUE(t.short_sample);
}

TEST(Christoffersen, MatchesBruteForceOnRandomSequences) {
    std::mt19937_64 rng(72);
    for (int rep = 0; rep < 50; ++rep) {
        std::bernoulli_distribution b(0.03 + 0.002 * rep);
        ViolationSeries v;
        v.alpha = 0.05;
        for (int i = 0; i < 150; ++i) v.hits.push_back(b(rng));
        auto t = christoffersen_tests(v);
        auto o = test::brute_force_lr(v.hits, 0.05);
        EXPECT_NEAR(t.lr_uc, o.uc, 1e-10);
        if (o.ind_defined) EXPECT_NEAR(t.lr_ind, o.ind, 1e-10);
        EXPECT_NEAR(t.lr_cc, t.lr_uc + t.lr_ind, 1e-12);
    }
}

TEST(Loss, HandExamples) {
    auto one = av_es_loss(std::vector<double>{-0.06}, std::vector<double>{0.05}, 0.05);
    ASSERT_TRUE(one.av && one.es);
    EXPECT_NEAR(*one.av, 0.01, 1e-15);
    EXPECT_NEAR(*one.es, 0.06, 1e-15);

    std::vector<double> r(20), var(20);
    for (int i = 0; i < 20; ++i) {
        r[static_cast<std::size_t>(i)] = 0.01 * i;
        var[static_cast<std::size_t>(i)] = 0.1 - 0.01 * i;
    }
    auto s = av_es_loss(r, var, 0.05);
    EXPECT_FALSE(s.av.has_value());
    EXPECT_NEAR(s.loss, 0.005, 1e-15);
}

TEST(Loss, NonNegativeAndEsAvIdentity) {
    auto r = test::gaussian(2000, 73);
    std::vector<double> var(r.size());
    std::mt19937_64 rng(74);
    std::uniform_real_distribution<double> u(0.5, 2.5);
    for (auto& v : var) v = u(rng);
    for (double l : loss_series(r, var, 0.05)) EXPECT_GE(l, 0.0);
    auto s = av_es_loss(r, var, 0.05);
    double var_on_hits = 0.0, k = 0.0;
    for (std::size_t t = 0; t < r.size(); ++t)
        if (r[t] < -var[t]) {
            var_on_hits += var[t];
            k += 1.0;
        }
    EXPECT_NEAR(*s.es - *s.av, var_on_hits / k, 1e-12);
    EXPECT_GE(*s.es, *s.av);
}

TEST(Loss, TrueQuantileMinimizesExpectedLoss) {
    auto r = test::gaussian(200000, 75);
    const double q = -stats::normal_quantile(0.05);
    auto at = [&](double v) { return av_es_loss(r, std::vector<double>(r.size(), v), 0.05).loss; };
    EXPECT_LT(at(q), at(q * 0.8));
    EXPECT_LT(at(q), at(q * 1.2));
}

TEST(Dm, Degenerate) {
    std::vector<double> a{0.1, 0.2, 0.3, 0.4};
    auto same = dm_test(a, a);
    EXPECT_TRUE(same.degenerate);
    EXPECT_EQ(same.p_value, 1.0);
    std::vector<double> b{1.1, 1.2, 1.3, 1.4};
    auto shifted = dm_test(b, a);
    EXPECT_TRUE(std::isinf(shifted.statistic) && shifted.statistic > 0);
    EXPECT_EQ(shifted.p_value, 0.0);
}

TEST(Dm, StatisticByHand) {
    auto x = test::gaussian(400, 76);
    std::vector<double> zero(400, 0.0);
    for (auto& v : x) v += 0.1;
    auto r = dm_test(x, zero);
    const std::size_t b = 7;  // floor(400^(1/3))
    EXPECT_EQ(r.bandwidth, b);
    const double m = stats::mean(x);
    std::vector<double> c(x);
    for (auto& v : c) v -= m;
    double lrv = 0.0;
    for (double v : c) lrv += v * v;
    lrv /= 400.0;
    for (std::size_t h = 1; h <= b; ++h) {
        double g = 0.0;
        for (std::size_t t = h; t < 400; ++t) g += c[t] * c[t - h];
        lrv += 2.0 * (1.0 - static_cast<double>(h) / (b + 1.0)) * g / 400.0;
    }
    const double dm = m / std::sqrt(lrv / 400.0);
    EXPECT_NEAR(r.statistic, dm, 1e-10);
    EXPECT_NEAR(r.p_value, 1.0 - stats::normal_cdf(dm), 1e-12);
}

TEST(Report, CsvColumns) {
    auto r = test::gaussian(300, 77);
    std::vector<double> v1(300, 1.6), v2(300, 1.2);
    std::vector<BacktestReport> reps{make_report("a", "ep", r, v1, 0.05)};
    std::ostringstream one;
    write_reports_csv(one, reps);
    EXPECT_EQ(one.str().find("dm_p"), std::string::npos);
    reps.push_back(make_report("b", "ep", r, v2, 0.05));
    attach_dm(reps[1], r, v2, v1, 0.05);
    std::ostringstream two;
    write_reports_csv(two, reps);
    const auto text = two.str();
    EXPECT_EQ(text.substr(0, text.find('\n')),
              "method,episode,n,viol_pct,lr_uc_p,lr_uc_pct,lr_ind_p,lr_ind_pct,lr_cc_p,lr_cc_pct,var_bar,av,es,loss,dm_p");
    EXPECT_NEAR(reps[0].viol_pct, 100.0 * static_cast<double>(violations(r, v1, 0.05).count()) / 300.0, 1e-12);
}
