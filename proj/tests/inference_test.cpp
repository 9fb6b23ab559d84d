#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "test_util.h"
#include "vhs/errors.h"
#include "vhs/inference.h"
#include "vhs/stats.h"

using namespace vhs;
using namespace vhs::inference;

namespace {

const garch::GarchParams kTheta0{1.0, 0.09, 0.87};

garch::GarchFit fitted(std::size_t n, std::uint64_t seed) { return garch::fit_qml(test::garch_path(kTheta0, n, seed).eps); }

// Closed-form zeta for iid innovations, written out independently of the
// library: zeta = (kappa4-1) xi^2/4 + xi p / f + alpha(1-alpha)/f^2.
double zeta_closed_form(double xi, double f, double kappa4, double p, double alpha) {
    return (kappa4 - 1.0) * xi * xi / 4.0 + xi * p / f + alpha * (1.0 - alpha) / (f * f);
}

}  // namespace

TEST(JS11, UnitSquaresGiveZeroS11) {
    Eigen::MatrixXd d = Eigen::MatrixXd::Random(50, 3);
    std::vector<double> u(50);
    for (std::size_t t = 0; t < 50; ++t) u[t] = t % 2 ? 1.0 : -1.0;
    auto r = estimate_J_S11(d, u);
    EXPECT_EQ(r.S11.cwiseAbs().maxCoeff(), 0.0);
}

TEST(JS11, SmallSampleArithmetic) {
    Eigen::MatrixXd d(3, 3);
    d << 1, 2, 3, 0.5, -1, 2, 1, 0, 0;
    std::vector<double> u{2.0, 0.0, 1.0};
    auto r = estimate_J_S11(d, u);
    Eigen::Matrix3d J = Eigen::Matrix3d::Zero(), S = Eigen::Matrix3d::Zero();
    for (int t = 0; t < 3; ++t) {
        const double w = u[static_cast<std::size_t>(t)] * u[static_cast<std::size_t>(t)] - 1.0;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) {
                J(i, j) += d(t, i) * d(t, j) / 3.0;
                S(i, j) += w * w * d(t, i) * d(t, j) / 3.0;
            }
    }
    EXPECT_LT((r.J - J).cwiseAbs().maxCoeff(), 1e-15);
    EXPECT_LT((r.S11 - S).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(JS11, SingularJIsRejected) {
    Eigen::MatrixXd d(10, 3);
    d.col(0).setOnes();
    d.col(1).setOnes();
    d.col(2) = Eigen::VectorXd::LinSpaced(10, 0, 1);
    std::vector<double> u(10, 0.5);
    EXPECT_THROW(estimate_J_S11(d, u), RankDeficiencyError);
}

TEST(JS11, GaussianS11IsTwiceJ) {
    auto fit = fitted(10000, 51);
    auto r = estimate_J_S11(fit.d_paths, fit.residuals);
    for (int i = 0; i < 3; ++i) EXPECT_NEAR(r.S11(i, i) / (2.0 * r.J(i, i)), 1.0, 0.1);
}

TEST(Hac, IidIndicatorVariance) {
    std::mt19937_64 rng(52);
    std::bernoulli_distribution b(0.05);
    std::vector<double> x(10000);
    for (auto& v : x) v = (b(rng) ? 1.0 : 0.0) - 0.05;
    EXPECT_NEAR(hac_variance(x, default_bandwidth(x.size())) / (0.05 * 0.95), 1.0, 0.15);
}

TEST(Hac, Ar1LongRunVariance) {
    const double rho = 0.5;
    auto z = test::gaussian(200000, 53);
    std::vector<double> x(z.size());
    x[0] = z[0];
    for (std::size_t t = 1; t < x.size(); ++t) x[t] = rho * x[t - 1] + z[t];
    const double expected = 1.0 / ((1 - rho) * (1 - rho));
    EXPECT_NEAR(hac_variance(x, 60) / expected, 1.0, 0.1);
}

TEST(Hac, BartlettWeightsByHand) {
    std::vector<double> x{1, -1, 2, 0};
    // gamma0 = 6/4, gamma1 = (-1 - 2 + 0)/4, b = 1 -> weight 1/2
    EXPECT_NEAR(hac_variance(x, 1), 1.5 + 2 * 0.5 * (-0.75), 1e-15);
    EXPECT_THROW(hac_variance(x, 4), DomainError);
}

TEST(Hac, IndependentStreamsGiveSmallCross) {
    auto ind = test::gaussian(10000, 54);
    auto z = test::gaussian(30000, 55);
    Eigen::MatrixXd c(10000, 3);
    for (int t = 0; t < 10000; ++t)
        for (int k = 0; k < 3; ++k) c(t, k) = z[static_cast<std::size_t>(3 * t + k)];
    auto lr = hac_long_run(ind, c, std::nullopt);
    const double se = std::sqrt(static_cast<double>(2 * lr.bandwidth + 1) / 10000.0);
    for (int k = 0; k < 3; ++k) EXPECT_LT(std::abs(lr.S12[k]), 3 * se);
}

TEST(Psi, IndicatorOnUniformResiduals) {
    std::mt19937_64 rng(56);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    const std::size_t n = 20000;
    std::vector<double> u(n);
    for (auto& v : u) v = uni(rng);
    Eigen::MatrixXd d = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), 3);
    d.col(0).setOnes();
    auto r = psi_indicator(u, d, 0.5, 0.1);
    EXPECT_NEAR(r.psi[0], 1.0, 0.1);
    EXPECT_EQ(r.psi[1], 0.0);
    EXPECT_NEAR(r.f_bar, 1.0, 0.1);
}

TEST(Psi, EmptyWindowIsFlagged) {
    std::vector<double> u(100, 3.0);
    Eigen::MatrixXd d = Eigen::MatrixXd::Ones(100, 3);
    auto r = psi_indicator(u, d, -1.0, 0.1);
    EXPECT_TRUE(r.empty_window);
    EXPECT_EQ(r.psi.cwiseAbs().maxCoeff(), 0.0);
}

// The window [xi, xi + h) is one-sided, so a narrow h keeps the bias small;
// five seeds are averaged to keep the count noise below the tolerance.
TEST(Psi, IndicatorMatchesIidClosedForm) {
    const double xi = -1.6448536;
    Eigen::Vector3d ratio = Eigen::Vector3d::Zero();
    for (std::uint64_t s = 0; s < 5; ++s) {
        auto fit = fitted(10000, 57 + 100 * s);
        auto r = psi_indicator(fit.residuals, fit.d_paths, xi, 0.08);
        const Eigen::Vector3d mean_d = fit.d_paths.colwise().mean().transpose();
        ratio += r.psi.cwiseQuotient(stats::normal_pdf(xi) * mean_d) / 5.0;
    }
    for (int k = 0; k < 3; ++k) EXPECT_NEAR(ratio[k], 1.0, 0.15);
}

TEST(Psi, KernelDensityOracle) {
    auto fit = fitted(10000, 58);
    const double xi = garch::residual_quantile(fit.residuals, 0.05).xi;
    const double h = default_psi_bandwidth(fit.residuals);
    auto k = psi_kernel(fit.residuals, fit.d_paths, xi, h, h, KdeMode::Exact);
    EXPECT_NEAR(k.f_bar / stats::normal_pdf(-1.6448536), 1.0, 0.15);
    auto ind = psi_indicator(fit.residuals, fit.d_paths, xi, h);
    for (int j = 0; j < 3; ++j) EXPECT_NEAR(k.psi[j] / ind.psi[j], 1.0, 0.2);
}

TEST(Psi, BinnedMatchesExact) {
    auto fit = fitted(3000, 59);
    const double xi = garch::residual_quantile(fit.residuals, 0.05).xi;
    const double h = default_psi_bandwidth(fit.residuals);
    auto e = psi_kernel(fit.residuals, fit.d_paths, xi, h, h, KdeMode::Exact);
    auto b = psi_kernel(fit.residuals, fit.d_paths, xi, h, h, KdeMode::Binned);
    EXPECT_NEAR(b.f_bar / e.f_bar, 1.0, 0.01);
    for (int j = 0; j < 3; ++j) EXPECT_NEAR(b.psi[j] / e.psi[j], 1.0, 0.01);
}

TEST(Psi, EqualResidualsHitTheDegeneratePath) {
    std::vector<double> u(50, 0.3);
    Eigen::MatrixXd d = Eigen::MatrixXd::Ones(50, 3);
    auto r = psi_kernel(u, d, -1.0, 0.2, 0.2, KdeMode::Exact);
    EXPECT_TRUE(std::isfinite(r.f_bar));
    EXPECT_TRUE(r.psi.allFinite());
    EXPECT_GT(r.skipped + r.used, 0u);
}

TEST(Sigma, ScalarToyByHand) {
    // J = diag(2, 1, 1): only omega matters through Omega = e1, S12 = 0, Psi = f Omega.
    Eigen::Matrix3d J = Eigen::Vector3d(2, 1, 1).asDiagonal();
    Eigen::Matrix3d S11 = Eigen::Vector3d(4, 1, 1).asDiagonal();
    const double f = 0.2, xi = -1.5, S22 = 0.0475;
    Eigen::Vector3d psi(f, 0, 0);
    auto s = assemble_sigma_alpha(J, S11, Eigen::Vector3d::Zero(), S22, psi, f, xi);
    // theta block: J^{-1} S11 J^{-1} / 4 = 1/4 for omega
    EXPECT_NEAR(s.full(0, 0), 0.25, 1e-15);
    // Lambda = (xi / 4f) J^{-1} S11 J^{-1} Psi = xi/(4f) * 1 * f
    EXPECT_NEAR(s.Lambda[0], xi / 4.0, 1e-15);
    // zeta = (xi^2/4) Psi' M Psi / f^2 + S22 / f^2 with M = J^{-1} S11 J^{-1}
    EXPECT_NEAR(s.zeta, xi * xi / 4.0 + S22 / (f * f), 1e-12);
    EXPECT_EQ(s.full, s.full.transpose());
}

TEST(Sigma, GaussianZetaClosedForm) {
    const double alpha = 0.05, xi = stats::normal_quantile(alpha), f = stats::normal_pdf(xi);
    const double p = stats::normal_cdf(xi) - xi * f - alpha;
    EXPECT_NEAR(p, 0.16964303, 1e-7);
    const double zeta = zeta_closed_form(xi, f, 3.0, p, alpha);
    EXPECT_NEAR(zeta, 3.11278973, 1e-6);

    auto fit = fitted(10000, 60);
    auto js = estimate_J_S11(fit.d_paths, fit.residuals);
    const Eigen::Vector3d omega = fit.d_paths.colwise().mean().transpose();
    auto s = sigma_alpha_iid(js.J, omega, 3.0, f, p, alpha, xi);
    EXPECT_NEAR(s.zeta, zeta, 1e-3);

    // assemble_sigma_alpha with the iid inputs gives the same zeta up to
    // Omega' J^{-1} Omega = 1
    const double ojo = omega.dot(js.J.inverse() * omega);
    auto a = assemble_sigma_alpha(js.J, 2.0 * js.J, p * omega, alpha * (1 - alpha), f * omega, f, xi);
    const double expect = 2.0 * xi * xi / 4.0 * ojo + xi * p / f * ojo + alpha * (1 - alpha) / (f * f);
    EXPECT_NEAR(a.zeta, expect, 1e-9 * std::abs(expect));
    EXPECT_NEAR(a.zeta / zeta, 1.0, 0.05);
}

TEST(Sigma, IidZetaCollapses) {
    Eigen::Matrix3d J = Eigen::Matrix3d::Identity();
    auto s = sigma_alpha_iid(J, Eigen::Vector3d(1, 0, 0), 1.0, 0.3, 0.0, 0.05, -1.2);
    EXPECT_NEAR(s.zeta, 0.05 * 0.95 / 0.09, 1e-12);
}

TEST(Sigma, OmegaJinvOmegaIsOne) {
    auto fit = fitted(10000, 61);
    auto js = estimate_J_S11(fit.d_paths, fit.residuals);
    const Eigen::Vector3d omega = fit.d_paths.colwise().mean().transpose();
    EXPECT_NEAR(omega.dot(js.J.inverse() * omega), 1.0, 0.05);
}

TEST(Sigma, EstimateIsSymmetricAndPositive) {
    auto fit = fitted(3000, 62);
    for (auto psi : {PsiMethod::Kernel, PsiMethod::Indicator})
        for (bool iid : {false, true}) {
            SigmaOptions o;
            o.psi = psi;
            o.iid = iid;
            auto s = estimate_sigma_alpha(fit, 0.05, o);
            EXPECT_EQ(s.full, s.full.transpose());
            EXPECT_GT(s.zeta, 0.0);
            Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> es(s.full);
            EXPECT_GE(es.eigenvalues().minCoeff(), -1e-12 * es.eigenvalues().maxCoeff());
        }
}

TEST(ConfidenceInterval, ZeroCovarianceGivesPoint) {
    auto fit = fitted(1000, 63);
    SigmaAlpha s;
    s.xi_alpha = garch::residual_quantile(fit.residuals, 0.05).xi;
    auto ci = var_confidence_interval(fit, s, 1000, 0.05, 0.1);
    EXPECT_EQ(ci.lower, ci.point.value);
    EXPECT_EQ(ci.upper, ci.point.value);
}

TEST(ConfidenceInterval, HalfWidthUsesNormalQuantile) {
    auto fit = fitted(1000, 64);
    auto s = estimate_sigma_alpha(fit, 0.05);
    auto ci = var_confidence_interval(fit, s, 1000, 0.05, 0.05);
    const double q = ci.delta.dot(s.full * ci.delta);
    EXPECT_NEAR((ci.upper - ci.lower) / 2.0, 1.959964 * std::sqrt(q / 1000.0), 1e-6 * (ci.upper - ci.lower));
    EXPECT_LT(ci.lower, ci.point.value);
    EXPECT_GT(ci.upper, ci.point.value);
    EXPECT_NEAR(ci.level, 0.95, 1e-15);
    EXPECT_EQ(ci.delta[3], -ci.point.sigma_t0);
}
