#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "vhs/estimators.h"
#include "vhs/garch.h"

namespace vhs::inference {

struct JS11 {
    Eigen::Matrix3d J;
    Eigen::Matrix3d S11;
};

// J = mean D D', S11 = mean (u^2-1)^2 D D'. Throws RankDeficiencyError when J
// has condition number above 1e12 after rescaling to unit diagonal (the
// parameters are not identified).
JS11 estimate_J_S11(const Eigen::MatrixXd& d_paths, std::span<const double> residuals);

// floor(1.1447 n^{1/3}), capped at n/4.
std::size_t default_bandwidth(std::size_t n);

// Bartlett long-run variance gamma_0 + 2 sum_h (1 - h/(b+1)) gamma_h of a
// centered series.
double hac_variance(std::span<const double> x, std::size_t bandwidth);

struct LongRun {
    double S22 = 0.0;
    Eigen::Vector3d S12 = Eigen::Vector3d::Zero();
    std::size_t bandwidth = 0;
};

// S22 two-sided over the centered indicators; S12 one-sided, pairing
// cross_t with indicator_{t+h} for h = 0..b.
LongRun hac_long_run(std::span<const double> indicators, const Eigen::MatrixXd& cross,
                     std::optional<std::size_t> bandwidth = std::nullopt);

struct PsiEstimate {
    Eigen::Vector3d psi = Eigen::Vector3d::Zero();
    double f_bar = 0.0;  // kernel estimator only
    double h1 = 0.0, h2 = 0.0;
    std::size_t used = 0;
    std::size_t skipped = 0;
    bool empty_window = false;
};

// 1.06 s n^{-1/5} with s the residual standard deviation.
double default_psi_bandwidth(std::span<const double> residuals);

PsiEstimate psi_indicator(std::span<const double> residuals, const Eigen::MatrixXd& d_paths, double xi, double h);

enum class KdeMode { Auto, Exact, Binned };

// Nadaraya-Watson estimate of f_{t-1}(xi) with Gaussian kernels. Binned mode
// smooths linear-binned weights on a grid of spacing h2/20; Auto switches to
// it above 4000 observations.
PsiEstimate psi_kernel(std::span<const double> residuals, const Eigen::MatrixXd& d_paths, double xi, double h1,
                       double h2, KdeMode mode = KdeMode::Auto);

struct SigmaAlpha {
    Eigen::Matrix3d J = Eigen::Matrix3d::Zero();
    Eigen::Matrix3d S11 = Eigen::Matrix3d::Zero();
    Eigen::Vector3d S12 = Eigen::Vector3d::Zero();
    double S22 = 0.0;
    Eigen::Vector3d Psi = Eigen::Vector3d::Zero();
    double f_bar = 0.0;
    Eigen::Vector3d Lambda = Eigen::Vector3d::Zero();
    double zeta = 0.0;
    Eigen::Matrix4d full = Eigen::Matrix4d::Zero();
    double xi_alpha = 0.0;
    bool psd_repaired = false;
    std::vector<std::string> warnings;
};

// Asymptotic covariance of (theta_hat - theta_0, xi_alpha - xi_n). The
// parameter block is J^{-1} S11 J^{-1} / 4, which is what the expansion
// sqrt(n)(theta_hat - theta_0) = J^{-1} n^{-1/2} sum (u_t^2 - 1) D_t / 2 gives.
SigmaAlpha assemble_sigma_alpha(const Eigen::Matrix3d& J, const Eigen::Matrix3d& S11, const Eigen::Vector3d& S12,
                                double S22, const Eigen::Vector3d& Psi, double f_bar, double xi);

// iid innovations: S11 = (kappa4-1) J, S12 = p Omega, S22 = alpha(1-alpha),
// Psi = f Omega, with Omega' J^{-1} Omega = 1 used in zeta.
SigmaAlpha sigma_alpha_iid(const Eigen::Matrix3d& J, const Eigen::Vector3d& Omega, double kappa4, double f_xi,
                           double p_alpha, double alpha, double xi);

enum class PsiMethod { Kernel, Indicator };

struct SigmaOptions {
    PsiMethod psi = PsiMethod::Kernel;
    bool iid = false;
    KdeMode kde = KdeMode::Auto;
    std::optional<std::size_t> bandwidth;
};

// Full estimator from a fitted model, with xi plugged in as xi_{n,alpha}.
SigmaAlpha estimate_sigma_alpha(const garch::GarchFit& fit, double alpha, const SigmaOptions& opts = {});

struct VarCI {
    VarEstimate point;
    double lower = 0.0;
    double upper = 0.0;
    Eigen::Vector4d delta = Eigen::Vector4d::Zero();
    double level = 0.9;
    bool clamped = false;
    // The interval targets the first out-of-sample date; it is reported but is
    // not a conditional interval in the strict sense there.
    bool out_of_sample = true;
};

// point = -sigma_{t0} xi_n, delta = (xi_n d sigma_{t0}/d theta, -sigma_{t0}),
// bounds = point -/+ z_{1-alpha0/2} sqrt(delta' Sigma delta / n).
VarCI var_confidence_interval(const garch::GarchFit& fit, const SigmaAlpha& sigma, std::size_t t0, double alpha,
                              double alpha0);

}  // namespace vhs::inference
