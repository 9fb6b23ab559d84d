#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "vhs/estimators.h"
#include "vhs/garch.h"

namespace vhs::mgarch {

struct CdccParams {
    Eigen::VectorXd omega;
    Eigen::MatrixXd A;
    Eigen::MatrixXd B;  // diagonal
    Eigen::MatrixXd S;  // correlation target
    double alpha_c = 0.0;
    double beta_c = 0.0;

    std::size_t dim() const { return static_cast<std::size_t>(omega.size()); }
    void validate() const;
};

enum class Innovation { Gaussian, StudentT7 };

constexpr double kStudentDof = 7.0;

// -q_alpha of one standardized innovation component.
double innovation_var(Innovation law, double alpha);

struct SigmaPath {
    Eigen::MatrixXd D;             // n x m volatilities
    std::vector<Eigen::MatrixXd> R;
    std::vector<Eigen::MatrixXd> Q;

    std::size_t size() const { return static_cast<std::size_t>(D.rows()); }
    // Sigma_t = D_t R_t^{1/2}
    Eigen::MatrixXd sigma(std::size_t t) const;
    // Sigma_t Sigma_t' = D_t R_t D_t
    Eigen::MatrixXd covariance(std::size_t t) const;
};

struct CdccSample {
    Eigen::MatrixXd returns;  // n x m
    SigmaPath truth;
};

// Preset designs "A".."H". "A*".."H*" raise UnsupportedError.
CdccParams design_params(const std::string& id);
Innovation design_innovation(const std::string& id);

CdccSample simulate_cdcc(const CdccParams& params, Innovation law, std::size_t n, std::size_t burn_in,
                         std::uint64_t seed, const std::string& label = "custom");

// Runs the variance and correlation recursions over observed returns with
// Q_0 = S and the given initial variances. One extra row is appended: row n
// holds the one-step-ahead forecast.
SigmaPath filter_cdcc(const CdccParams& params, const Eigen::MatrixXd& returns, const Eigen::VectorXd& h0);

struct CdccFit {
    CdccParams params;
    SigmaPath path;              // n + 1 rows, last one is the forecast
    Eigen::MatrixXd residuals;   // eta_t = Sigma_t^{-1} y_t, n x m
    std::vector<bool> margin_converged;
    Eigen::VectorXd h0;
    double correlation_objective = 0.0;
    bool converged = false;
    bool s_clipped = false;
};

// Three steps: equation-by-equation QML of h_it = omega_i + sum_j A_ij
// y_{j,t-1}^2 + b_i h_{i,t-1} (every lagged squared return enters each
// equation), correlation targeting for S, then Gaussian QML for
// (alpha_c, beta_c) with S held fixed. margin_opts supplies g_tol and
// max_iterations for the first step.
CdccFit fit_cdcc_bivariate(const Eigen::MatrixXd& returns, const garch::FitOptions& margin_opts = {},
                           bool require_convergence = true);

// Symmetric PSD square root.
Eigen::MatrixXd sym_sqrt(const Eigen::MatrixXd& m);

// ||a' Sigma_t|| times the (1 - 2 alpha) quantile of |eta| over every pooled
// residual component.
VarEstimate spherical_var(const Eigen::MatrixXd& sigma_t, const Eigen::VectorXd& a, const Eigen::MatrixXd& pool,
                          double alpha);

// -q_alpha of a' m_t + a' Sigma_t eta_s over the pool rows.
VarEstimate fhs_var(const Eigen::MatrixXd& sigma_t, const Eigen::VectorXd& mean, const Eigen::VectorXd& a,
                    const Eigen::MatrixXd& pool, double alpha);

// Sigma_t^{-2} e / e' Sigma_t^{-2} e with Sigma_t^2 = Sigma_t Sigma_t'.
Eigen::VectorXd min_variance_composition(const Eigen::MatrixXd& sigma_t);

struct FactorModelParams {
    std::size_t m = 2;
    garch::GarchParams garch1{1.0, 0.09, 0.87};
    garch::GarchParams garch2{0.1, 0.7, 0.01};
    double idio_sd = 0.1;
};

// Odd columns (1-based) load on factor 1, even columns on factor 2.
Eigen::MatrixXd simulate_factor_model(const FactorModelParams& params, std::size_t n, std::uint64_t seed,
                                      std::size_t burn_in = 500);

}  // namespace vhs::mgarch
