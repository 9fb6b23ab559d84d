#pragma once

#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace vhs::garch {

struct GarchParams {
    double omega = 0.0;
    double alpha = 0.0;
    double beta = 0.0;

    // Throws DomainError unless omega > 0, alpha > 0 and 0 < beta < 1.
    void validate() const;
    double persistence() const { return alpha + beta; }
};

enum class InitKind { SampleVariance, Unconditional, Fixed };

// How sigma2[0] is chosen. SampleVariance uses the mean square of the series
// (the model has no conditional mean).
struct InitRule {
    InitKind kind = InitKind::SampleVariance;
    double value = 0.0;

    static InitRule sample_variance() { return {}; }
    static InitRule unconditional() { return {InitKind::Unconditional, 0.0}; }
    static InitRule fixed(double v) { return {InitKind::Fixed, v}; }
};

struct VolatilityPath {
    std::vector<double> sigma2;
    double init_sigma2 = 0.0;
};

// Search box. The omega limits are multiples of the series mean square so the
// fit is exactly scale equivariant.
struct Bounds {
    double omega_lower = 1e-8;
    double omega_upper = 10.0;
    double alpha_lower = 1e-8;
    double alpha_upper = 5.0;
    double beta_lower = 1e-8;
    double beta_upper = 0.9999;
};

struct FitOptions {
    Bounds bounds;
    InitRule init;
    double g_tol = 1e-6;
    int max_iterations = 200;
    bool demean = false;
    // Starting points in normalized units (series divided by its RMS). Empty
    // means the three variance-targeted defaults.
    std::vector<GarchParams> starts;
};

struct GarchFit {
    GarchParams theta_hat;
    VolatilityPath sigma2_path;
    std::vector<double> residuals;
    Eigen::MatrixXd d_paths;  // n x 3, D_t = (1/(2 sigma2_t)) d sigma2_t / d theta
    double objective = 0.0;
    bool converged = false;
    int iterations = 0;
    InitRule init;            // resolved to Fixed unless Unconditional
    double mean_removed = 0.0;
    std::vector<double> series;  // the (demeaned) series that was fitted
};

// One step beyond the last observation.
struct Forecast {
    double sigma2 = 0.0;
    Eigen::Vector3d dsigma2 = Eigen::Vector3d::Zero();

    double sigma() const;
    Eigen::Vector3d dsigma() const;  // gradient of sigma, not sigma2
};

double initial_variance(std::span<const double> series, const GarchParams& theta, const InitRule& init);

VolatilityPath filter_volatility(std::span<const double> series, const GarchParams& theta,
                                 const InitRule& init = {});

double qml_objective(std::span<const double> series, const GarchParams& theta, const InitRule& init = {});

// Objective and its exact gradient with respect to (omega, alpha, beta).
double qml_objective_grad(std::span<const double> series, const GarchParams& theta, const InitRule& init,
                          Eigen::Vector3d& grad);

Eigen::MatrixXd score_derivatives(std::span<const double> series, const GarchParams& theta,
                                  const InitRule& init = {});

Forecast one_step_ahead(std::span<const double> series, const GarchParams& theta, const InitRule& init = {});

GarchFit fit_qml(std::span<const double> series, const FitOptions& opts = {});

inline Forecast one_step_ahead(const GarchFit& fit) {
    return one_step_ahead(fit.series, fit.theta_hat, fit.init);
}

struct QuantileEstimate {
    double xi = 0.0;
    std::size_t rank = 0;
};

QuantileEstimate residual_quantile(std::span<const double> residuals, double alpha);

struct Lemma2Report {
    double mean_log_term = 0.0;       // mean of log(alpha u^2 + beta)
    bool strictly_stationary = false;  // mean_log_term < 0
    double u2_variance = 0.0;
    bool nondegenerate = false;
    bool box_ok = false;               // omega > 0, alpha > 0, 0 < beta < 1
    double abs_moment = 0.0;           // mean |u|^0.5
    bool moments_finite = false;
    bool all_ok() const { return strictly_stationary && nondegenerate && box_ok && moments_finite; }
    std::vector<std::string> flags() const;
};

Lemma2Report check_lemma2_conditions(const GarchParams& theta, std::span<const double> residuals);

// Simulates sigma_t^2 and eps_t = sigma_t u_t from a GARCH(1,1) driven by the
// supplied innovations, starting at the unconditional variance.
struct Simulated {
    std::vector<double> eps;
    std::vector<double> sigma2;
};
Simulated simulate(const GarchParams& theta, std::span<const double> innovations);

}  // namespace vhs::garch
