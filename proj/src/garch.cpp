#include "vhs/garch.h"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "vhs/errors.h"
#include "vhs/optimize.h"
#include "vhs/stats.h"

namespace vhs::garch {

namespace {

void check_finite(std::span<const double> series) {
    for (std::size_t t = 0; t < series.size(); ++t)
        if (!std::isfinite(series[t])) {
            std::ostringstream os;
            os << "non-finite series element at index " << t;
            throw DomainError(os.str());
        }
}

double mean_square(std::span<const double> x) {
    double s = 0.0;
    for (double v : x) s += v * v;
    return s / static_cast<double>(x.size());
}

Eigen::Vector3d initial_derivative(const GarchParams& th, const InitRule& init) {
    if (init.kind != InitKind::Unconditional) return Eigen::Vector3d::Zero();
    const double c = 1.0 - th.alpha - th.beta;
    const double w = th.omega / (c * c);
    return {1.0 / c, w, w};
}

// One pass returning the mean criterion, optionally with gradient and the
// outer-product matrix (1/n) sum D_t D_t'.
double criterion(std::span<const double> e, const GarchParams& th, const InitRule& init, Eigen::Vector3d* grad,
                 Eigen::Matrix3d* outer) {
    const std::size_t n = e.size();
    double s2 = initial_variance(e, th, init);
    Eigen::Vector3d ds2 = (grad || outer) ? initial_derivative(th, init) : Eigen::Vector3d::Zero();
    double f = 0.0;
    Eigen::Vector3d g = Eigen::Vector3d::Zero();
    Eigen::Matrix3d o = Eigen::Matrix3d::Zero();
    for (std::size_t t = 0; t < n; ++t) {
        if (t > 0) {
            const double e2 = e[t - 1] * e[t - 1];
            if (grad || outer) ds2 = Eigen::Vector3d(1.0, e2, s2) + th.beta * ds2;
            s2 = th.omega + th.alpha * e2 + th.beta * s2;
        }
        const double z = e[t] * e[t] / s2;
        f += z + std::log(s2);
        if (grad) g += ((1.0 - z) / s2) * ds2;
        if (outer) {
            Eigen::Vector3d d = ds2 / (2.0 * s2);
            o.noalias() += d * d.transpose();
        }
    }
    const double dn = static_cast<double>(n);
    if (grad) *grad = g / dn;
    if (outer) *outer = o / dn;
    return f / dn;
}

GarchParams to_params(const Eigen::VectorXd& x) { return {x[0], x[1], x[2]}; }

}  // namespace

void GarchParams::validate() const {
    if (!(omega > 0.0) || !(alpha > 0.0) || !(beta > 0.0 && beta < 1.0) || !std::isfinite(omega) ||
        !std::isfinite(alpha)) {
        std::ostringstream os;
        os << "invalid GARCH parameters (omega=" << omega << ", alpha=" << alpha << ", beta=" << beta
           << "); need omega > 0, alpha > 0, 0 < beta < 1";
        throw DomainError(os.str());
    }
}

double Forecast::sigma() const { return std::sqrt(sigma2); }
Eigen::Vector3d Forecast::dsigma() const { return dsigma2 / (2.0 * sigma()); }

double initial_variance(std::span<const double> series, const GarchParams& th, const InitRule& init) {
    switch (init.kind) {
        case InitKind::SampleVariance:
            return series.empty() ? 0.0 : mean_square(series);
        case InitKind::Unconditional: {
            const double c = 1.0 - th.alpha - th.beta;
            if (!(c > 0.0)) throw DomainError("unconditional initial variance needs alpha + beta < 1");
            return th.omega / c;
        }
        case InitKind::Fixed:
            if (!(init.value > 0.0)) throw DomainError("fixed initial variance must be positive");
            return init.value;
    }
    return 0.0;
}

VolatilityPath filter_volatility(std::span<const double> series, const GarchParams& theta, const InitRule& init) {
    theta.validate();
    if (series.size() < 2) throw DomainError("filter_volatility needs at least 2 observations");
    check_finite(series);
    VolatilityPath path;
    path.init_sigma2 = initial_variance(series, theta, init);
    path.sigma2.resize(series.size());
    path.sigma2[0] = path.init_sigma2;
    for (std::size_t t = 1; t < series.size(); ++t)
        path.sigma2[t] = theta.omega + theta.alpha * series[t - 1] * series[t - 1] + theta.beta * path.sigma2[t - 1];
    return path;
}

double qml_objective(std::span<const double> series, const GarchParams& theta, const InitRule& init) {
    theta.validate();
    check_finite(series);
    if (series.size() < 2) throw DomainError("qml_objective needs at least 2 observations");
    return criterion(series, theta, init, nullptr, nullptr);
}

double qml_objective_grad(std::span<const double> series, const GarchParams& theta, const InitRule& init,
                          Eigen::Vector3d& grad) {
    theta.validate();
    check_finite(series);
    if (series.size() < 2) throw DomainError("qml_objective needs at least 2 observations");
    return criterion(series, theta, init, &grad, nullptr);
}

Eigen::MatrixXd score_derivatives(std::span<const double> series, const GarchParams& theta, const InitRule& init) {
    auto path = filter_volatility(series, theta, init);
    const std::size_t n = series.size();
    Eigen::MatrixXd d(n, 3);
    Eigen::Vector3d ds2 = initial_derivative(theta, init);
    for (std::size_t t = 0; t < n; ++t) {
        if (t > 0)
            ds2 = Eigen::Vector3d(1.0, series[t - 1] * series[t - 1], path.sigma2[t - 1]) + theta.beta * ds2;
        d.row(static_cast<Eigen::Index>(t)) = ds2.transpose() / (2.0 * path.sigma2[t]);
    }
    return d;
}

Forecast one_step_ahead(std::span<const double> series, const GarchParams& theta, const InitRule& init) {
    auto path = filter_volatility(series, theta, init);
    const std::size_t n = series.size();
    Eigen::Vector3d ds2 = initial_derivative(theta, init);
    for (std::size_t t = 1; t < n; ++t)
        ds2 = Eigen::Vector3d(1.0, series[t - 1] * series[t - 1], path.sigma2[t - 1]) + theta.beta * ds2;
    const double e2 = series[n - 1] * series[n - 1];
    Forecast fc;
    fc.dsigma2 = Eigen::Vector3d(1.0, e2, path.sigma2[n - 1]) + theta.beta * ds2;
    fc.sigma2 = theta.omega + theta.alpha * e2 + theta.beta * path.sigma2[n - 1];
    return fc;
}

GarchFit fit_qml(std::span<const double> series, const FitOptions& opts) {
    const std::size_t n = series.size();
    if (n < 50) throw DomainError("fit_qml refuses samples with fewer than 50 observations");
    check_finite(series);

    GarchFit fit;
    fit.series.assign(series.begin(), series.end());
    if (opts.demean) {
        fit.mean_removed = stats::mean(fit.series);
        for (double& v : fit.series) v -= fit.mean_removed;
    }
    const double scale2 = mean_square(fit.series);
    if (!(scale2 > 0.0)) throw DomainError("fit_qml: series is identically zero");
    const double scale = std::sqrt(scale2);
    std::vector<double> e(n);
    for (std::size_t t = 0; t < n; ++t) e[t] = fit.series[t] / scale;

    InitRule init_n = opts.init;
    if (init_n.kind == InitKind::Fixed) init_n.value /= scale2;

    const auto& b = opts.bounds;
    opt::Box box{Eigen::Vector3d(b.omega_lower, b.alpha_lower, b.beta_lower),
                 Eigen::Vector3d(b.omega_upper, b.alpha_upper, b.beta_upper)};

    auto f = [&](const Eigen::VectorXd& x) {
        auto th = to_params(x);
        if (init_n.kind == InitKind::Unconditional && th.alpha + th.beta >= 1.0)
            return std::numeric_limits<double>::infinity();
        return criterion(e, th, init_n, nullptr, nullptr);
    };
    auto fg = [&](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
        auto th = to_params(x);
        if (init_n.kind == InitKind::Unconditional && th.alpha + th.beta >= 1.0) {
            g = Eigen::VectorXd::Zero(3);
            return std::numeric_limits<double>::infinity();
        }
        Eigen::Vector3d g3;
        double v = criterion(e, th, init_n, &g3, nullptr);
        g = g3;
        return v;
    };

    std::vector<GarchParams> starts = opts.starts;
    if (starts.empty())
        for (auto [a, bb] : {std::pair{0.05, 0.90}, std::pair{0.10, 0.80}, std::pair{0.30, 0.40}})
            starts.push_back({1.0 - a - bb, a, bb});

    opt::Result best;
    bool have = false;
    int total_iter = 0;
    for (const auto& s : starts) {
        Eigen::VectorXd x0 = box.project(Eigen::Vector3d(s.omega, s.alpha, s.beta));
        auto nm = opt::nelder_mead(f, x0, box);
        Eigen::Matrix3d outer;
        criterion(e, to_params(nm.x), init_n, nullptr, &outer);
        std::optional<Eigen::MatrixXd> h0;
        Eigen::Matrix3d fisher = 4.0 * outer;
        Eigen::LDLT<Eigen::Matrix3d> ldlt(fisher);
        if (ldlt.info() == Eigen::Success && ldlt.isPositive() && fisher.determinant() > 1e-14)
            h0 = Eigen::MatrixXd(ldlt.solve(Eigen::Matrix3d::Identity()));
        opt::QuasiNewtonOptions qo;
        qo.g_tol = opts.g_tol;
        qo.max_iterations = opts.max_iterations;
        auto qn = opt::projected_bfgs(fg, nm.x, box, h0, qo);
        total_iter += nm.iterations + qn.iterations;
        if (!have) {
            best = qn;
            have = true;
            continue;
        }
        const double tie = 1e-10 * (1.0 + std::abs(best.f));
        if (qn.f < best.f - tie || (std::abs(qn.f - best.f) <= tie && qn.x[1] < best.x[1])) best = qn;
    }

    fit.theta_hat = {best.x[0] * scale2, best.x[1], best.x[2]};
    fit.converged = best.converged;
    fit.iterations = total_iter;
    fit.init = opts.init;
    if (fit.init.kind == InitKind::SampleVariance) fit.init = InitRule::fixed(scale2);

    fit.sigma2_path = filter_volatility(fit.series, fit.theta_hat, fit.init);
    fit.residuals.resize(n);
    for (std::size_t t = 0; t < n; ++t) fit.residuals[t] = fit.series[t] / std::sqrt(fit.sigma2_path.sigma2[t]);
    fit.d_paths = score_derivatives(fit.series, fit.theta_hat, fit.init);
    fit.objective = best.f + std::log(scale2);
    return fit;
}

QuantileEstimate residual_quantile(std::span<const double> residuals, double alpha) {
    if (!(alpha > 0.0 && alpha < 0.5)) throw DomainError("residual_quantile: alpha must lie in (0, 0.5)");
    const double na = static_cast<double>(residuals.size()) * alpha;
    if (na < 1.0 - 1e-9) throw DomainError("residual_quantile: n*alpha must be at least 1");
    QuantileEstimate q;
    q.rank = stats::order_rank(residuals.size(), alpha);
    q.xi = stats::order_statistic(residuals, q.rank);
    return q;
}

std::vector<std::string> Lemma2Report::flags() const {
    std::vector<std::string> out;
    if (!strictly_stationary) out.emplace_back("mean log(alpha u^2 + beta) >= 0: strict stationarity not supported");
    if (!nondegenerate) out.emplace_back("squared residuals are degenerate");
    if (!box_ok) out.emplace_back("parameters outside omega > 0, alpha > 0, 0 < beta < 1");
    if (!moments_finite) out.emplace_back("small-order residual moment is not finite");
    return out;
}

Lemma2Report check_lemma2_conditions(const GarchParams& theta, std::span<const double> residuals) {
    Lemma2Report r;
    const double n = static_cast<double>(residuals.size());
    double lsum = 0.0, msum = 0.0;
    std::vector<double> u2(residuals.size());
    for (std::size_t t = 0; t < residuals.size(); ++t) {
        u2[t] = residuals[t] * residuals[t];
        lsum += std::log(theta.alpha * u2[t] + theta.beta);
        msum += std::sqrt(std::abs(residuals[t]));
    }
    r.mean_log_term = lsum / n;
    r.strictly_stationary = r.mean_log_term < 0.0;
    r.u2_variance = stats::variance(u2);
    const double m2 = stats::mean(u2);
    r.nondegenerate = r.u2_variance > 1e-12 * std::max(m2 * m2, 1e-300);
    r.box_ok = theta.omega > 0.0 && theta.alpha > 0.0 && theta.beta > 0.0 && theta.beta < 1.0;
    r.abs_moment = msum / n;
    r.moments_finite = std::isfinite(r.abs_moment) && std::isfinite(m2);
    return r;
}

Simulated simulate(const GarchParams& theta, std::span<const double> innovations) {
    theta.validate();
    Simulated s;
    const std::size_t n = innovations.size();
    s.eps.resize(n);
    s.sigma2.resize(n);
    const double c = 1.0 - theta.alpha - theta.beta;
    double s2 = c > 0.0 ? theta.omega / c : theta.omega;
    double prev = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
        if (t > 0) s2 = theta.omega + theta.alpha * prev * prev + theta.beta * s2;
        s.sigma2[t] = s2;
        s.eps[t] = std::sqrt(s2) * innovations[t];
        prev = s.eps[t];
    }
    return s;
}

}  // namespace vhs::garch
