#include "vhs/estimators.h"

#include <sstream>

#include "vhs/errors.h"
#include "vhs/stats.h"

namespace vhs {

std::string to_string(Method m) {
    switch (m) {
        case Method::VHS: return "vhs";
        case Method::NaiveGarch: return "naive-garch";
        case Method::NaiveEmpirical: return "naive-empirical";
        case Method::Spherical: return "spherical";
        case Method::FHS: return "fhs";
    }
    return "?";
}

Method parse_method(const std::string& s) {
    for (auto m : {Method::VHS, Method::NaiveGarch, Method::NaiveEmpirical, Method::Spherical, Method::FHS})
        if (to_string(m) == s) return m;
    throw ValidationError("unknown method '" + s + "' (expected vhs, naive-garch, naive-empirical, spherical, fhs)");
}

bool is_multivariate(Method m) { return m == Method::Spherical || m == Method::FHS; }

std::size_t Window::start(std::size_t t0) const {
    if (kind == Kind::Expanding) return 0;
    if (length > t0) throw DomainError("rolling window longer than the available history");
    return t0 - length;
}

namespace {

void check_window(std::size_t t0, std::size_t available, const VarOptions& opts) {
    if (t0 > available) throw DomainError("t0 lies beyond the last return");
    const std::size_t len = t0 - opts.window.start(t0);
    if (len < opts.min_window || len < 50) {
        std::ostringstream os;
        os << "insufficient estimation window: " << len << " observations, need " << std::max<std::size_t>(opts.min_window, 50);
        throw DomainError(os.str());
    }
}

}  // namespace

VarEstimate garch_var(std::span<const double> series, Method method, std::size_t t0, const VarOptions& opts) {
    auto fit = std::make_shared<garch::GarchFit>(garch::fit_qml(series, opts.fit));
    if (!fit->converged && opts.require_convergence) {
        std::ostringstream os;
        os << to_string(method) << ": GARCH fit did not converge (t0=" << t0 << ")";
        throw ConvergenceError(os.str());
    }
    auto q = garch::residual_quantile(fit->residuals, opts.alpha);
    auto fc = garch::one_step_ahead(*fit);
    VarEstimate v;
    v.method = method;
    v.t0 = t0;
    v.alpha = opts.alpha;
    v.sigma_t0 = fc.sigma();
    v.xi = q.xi;
    v.value = -(v.sigma_t0 * q.xi + fit->mean_removed);
    v.converged = fit->converged;
    v.fit = std::move(fit);
    return v;
}

VarEstimate vhs_var(const ReturnMatrix& returns, const CompositionPath& comp, std::size_t t0, const VarOptions& opts) {
    check_window(t0, returns.rows(), opts);
    if (static_cast<std::size_t>(comp.weights.rows()) <= t0) throw ShapeError("composition path too short for t0");
    Eigen::VectorXd x = comp.weights.row(static_cast<Eigen::Index>(t0)).transpose();
    const std::size_t s = opts.window.start(t0);
    auto block = returns.returns.middleRows(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(t0 - s));
    Eigen::VectorXd vals = block * x;
    return garch_var(std::span<const double>(vals.data(), static_cast<std::size_t>(vals.size())), Method::VHS, t0, opts);
}

VarEstimate vhs_var(const PriceMatrix& prices, const HoldingsPolicy& policy, std::size_t t0, const VarOptions& opts) {
    auto r = compute_log_returns(prices);
    auto comp = evolve_composition(prices, policy);
    return vhs_var(r, comp, t0, opts);
}

VarEstimate naive_garch_var(std::span<const double> pr, std::size_t t0, const VarOptions& opts) {
    check_window(t0, pr.size(), opts);
    const std::size_t s = opts.window.start(t0);
    return garch_var(pr.subspan(s, t0 - s), Method::NaiveGarch, t0, opts);
}

VarEstimate naive_garch_var(const PriceMatrix& prices, const HoldingsPolicy& policy, std::size_t t0,
                            const VarOptions& opts) {
    auto r = compute_log_returns(prices);
    auto comp = evolve_composition(prices, policy);
    auto pr = portfolio_returns(r, comp);
    return naive_garch_var(pr, t0, opts);
}

VarEstimate naive_empirical_var(std::span<const double> returns, double alpha, std::size_t min_window) {
    if (returns.size() < min_window) throw DomainError("naive_empirical_var: window too short");
    if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("naive_empirical_var: alpha must lie in (0,1)");
    VarEstimate v;
    v.method = Method::NaiveEmpirical;
    v.alpha = alpha;
    v.t0 = returns.size();
    v.xi = stats::order_statistic(returns, stats::order_rank(returns.size(), alpha));
    v.value = -v.xi;
    return v;
}

}  // namespace vhs
