#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string>

#include "vhs/garch.h"
#include "vhs/portfolio.h"

namespace vhs {

enum class Method { VHS, NaiveGarch, NaiveEmpirical, Spherical, FHS };

std::string to_string(Method m);
Method parse_method(const std::string& s);  // "vhs", "naive-garch", ...
bool is_multivariate(Method m);

struct VarEstimate {
    double value = 0.0;  // -quantile, so losses are positive
    Method method = Method::VHS;
    std::size_t t0 = 0;
    double alpha = 0.05;
    double sigma_t0 = 0.0;  // one-step volatility (GARCH methods)
    double xi = 0.0;        // residual quantile used
    bool converged = true;
    std::shared_ptr<const garch::GarchFit> fit;
};

struct Window {
    enum class Kind { Expanding, Rolling };
    Kind kind = Kind::Expanding;
    std::size_t length = 0;

    static Window expanding() { return {}; }
    static Window rolling(std::size_t len) { return {Kind::Rolling, len}; }
    // Index of the first observation used when forecasting return t0.
    std::size_t start(std::size_t t0) const;
};

struct VarOptions {
    double alpha = 0.05;
    Window window;
    std::size_t min_window = 250;
    garch::FitOptions fit;
    bool require_convergence = true;  // throw ConvergenceError otherwise
};

// Fits GARCH(1,1) to the series and returns -sigma_{n}(theta_hat) xi_{n,alpha}
// for the observation right after the series.
VarEstimate garch_var(std::span<const double> series, Method method, std::size_t t0, const VarOptions& opts);

// t0 indexes returns (0-based): the estimate targets return t0, which ends on
// price date t0+1, using returns [window start, t0-1] and the composition
// chosen at the close of date t0. t0 may equal the number of returns.
VarEstimate vhs_var(const PriceMatrix& prices, const HoldingsPolicy& policy, std::size_t t0, const VarOptions& opts);
VarEstimate naive_garch_var(const PriceMatrix& prices, const HoldingsPolicy& policy, std::size_t t0,
                            const VarOptions& opts);

// Same estimators on precomputed inputs (used by sweeps to avoid recomputing
// the composition path).
VarEstimate vhs_var(const ReturnMatrix& returns, const CompositionPath& comp, std::size_t t0, const VarOptions& opts);
VarEstimate naive_garch_var(std::span<const double> portfolio_returns, std::size_t t0, const VarOptions& opts);

// -(order statistic of rank ceil(n alpha)) of the returns through t0-1.
VarEstimate naive_empirical_var(std::span<const double> returns, double alpha, std::size_t min_window = 100);

}  // namespace vhs
