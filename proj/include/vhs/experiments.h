#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "vhs/backtest.h"
#include "vhs/estimators.h"

namespace vhs::experiments {

struct DesignSpec {
    std::string id = "A";
    std::size_t n1 = 500;
    std::size_t n = 700;
    std::size_t N = 20;
    std::vector<double> alphas{0.01, 0.05};
    std::uint64_t seed = 1;
    std::size_t burn_in = 500;
    std::size_t workers = 1;
    bool keep_traces = false;

    static DesignSpec desk(const std::string& id);
    static DesignSpec full(const std::string& id);  // N = 100, 1000 predictions
    void validate() const;
};

struct TraceRow {
    std::size_t replication = 0;
    std::size_t t = 0;
    double alpha = 0.0;
    double truth = 0.0;
    double spherical = 0.0;
    double fhs = 0.0;
    double vhs = 0.0;
};

struct RERow {
    std::string design;
    std::size_t n1 = 0;
    double alpha = 0.0;
    double mse_s = 0.0;
    double mse_fhs = 0.0;
    double mse_vhs = 0.0;
    double ratio_fhs = 0.0;  // MSE_FHS / MSE_S
    double ratio_vhs = 0.0;  // MSE_VHS / MSE_S
    std::size_t replications = 0;
    std::size_t failures = 0;
};

struct RETable {
    std::vector<RERow> rows;
    std::vector<TraceRow> traces;
    std::vector<std::string> notes;
};

// Parameters are estimated once on the first n1 observations and held fixed
// over the n - n1 predictions.
RETable run_design(const DesignSpec& spec);

void write_re_table(std::ostream& out, const RETable& table);
void write_traces(std::ostream& out, const std::vector<TraceRow>& traces);

struct FactorBacktestSpec {
    std::size_t m = 2;
    std::size_t window = 1000;
    std::size_t horizon = 400;
    std::size_t switch_period = 100;
    double alpha = 0.05;
    std::uint64_t seed = 1;
    std::vector<Method> methods{Method::NaiveGarch, Method::VHS, Method::Spherical, Method::FHS};
};

struct MethodTrace {
    Method method = Method::VHS;
    std::vector<double> var;
    std::size_t nonconverged = 0;
};

struct FactorBacktestResult {
    std::vector<backtest::BacktestReport> reports;
    std::vector<double> returns;  // realised portfolio returns over the horizon
    std::vector<MethodTrace> traces;
    std::vector<std::string> notes;
};

struct RollingSpec {
    std::size_t start = 0;  // first return forecast
    std::size_t end = 0;    // one past the last return forecast
    Window window = Window::rolling(1000);
    std::size_t min_window = 250;
    double alpha = 0.05;
    std::vector<Method> methods;
    std::optional<Method> reference;  // DM column against this method
    std::string episode;
};

// Out-of-sample VaR for returns [start, end) of the portfolio whose
// composition for return t is comp.row(t). Multivariate methods need two
// assets and raise UnsupportedError otherwise. Fits that fail to converge are
// kept and counted in the notes.
FactorBacktestResult run_rolling_evaluation(const Eigen::MatrixXd& returns, const Eigen::MatrixXd& comp,
                                            const RollingSpec& spec);

// Composition for return t: equal weights on the even (1-based) assets in
// blocks (t / switch_period) even, on the odd assets otherwise.
Eigen::MatrixXd alternating_composition(std::size_t n, std::size_t m, std::size_t switch_period);

FactorBacktestResult run_factor_backtest(const FactorBacktestSpec& spec);

struct StaticBundle {
    std::size_t start = 100;
    Eigen::MatrixXd weights;        // composition for each return
    std::vector<double> returns;    // portfolio returns
    std::vector<double> truth;      // from `start` on
    std::vector<double> naive;
    std::vector<double> spherical;
    std::vector<double> fhs;
    std::vector<double> vhs;
};

// Three-asset crystallized portfolio with iid Gaussian returns (D, R as in
// the static example), prices starting at 1000 and one unit of each asset.
StaticBundle run_static_crystallized(std::uint64_t seed, std::size_t n, double alpha = 0.05, bool estimates = true,
                                     std::size_t start = 100);

Eigen::MatrixXd static_covariance();

void write_static_bundle(std::ostream& out, const StaticBundle& b);

}  // namespace vhs::experiments
