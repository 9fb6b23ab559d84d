#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

namespace vhs {

struct PriceMatrix {
    std::vector<std::string> dates;
    std::vector<std::string> assets;
    Eigen::MatrixXd prices;  // rows = dates, cols = assets

    std::size_t rows() const { return static_cast<std::size_t>(prices.rows()); }
    std::size_t cols() const { return static_cast<std::size_t>(prices.cols()); }
    // Throws on non-positive prices, unsorted dates or shape problems.
    void validate() const;
};

// Row t holds log(p_{t+1} / p_t); dates[t] is the date the return ends on.
struct ReturnMatrix {
    std::vector<std::string> dates;
    Eigen::MatrixXd returns;

    std::size_t rows() const { return static_cast<std::size_t>(returns.rows()); }
    std::size_t cols() const { return static_cast<std::size_t>(returns.cols()); }
};

namespace policy {

struct Crystallized {
    Eigen::VectorXd units;
};

struct Static {
    Eigen::VectorXd weights;
};

// Units are reset to the target weights at the close of every date k with
// k % period == 0 and drift between resets.
struct RebalancedEvery {
    std::size_t period = 1;
    Eigen::VectorXd weights;
};

// Covariance of the next return given prices through date k.
using CovarianceSupplier = std::function<Eigen::MatrixXd(std::size_t k)>;

struct MinVariance {
    bool refit = true;
    std::size_t window = 250;
    CovarianceSupplier covariance;  // rolling sample covariance when empty
};

// Units held from the close of each date; one row per price date.
struct Schedule {
    Eigen::MatrixXd units;
};

}  // namespace policy

using HoldingsPolicy =
    std::variant<policy::Crystallized, policy::Static, policy::RebalancedEvery, policy::MinVariance, policy::Schedule>;

// Row k is the composition chosen at the close of date k, i.e. a_{t-1} for
// the return that ends on date k+1. There is one row per price date, so the
// last row is the composition for the first out-of-sample return.
struct CompositionPath {
    Eigen::MatrixXd weights;
};

struct VirtualReturnSeries {
    Eigen::VectorXd x;
    std::vector<double> values;
};

enum class ReturnKind { Linearized, Exact };

ReturnMatrix compute_log_returns(const PriceMatrix& prices);

CompositionPath evolve_composition(const PriceMatrix& prices, const HoldingsPolicy& policy);

std::vector<double> portfolio_returns(const ReturnMatrix& returns, const CompositionPath& comp,
                                      ReturnKind kind = ReturnKind::Linearized);

VirtualReturnSeries virtual_returns(const ReturnMatrix& returns, const Eigen::VectorXd& x);

std::vector<double> concentration_path(const CompositionPath& comp);

// a = C^{-1} e / e'C^{-1} e for a covariance matrix C.
Eigen::VectorXd min_variance_weights(const Eigen::MatrixXd& covariance);

// Equal weights on one group of assets for `period` dates, then on the next
// group, cycling. Groups hold 0-based column indices.
policy::Schedule alternating_schedule(const PriceMatrix& prices, const std::vector<std::vector<std::size_t>>& groups,
                                      std::size_t period);

// Price panel whose log returns reproduce `returns` * scale exactly up to
// rounding; the first row is the base price on the start date.
PriceMatrix prices_from_returns(const Eigen::MatrixXd& returns, double base_price = 100.0, double scale = 1.0,
                                const std::string& start_date = "2000-01-03");

// Consecutive calendar dates starting at an ISO date.
std::vector<std::string> make_dates(std::size_t count, const std::string& start_date);

}  // namespace vhs
