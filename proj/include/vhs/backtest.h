#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace vhs::backtest {

struct ViolationSeries {
    std::vector<std::uint8_t> hits;
    double alpha = 0.05;

    std::size_t size() const { return hits.size(); }
    std::size_t count() const;
};

// hits[t] = r_t < -VaR_t; a tie is not a violation.
ViolationSeries violations(std::span<const double> r, std::span<const double> var_seq, double alpha);

struct LrTests {
    double lr_uc = 0.0, lr_ind = 0.0, lr_cc = 0.0;
    double p_uc = 1.0, p_ind = 1.0, p_cc = 1.0;
    std::size_t n = 0, n1 = 0;
    std::size_t n00 = 0, n01 = 0, n10 = 0, n11 = 0;
    bool ind_degenerate = false;  // no violations (or no transitions out of a state)
    bool short_sample = false;    // fewer than 100 observations
};

LrTests christoffersen_tests(const ViolationSeries& v);

struct LossStats {
    std::optional<double> av;
    std::optional<double> es;
    double loss = 0.0;
    double var_bar = 0.0;
};

// Per-t tick loss (r_t + VaR_t)(alpha - 1_hit); nonnegative for every t.
std::vector<double> loss_series(std::span<const double> r, std::span<const double> var_seq, double alpha);

LossStats av_es_loss(std::span<const double> r, std::span<const double> var_seq, double alpha);

struct DmResult {
    double statistic = 0.0;
    double p_value = 1.0;
    std::size_t bandwidth = 0;
    bool degenerate = false;  // zero long-run variance with zero mean difference
};

// One-sided test of "a has higher expected loss than b".
DmResult dm_test(std::span<const double> loss_a, std::span<const double> loss_b);

struct BacktestReport {
    std::string method;
    std::string episode;
    std::size_t n = 0;
    double viol_pct = 0.0;
    LrTests lr;
    double var_bar = 0.0;
    std::optional<double> av;
    std::optional<double> es;
    double loss = 0.0;
    std::optional<double> dm_p;
};

BacktestReport make_report(std::string method, std::string episode, std::span<const double> r,
                           std::span<const double> var_seq, double alpha);

// Sets report.dm_p from the loss of `reference` against `report`'s method.
void attach_dm(BacktestReport& report, std::span<const double> r, std::span<const double> var_seq,
               std::span<const double> reference_var, double alpha);

// The dm_p column is written only when at least one report carries it.
void write_reports_csv(std::ostream& out, std::span<const BacktestReport> reports);

}  // namespace vhs::backtest
