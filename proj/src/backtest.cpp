#include "vhs/backtest.h"

#include <cmath>
#include <ostream>

#include "vhs/csv.h"
#include "vhs/errors.h"
#include "vhs/inference.h"
#include "vhs/stats.h"

namespace vhs::backtest {

namespace {

void check_lengths(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw ShapeError("return and VaR series lengths differ");
}

// k log p with the 0 log 0 = 0 convention.
double xlogy(double k, double p) { return k == 0.0 ? 0.0 : k * std::log(p); }

}  // namespace

std::size_t ViolationSeries::count() const {
    std::size_t c = 0;
    for (auto h : hits) c += h;
    return c;
}

ViolationSeries violations(std::span<const double> r, std::span<const double> var_seq, double alpha) {
    check_lengths(r, var_seq);
    ViolationSeries v;
    v.alpha = alpha;
    v.hits.resize(r.size());
    for (std::size_t t = 0; t < r.size(); ++t) v.hits[t] = r[t] < -var_seq[t] ? 1 : 0;
    return v;
}

LrTests christoffersen_tests(const ViolationSeries& v) {
    if (!(v.alpha > 0.0 && v.alpha < 1.0)) throw DomainError("christoffersen_tests: alpha must lie in (0,1)");
    if (v.hits.empty()) throw DomainError("christoffersen_tests: empty hit sequence");
    LrTests r;
    r.n = v.size();
    r.n1 = v.count();
    r.short_sample = r.n < 100;
    const double n = static_cast<double>(r.n), n1 = static_cast<double>(r.n1), n0 = n - n1;
    const double pi = n1 / n;
    r.lr_uc = -2.0 * (xlogy(n0, 1.0 - v.alpha) + xlogy(n1, v.alpha) - xlogy(n0, 1.0 - pi) - xlogy(n1, pi));
    r.lr_uc = std::max(r.lr_uc, 0.0);
    r.p_uc = stats::chi2_upper_tail(r.lr_uc, 1.0);

    for (std::size_t t = 1; t < v.size(); ++t) {
        const int a = v.hits[t - 1], b = v.hits[t];
        if (a == 0 && b == 0) ++r.n00;
        if (a == 0 && b == 1) ++r.n01;
        if (a == 1 && b == 0) ++r.n10;
        if (a == 1 && b == 1) ++r.n11;
    }
    const double c00 = static_cast<double>(r.n00), c01 = static_cast<double>(r.n01);
    const double c10 = static_cast<double>(r.n10), c11 = static_cast<double>(r.n11);
    r.ind_degenerate = r.n1 == 0 || (c00 + c01) == 0.0 || (c10 + c11) == 0.0;
    if (r.ind_degenerate) {
        r.lr_ind = 0.0;
        r.p_ind = 1.0;
    } else {
        const double p01 = c01 / (c00 + c01), p11 = c11 / (c10 + c11);
        const double p = (c01 + c11) / (c00 + c01 + c10 + c11);
        const double l0 = xlogy(c00 + c10, 1.0 - p) + xlogy(c01 + c11, p);
        const double l1 = xlogy(c00, 1.0 - p01) + xlogy(c01, p01) + xlogy(c10, 1.0 - p11) + xlogy(c11, p11);
        r.lr_ind = std::max(-2.0 * (l0 - l1), 0.0);
        r.p_ind = stats::chi2_upper_tail(r.lr_ind, 1.0);
    }
    r.lr_cc = r.lr_uc + r.lr_ind;
    r.p_cc = stats::chi2_upper_tail(r.lr_cc, 2.0);
    return r;
}

std::vector<double> loss_series(std::span<const double> r, std::span<const double> var_seq, double alpha) {
    check_lengths(r, var_seq);
    std::vector<double> l(r.size());
    for (std::size_t t = 0; t < r.size(); ++t) {
        const double hit = r[t] < -var_seq[t] ? 1.0 : 0.0;
        l[t] = (r[t] + var_seq[t]) * (alpha - hit);
    }
    return l;
}

LossStats av_es_loss(std::span<const double> r, std::span<const double> var_seq, double alpha) {
    check_lengths(r, var_seq);
    if (r.empty()) throw DomainError("av_es_loss: empty series");
    LossStats s;
    double av = 0.0, es = 0.0, cnt = 0.0;
    for (std::size_t t = 0; t < r.size(); ++t)
        if (r[t] < -var_seq[t]) {
            av += -(r[t] + var_seq[t]);
            es += -r[t];
            cnt += 1.0;
        }
    if (cnt > 0) {
        s.av = av / cnt;
        s.es = es / cnt;
    }
    s.loss = stats::mean(loss_series(r, var_seq, alpha));
    s.var_bar = stats::mean(var_seq);
    return s;
}

DmResult dm_test(std::span<const double> loss_a, std::span<const double> loss_b) {
    check_lengths(loss_a, loss_b);
    const std::size_t n = loss_a.size();
    if (n < 2) throw DomainError("dm_test needs at least two losses");
    std::vector<double> d(n);
    for (std::size_t t = 0; t < n; ++t) d[t] = loss_a[t] - loss_b[t];
    const double mean = stats::mean(d);
    for (double& x : d) x -= mean;
    DmResult res;
    res.bandwidth = std::min<std::size_t>(static_cast<std::size_t>(std::floor(std::cbrt(static_cast<double>(n)))), n - 1);
    const double lrv = inference::hac_variance(d, res.bandwidth);
    const double scale = std::max(1.0, std::abs(mean));
    if (!(lrv > 1e-24 * scale * scale)) {
        if (std::abs(mean) <= 1e-15 * scale) {
            res.degenerate = true;
            res.statistic = 0.0;
            res.p_value = 1.0;
        } else {
            res.statistic = mean > 0 ? INFINITY : -INFINITY;
            res.p_value = mean > 0 ? 0.0 : 1.0;
        }
        return res;
    }
    res.statistic = mean / std::sqrt(lrv / static_cast<double>(n));
    res.p_value = 1.0 - stats::normal_cdf(res.statistic);
    return res;
}

BacktestReport make_report(std::string method, std::string episode, std::span<const double> r,
                           std::span<const double> var_seq, double alpha) {
    BacktestReport rep;
    rep.method = std::move(method);
    rep.episode = std::move(episode);
    auto v = violations(r, var_seq, alpha);
    rep.n = v.size();
    rep.viol_pct = 100.0 * static_cast<double>(v.count()) / static_cast<double>(v.size());
    rep.lr = christoffersen_tests(v);
    auto s = av_es_loss(r, var_seq, alpha);
    rep.var_bar = s.var_bar;
    rep.av = s.av;
    rep.es = s.es;
    rep.loss = s.loss;
    return rep;
}

void attach_dm(BacktestReport& report, std::span<const double> r, std::span<const double> var_seq,
               std::span<const double> reference_var, double alpha) {
    auto la = loss_series(r, reference_var, alpha);
    auto lb = loss_series(r, var_seq, alpha);
    report.dm_p = dm_test(la, lb).p_value;
}

void write_reports_csv(std::ostream& out, std::span<const BacktestReport> reports) {
    bool dm = false;
    for (const auto& r : reports) dm = dm || r.dm_p.has_value();
    out << "method,episode,n,viol_pct,lr_uc_p,lr_uc_pct,lr_ind_p,lr_ind_pct,lr_cc_p,lr_cc_pct,var_bar,av,es,loss";
    if (dm) out << ",dm_p";
    out << '\n';
    auto opt = [](const std::optional<double>& v) { return v ? csv::format_double(*v) : std::string{}; };
    for (const auto& r : reports) {
        out << r.method << ',' << r.episode << ',' << r.n << ',' << csv::format_double(r.viol_pct) << ','
            << csv::format_double(r.lr.p_uc) << ',' << csv::format_double(100.0 * r.lr.p_uc) << ','
            << csv::format_double(r.lr.p_ind) << ',' << csv::format_double(100.0 * r.lr.p_ind) << ','
            << csv::format_double(r.lr.p_cc) << ',' << csv::format_double(100.0 * r.lr.p_cc) << ','
            << csv::format_double(r.var_bar) << ',' << opt(r.av) << ',' << opt(r.es) << ','
            << csv::format_double(r.loss);
        if (dm) out << ',' << opt(r.dm_p);
        out << '\n';
    }
}

}  // namespace vhs::backtest
