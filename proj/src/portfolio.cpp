#include "vhs/portfolio.h"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "vhs/csv.h"
#include "vhs/errors.h"

namespace vhs {

namespace {

void check_weights(const Eigen::VectorXd& w, std::size_t m, const char* what) {
    if (static_cast<std::size_t>(w.size()) != m)
        throw ShapeError(std::string(what) + ": weight vector length does not match asset count");
    if (!w.allFinite()) throw DomainError(std::string(what) + ": non-finite weight");
    if (std::abs(w.sum() - 1.0) > 1e-12) throw DomainError(std::string(what) + ": weights must sum to 1");
}

Eigen::VectorXd value_weights(const Eigen::VectorXd& units, const Eigen::VectorXd& p, std::size_t k) {
    Eigen::VectorXd v = units.cwiseProduct(p);
    const double total = v.sum();
    if (!(std::abs(total) > 0.0) || !std::isfinite(total)) {
        std::ostringstream os;
        os << "portfolio value is zero or non-finite at date index " << k;
        throw DegeneratePortfolioError(os.str());
    }
    return v / total;
}

Eigen::MatrixXd sample_covariance(const Eigen::MatrixXd& y) {
    Eigen::RowVectorXd mu = y.colwise().mean();
    Eigen::MatrixXd c = y.rowwise() - mu;
    return (c.transpose() * c) / static_cast<double>(y.rows());
}

}  // namespace

void PriceMatrix::validate() const {
    if (prices.cols() < 1) throw ValidationError("price panel needs at least one asset");
    if (prices.rows() < 2) throw ValidationError("price panel needs at least two dates");
    if (dates.size() != rows()) throw ShapeError("date count does not match price rows");
    if (!assets.empty() && assets.size() != cols()) throw ShapeError("asset names do not match price columns");
    for (std::size_t i = 1; i < dates.size(); ++i)
        if (!(dates[i - 1] < dates[i]))
            throw ValidationError("dates must be strictly increasing (at '" + dates[i] + "')");
    for (Eigen::Index i = 0; i < prices.rows(); ++i)
        for (Eigen::Index j = 0; j < prices.cols(); ++j)
            if (!(prices(i, j) > 0.0) || !std::isfinite(prices(i, j))) {
                std::ostringstream os;
                os << "non-positive price at row " << i << " (" << dates[static_cast<std::size_t>(i)] << "), column "
                   << j;
                if (!assets.empty()) os << " ('" << assets[static_cast<std::size_t>(j)] << "')";
                throw DomainError(os.str());
            }
}

ReturnMatrix compute_log_returns(const PriceMatrix& pm) {
    pm.validate();
    ReturnMatrix r;
    const auto n = pm.prices.rows();
    r.returns = (pm.prices.bottomRows(n - 1).array().log() - pm.prices.topRows(n - 1).array().log()).matrix();
    r.dates.assign(pm.dates.begin() + 1, pm.dates.end());
    return r;
}

CompositionPath evolve_composition(const PriceMatrix& pm, const HoldingsPolicy& pol) {
    pm.validate();
    const std::size_t n = pm.rows(), m = pm.cols();
    CompositionPath out;
    out.weights.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(m));
    auto price = [&](std::size_t k) -> Eigen::VectorXd { return pm.prices.row(static_cast<Eigen::Index>(k)).transpose(); };
    auto set_row = [&](std::size_t k, const Eigen::VectorXd& a) { out.weights.row(static_cast<Eigen::Index>(k)) = a.transpose(); };

    std::visit(
        [&](const auto& p) {
            using P = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<P, policy::Crystallized>) {
                if (static_cast<std::size_t>(p.units.size()) != m) throw ShapeError("crystallized units length != m");
                if ((p.units.array() <= 0.0).any()) throw DomainError("crystallized units must be strictly positive");
                for (std::size_t k = 0; k < n; ++k) set_row(k, value_weights(p.units, price(k), k));
            } else if constexpr (std::is_same_v<P, policy::Static>) {
                check_weights(p.weights, m, "static policy");
                for (std::size_t k = 0; k < n; ++k) set_row(k, p.weights);
            } else if constexpr (std::is_same_v<P, policy::RebalancedEvery>) {
                check_weights(p.weights, m, "rebalancing policy");
                if (p.period == 0) throw DomainError("rebalancing period must be positive");
                Eigen::VectorXd units;
                double value = 1.0;
                for (std::size_t k = 0; k < n; ++k) {
                    Eigen::VectorXd pk = price(k);
                    if (k > 0) value = units.dot(pk);
                    if (k % p.period == 0) {
                        units = (value * p.weights).cwiseQuotient(pk);
                        set_row(k, p.weights);
                    } else {
                        set_row(k, value_weights(units, pk, k));
                    }
                }
            } else if constexpr (std::is_same_v<P, policy::MinVariance>) {
                auto y = compute_log_returns(pm).returns;
                const std::size_t warmup = std::max<std::size_t>(2 * m, 20);
                Eigen::VectorXd equal = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(m), 1.0 / static_cast<double>(m));
                Eigen::VectorXd held;
                for (std::size_t k = 0; k < n; ++k) {
                    if (p.covariance) {
                        set_row(k, min_variance_weights(p.covariance(k)));
                        continue;
                    }
                    // returns 0..k-1 are known at the close of date k
                    const std::size_t avail = k;
                    if (avail < warmup) {
                        set_row(k, equal);
                        continue;
                    }
                    if (!p.refit && held.size() > 0) {
                        set_row(k, held);
                        continue;
                    }
                    const std::size_t len = std::min(avail, p.window);
                    if (!p.refit && len < p.window) {
                        set_row(k, equal);
                        continue;
                    }
                    auto block = y.middleRows(static_cast<Eigen::Index>(avail - len), static_cast<Eigen::Index>(len));
                    Eigen::VectorXd a = min_variance_weights(sample_covariance(block));
                    if (!p.refit) held = a;
                    set_row(k, a);
                }
            } else if constexpr (std::is_same_v<P, policy::Schedule>) {
                if (static_cast<std::size_t>(p.units.rows()) != n || static_cast<std::size_t>(p.units.cols()) != m)
                    throw ShapeError("schedule units must be one row per price date and one column per asset");
                if ((p.units.array() < 0.0).any()) throw DomainError("schedule units must be nonnegative");
                for (std::size_t k = 0; k < n; ++k)
                    set_row(k, value_weights(p.units.row(static_cast<Eigen::Index>(k)).transpose(), price(k), k));
            }
        },
        pol);
    return out;
}

std::vector<double> portfolio_returns(const ReturnMatrix& r, const CompositionPath& comp, ReturnKind kind) {
    if (comp.weights.cols() != r.returns.cols() || comp.weights.rows() < r.returns.rows())
        throw ShapeError("composition path does not align with the return panel");
    std::vector<double> out(r.rows());
    for (Eigen::Index t = 0; t < r.returns.rows(); ++t) {
        if (kind == ReturnKind::Linearized)
            out[static_cast<std::size_t>(t)] = comp.weights.row(t).dot(r.returns.row(t));
        else
            out[static_cast<std::size_t>(t)] = comp.weights.row(t).dot(r.returns.row(t).array().exp().matrix()) - 1.0;
    }
    return out;
}

VirtualReturnSeries virtual_returns(const ReturnMatrix& r, const Eigen::VectorXd& x) {
    if (x.size() != r.returns.cols()) throw ShapeError("virtual_returns: x length does not match asset count");
    if (!x.allFinite()) throw DomainError("virtual_returns: x must be finite");
    VirtualReturnSeries v;
    v.x = x;
    Eigen::VectorXd vals = r.returns * x;
    v.values.assign(vals.data(), vals.data() + vals.size());
    return v;
}

std::vector<double> concentration_path(const CompositionPath& comp) {
    std::vector<double> out(static_cast<std::size_t>(comp.weights.rows()));
    for (Eigen::Index t = 0; t < comp.weights.rows(); ++t) out[static_cast<std::size_t>(t)] = comp.weights.row(t).maxCoeff();
    return out;
}

Eigen::VectorXd min_variance_weights(const Eigen::MatrixXd& c) {
    if (c.rows() != c.cols() || c.rows() == 0) throw ShapeError("covariance must be square");
    Eigen::FullPivLU<Eigen::MatrixXd> lu(c);
    if (!lu.isInvertible()) throw RankDeficiencyError("covariance matrix is singular");
    Eigen::VectorXd e = Eigen::VectorXd::Ones(c.rows());
    Eigen::VectorXd z = lu.solve(e);
    const double s = e.dot(z);
    if (!(std::abs(s) > 0.0) || !std::isfinite(s)) throw RankDeficiencyError("min-variance normalisation is degenerate");
    return z / s;
}

policy::Schedule alternating_schedule(const PriceMatrix& pm, const std::vector<std::vector<std::size_t>>& groups,
                                      std::size_t period) {
    if (groups.empty() || period == 0) throw DomainError("alternating schedule needs groups and a positive period");
    const std::size_t n = pm.rows(), m = pm.cols();
    policy::Schedule s;
    s.units = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(m));
    for (std::size_t k = 0; k < n; ++k) {
        const auto& g = groups[(k / period) % groups.size()];
        if (g.empty()) throw DomainError("alternating schedule group is empty");
        for (auto j : g) {
            if (j >= m) throw ShapeError("alternating schedule references a missing asset");
            const auto kk = static_cast<Eigen::Index>(k), jj = static_cast<Eigen::Index>(j);
            s.units(kk, jj) = 1.0 / (static_cast<double>(g.size()) * pm.prices(kk, jj));
        }
    }
    return s;
}

std::vector<std::string> make_dates(std::size_t count, const std::string& start) {
    using namespace std::chrono;
    if (!csv::is_iso_date(start)) throw ValidationError("start date is not ISO-8601: " + start);
    int y = std::stoi(start.substr(0, 4));
    unsigned mo = static_cast<unsigned>(std::stoi(start.substr(5, 2)));
    unsigned d = static_cast<unsigned>(std::stoi(start.substr(8, 2)));
    sys_days day0{year{y} / month{mo} / day{d}};
    std::vector<std::string> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        year_month_day ymd{day0 + days{static_cast<int>(i)}};
        char buf[16];
        std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()),
                      static_cast<unsigned>(ymd.day()));
        out.emplace_back(buf);
    }
    return out;
}

PriceMatrix prices_from_returns(const Eigen::MatrixXd& returns, double base, double scale, const std::string& start) {
    PriceMatrix pm;
    const auto n = returns.rows(), m = returns.cols();
    pm.prices.resize(n + 1, m);
    pm.prices.row(0).setConstant(base);
    Eigen::RowVectorXd logp = Eigen::RowVectorXd::Constant(m, std::log(base));
    for (Eigen::Index t = 0; t < n; ++t) {
        logp += scale * returns.row(t);
        pm.prices.row(t + 1) = logp.array().exp().matrix();
    }
    pm.dates = make_dates(static_cast<std::size_t>(n + 1), start);
    for (Eigen::Index j = 0; j < m; ++j) pm.assets.push_back("asset" + std::to_string(j + 1));
    return pm;
}

}  // namespace vhs
