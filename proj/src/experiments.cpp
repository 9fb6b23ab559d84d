#include "vhs/experiments.h"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <random>
#include <sstream>

#include "vhs/csv.h"
#include "vhs/errors.h"
#include "vhs/garch.h"
#include "vhs/mgarch.h"
#include "vhs/parallel.h"
#include "vhs/portfolio.h"
#include "vhs/stats.h"

namespace vhs::experiments {

DesignSpec DesignSpec::desk(const std::string& id) {
    DesignSpec s;
    s.id = id;
    return s;
}

DesignSpec DesignSpec::full(const std::string& id) {
    DesignSpec s;
    s.id = id;
    s.N = 100;
    s.n = s.n1 + 1000;
    return s;
}

void DesignSpec::validate() const {
    mgarch::design_params(id);
    if (n1 < 500 || n <= n1) throw ValidationError("design spec needs n > n1 >= 500");
    if (N == 0) throw ValidationError("design spec needs at least one replication");
    if (alphas.empty()) throw ValidationError("design spec needs at least one alpha");
    for (double a : alphas)
        if (!(a > 0.0 && a < 0.5)) throw ValidationError("design alphas must lie in (0, 0.5)");
}

namespace {

struct Replication {
    bool ok = false;
    std::string error;
    // per alpha: sums of squared errors and count
    std::vector<double> se_s, se_fhs, se_vhs;
    std::size_t count = 0;
    std::vector<TraceRow> traces;
};

Replication run_replication(const DesignSpec& spec, std::size_t rep) {
    Replication out;
    const auto params = mgarch::design_params(spec.id);
    const auto law = mgarch::design_innovation(spec.id);
    const std::size_t na = spec.alphas.size();
    out.se_s.assign(na, 0.0);
    out.se_fhs.assign(na, 0.0);
    out.se_vhs.assign(na, 0.0);
    try {
        auto sample = mgarch::simulate_cdcc(params, law, spec.n, spec.burn_in, spec.seed + rep, spec.id);
        const Eigen::MatrixXd& y = sample.returns;
        const auto n1 = static_cast<Eigen::Index>(spec.n1);

        auto fit = mgarch::fit_cdcc_bivariate(y.topRows(n1));
        if (!fit.converged) throw ConvergenceError("cDCC correlation step did not converge");
        auto path = mgarch::filter_cdcc(fit.params, y, fit.h0);
        const Eigen::MatrixXd& pool = fit.residuals;

        std::vector<double> q_eta(na);
        for (std::size_t k = 0; k < na; ++k) q_eta[k] = mgarch::innovation_var(law, spec.alphas[k]);

        for (std::size_t t = spec.n1; t < spec.n; ++t) {
            const Eigen::MatrixXd H = sample.truth.covariance(t);
            const Eigen::VectorXd a = min_variance_weights(H);
            const double scale_true = std::sqrt(a.dot(H * a));
            const Eigen::MatrixXd sig = path.sigma(t);

            Eigen::VectorXd v = y.topRows(static_cast<Eigen::Index>(t)) * a;
            std::span<const double> all(v.data(), t);
            auto g = garch::fit_qml(all.first(spec.n1));
            if (!g.converged) throw ConvergenceError("VHS fit did not converge at t=" + std::to_string(t));
            const double s_vhs = garch::one_step_ahead(all, g.theta_hat, g.init).sigma();

            for (std::size_t k = 0; k < na; ++k) {
                const double alpha = spec.alphas[k];
                const double truth = scale_true * q_eta[k];
                const double s = mgarch::spherical_var(sig, a, pool, alpha).value;
                const double f = mgarch::fhs_var(sig, Eigen::VectorXd::Zero(2), a, pool, alpha).value;
                const double vh = -s_vhs * garch::residual_quantile(g.residuals, alpha).xi;
                out.se_s[k] += (s - truth) * (s - truth);
                out.se_fhs[k] += (f - truth) * (f - truth);
                out.se_vhs[k] += (vh - truth) * (vh - truth);
                if (spec.keep_traces) out.traces.push_back({rep, t, alpha, truth, s, f, vh});
            }
            ++out.count;
        }
        out.ok = true;
    } catch (const Error& e) {
        out.ok = false;
        out.error = e.what();
        out.traces.clear();
    }
    return out;
}

}  // namespace

RETable run_design(const DesignSpec& spec) {
    spec.validate();
    std::vector<Replication> reps(spec.N);
    parallel_for(spec.N, spec.workers, [&](std::size_t i) { reps[i] = run_replication(spec, i); });

    RETable table;
    const std::size_t na = spec.alphas.size();
    std::vector<double> s(na, 0.0), f(na, 0.0), v(na, 0.0);
    std::size_t count = 0, failures = 0;
    for (std::size_t i = 0; i < reps.size(); ++i) {
        if (!reps[i].ok) {
            ++failures;
            table.notes.push_back("replication " + std::to_string(i) + " failed: " + reps[i].error);
            continue;
        }
        for (std::size_t k = 0; k < na; ++k) {
            s[k] += reps[i].se_s[k];
            f[k] += reps[i].se_fhs[k];
            v[k] += reps[i].se_vhs[k];
        }
        count += reps[i].count;
        table.traces.insert(table.traces.end(), reps[i].traces.begin(), reps[i].traces.end());
    }
    if (static_cast<double>(failures) >= 0.05 * static_cast<double>(spec.N)) {
        std::ostringstream os;
        os << "design " << spec.id << ": " << failures << " of " << spec.N
           << " replications failed (limit is 5%); first error: " << table.notes.front();
        throw ConvergenceError(os.str());
    }
    table.notes.push_back("parameters estimated on the first n1 observations and held fixed afterwards");
    for (std::size_t k = 0; k < na; ++k) {
        RERow row;
        row.design = spec.id;
        row.n1 = spec.n1;
        row.alpha = spec.alphas[k];
        const double c = static_cast<double>(count);
        row.mse_s = s[k] / c;
        row.mse_fhs = f[k] / c;
        row.mse_vhs = v[k] / c;
        row.ratio_fhs = row.mse_fhs / row.mse_s;
        row.ratio_vhs = row.mse_vhs / row.mse_s;
        row.replications = spec.N - failures;
        row.failures = failures;
        table.rows.push_back(row);
    }
    return table;
}

void write_re_table(std::ostream& out, const RETable& table) {
    using csv::format_double;
    out << "design,n1,alpha,mse_s,mse_fhs,mse_vhs,mse_fhs_over_s,mse_vhs_over_s,replications,failures\n";
    for (const auto& r : table.rows)
        out << r.design << ',' << r.n1 << ',' << format_double(r.alpha) << ',' << format_double(r.mse_s) << ','
            << format_double(r.mse_fhs) << ',' << format_double(r.mse_vhs) << ',' << format_double(r.ratio_fhs) << ','
            << format_double(r.ratio_vhs) << ',' << r.replications << ',' << r.failures << '\n';
}

void write_traces(std::ostream& out, const std::vector<TraceRow>& traces) {
    using csv::format_double;
    out << "replication,t,alpha,truth,spherical,fhs,vhs\n";
    for (const auto& r : traces)
        out << r.replication << ',' << r.t << ',' << format_double(r.alpha) << ',' << format_double(r.truth) << ','
            << format_double(r.spherical) << ',' << format_double(r.fhs) << ',' << format_double(r.vhs) << '\n';
}

Eigen::MatrixXd alternating_composition(std::size_t n, std::size_t m, std::size_t period) {
    if (period == 0 || m < 2) throw DomainError("alternating composition needs m >= 2 and a positive period");
    Eigen::MatrixXd w = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(m));
    const double n_even = static_cast<double>(m / 2), n_odd = static_cast<double>(m - m / 2);
    for (std::size_t t = 0; t < n; ++t) {
        const bool even_block = (t / period) % 2 == 0;
        for (std::size_t j = 0; j < m; ++j) {
            const bool even_asset = (j + 1) % 2 == 0;
            if (even_asset == even_block)
                w(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(j)) = 1.0 / (even_asset ? n_even : n_odd);
        }
    }
    return w;
}

FactorBacktestResult run_rolling_evaluation(const Eigen::MatrixXd& y, const Eigen::MatrixXd& comp,
                                            const RollingSpec& spec) {
    const auto n = static_cast<std::size_t>(y.rows());
    const auto m = static_cast<std::size_t>(y.cols());
    if (comp.rows() < y.rows() || comp.cols() != y.cols()) throw ShapeError("composition does not match the returns");
    if (spec.end > n || spec.start >= spec.end) throw DomainError("evaluation range is empty or past the data");
    if (spec.start < spec.min_window) throw DomainError("evaluation starts before min_window returns are available");
    for (auto method : spec.methods)
        if (is_multivariate(method) && m != 2)
            throw UnsupportedError(to_string(method) + " needs exactly m = 2 assets (got m = " + std::to_string(m) +
                                   "); multivariate estimation is limited to bivariate panels");

    std::vector<double> r(n);
    for (std::size_t t = 0; t < n; ++t)
        r[t] = comp.row(static_cast<Eigen::Index>(t)).dot(y.row(static_cast<Eigen::Index>(t)));

    FactorBacktestResult res;
    const std::size_t horizon = spec.end - spec.start;
    for (auto method : spec.methods) res.traces.push_back({method, std::vector<double>(horizon), 0});
    const bool want_multi = std::any_of(spec.methods.begin(), spec.methods.end(), is_multivariate);

    VarOptions vo;
    vo.alpha = spec.alpha;
    vo.window = spec.window;
    vo.min_window = spec.min_window;
    vo.require_convergence = false;

    for (std::size_t k = 0; k < horizon; ++k) {
        const std::size_t t = spec.start + k;
        const std::size_t s0 = spec.window.start(t);
        const auto rows = static_cast<Eigen::Index>(t - s0);
        Eigen::VectorXd a = comp.row(static_cast<Eigen::Index>(t)).transpose();
        std::optional<mgarch::CdccFit> fit;
        if (want_multi) fit = mgarch::fit_cdcc_bivariate(y.middleRows(static_cast<Eigen::Index>(s0), rows), {}, false);
        for (auto& tr : res.traces) {
            VarEstimate est;
            switch (tr.method) {
                case Method::NaiveGarch:
                    est = naive_garch_var(r, t, vo);
                    break;
                case Method::VHS: {
                    Eigen::VectorXd v = y.middleRows(static_cast<Eigen::Index>(s0), rows) * a;
                    est = garch_var(std::span<const double>(v.data(), t - s0), Method::VHS, t, vo);
                    break;
                }
                case Method::NaiveEmpirical:
                    est = naive_empirical_var(std::span<const double>(r).subspan(s0, t - s0), spec.alpha);
                    break;
                case Method::Spherical:
                    est = mgarch::spherical_var(fit->path.sigma(t - s0), a, fit->residuals, spec.alpha);
                    est.converged = fit->converged;
                    break;
                case Method::FHS:
                    est = mgarch::fhs_var(fit->path.sigma(t - s0), Eigen::VectorXd::Zero(2), a, fit->residuals, spec.alpha);
                    est.converged = fit->converged;
                    break;
            }
            tr.var[k] = est.value;
            tr.nonconverged += !est.converged;
        }
    }

    res.returns.assign(r.begin() + static_cast<std::ptrdiff_t>(spec.start), r.begin() + static_cast<std::ptrdiff_t>(spec.end));
    const MethodTrace* ref = nullptr;
    if (spec.reference)
        for (const auto& tr : res.traces)
            if (tr.method == *spec.reference) ref = &tr;
    for (const auto& tr : res.traces) {
        auto rep = backtest::make_report(to_string(tr.method), spec.episode, res.returns, tr.var, spec.alpha);
        if (ref && tr.method != ref->method) backtest::attach_dm(rep, res.returns, tr.var, ref->var, spec.alpha);
        res.reports.push_back(rep);
        if (tr.nonconverged > 0)
            res.notes.push_back(to_string(tr.method) + ": " + std::to_string(tr.nonconverged) +
                                " windows with a non-converged fit (estimate kept)");
    }
    return res;
}

FactorBacktestResult run_factor_backtest(const FactorBacktestSpec& spec) {
    if (spec.window < 500 || spec.horizon == 0) throw ValidationError("factor backtest needs window >= 500 and horizon > 0");
    if (!(spec.alpha > 0.0 && spec.alpha < 0.5)) throw ValidationError("alpha must lie in (0, 0.5)");
    mgarch::FactorModelParams fp;
    fp.m = spec.m;
    const std::size_t total = spec.window + spec.horizon;
    const Eigen::MatrixXd y = mgarch::simulate_factor_model(fp, total, spec.seed);

    RollingSpec rs;
    rs.start = spec.window;
    rs.end = total;
    rs.window = Window::rolling(spec.window);
    rs.min_window = spec.window;
    rs.alpha = spec.alpha;
    rs.episode = "m=" + std::to_string(spec.m) + ";seed=" + std::to_string(spec.seed);
    std::vector<std::string> skipped;
    for (auto method : spec.methods) {
        if (is_multivariate(method) && spec.m != 2) {
            skipped.push_back(to_string(method) + " skipped: multivariate estimation is bivariate (m = 2) only");
            continue;
        }
        rs.methods.push_back(method);
    }
    if (std::find(rs.methods.begin(), rs.methods.end(), Method::NaiveGarch) != rs.methods.end())
        rs.reference = Method::NaiveGarch;
    auto res = run_rolling_evaluation(y, alternating_composition(total, spec.m, spec.switch_period), rs);
    res.notes.insert(res.notes.begin(), skipped.begin(), skipped.end());
    return res;
}

Eigen::MatrixXd static_covariance() {
    Eigen::Matrix3d R;
    R << 1.0, -0.855, 0.855, -0.855, 1.0, -0.810, 0.855, -0.810, 1.0;
    Eigen::Vector3d d(0.01, 0.02, 0.04);
    return d.asDiagonal() * R * d.asDiagonal();
}

StaticBundle run_static_crystallized(std::uint64_t seed, std::size_t n, double alpha, bool estimates, std::size_t start) {
    if (n <= start || start < 100) throw ValidationError("static experiment needs n > start >= 100");
    const Eigen::MatrixXd cov = static_covariance();
    Eigen::LLT<Eigen::MatrixXd> llt(cov);
    const Eigen::MatrixXd L = llt.matrixL();
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    Eigen::MatrixXd y(static_cast<Eigen::Index>(n), 3);
    for (Eigen::Index t = 0; t < y.rows(); ++t) {
        Eigen::Vector3d z(normal(rng), normal(rng), normal(rng));
        y.row(t) = (L * z).transpose();
    }
    auto prices = prices_from_returns(y, 1000.0);
    auto comp = evolve_composition(prices, policy::Crystallized{Eigen::Vector3d::Ones()});

    StaticBundle b;
    b.start = start;
    b.weights = comp.weights.topRows(static_cast<Eigen::Index>(n));
    b.returns.resize(n);
    for (Eigen::Index t = 0; t < y.rows(); ++t) b.returns[static_cast<std::size_t>(t)] = b.weights.row(t).dot(y.row(t));
    const double z = -stats::normal_quantile(alpha);
    for (std::size_t t = start; t < n; ++t) {
        Eigen::VectorXd a = b.weights.row(static_cast<Eigen::Index>(t)).transpose();
        b.truth.push_back(std::sqrt(a.dot(cov * a)) * z);
    }
    if (!estimates) return b;

    const auto m = static_cast<Eigen::Index>(3);
    Eigen::Vector3d sum = Eigen::Vector3d::Zero();
    Eigen::Matrix3d outer = Eigen::Matrix3d::Zero();
    for (std::size_t t = 0; t < n; ++t) {
        if (t >= start) {
            const auto tt = static_cast<Eigen::Index>(t);
            const double c = static_cast<double>(t);
            Eigen::Vector3d mu = sum / c;
            Eigen::Matrix3d sample = outer / c - mu * mu.transpose();
            Eigen::MatrixXd root = mgarch::sym_sqrt(sample);
            Eigen::MatrixXd past = y.topRows(tt);
            Eigen::MatrixXd pool = root.fullPivLu().solve(past.transpose()).transpose();
            Eigen::VectorXd a = b.weights.row(tt).transpose();

            b.naive.push_back(naive_empirical_var(std::span<const double>(b.returns).first(t), alpha).value);
            b.spherical.push_back(mgarch::spherical_var(root, a, pool, alpha).value);
            b.fhs.push_back(mgarch::fhs_var(root, Eigen::VectorXd::Zero(m), a, pool, alpha).value);
            Eigen::VectorXd virt = past * a;
            b.vhs.push_back(naive_empirical_var(std::span<const double>(virt.data(), t), alpha).value);
        }
        Eigen::Vector3d yt = y.row(static_cast<Eigen::Index>(t)).transpose();
        sum += yt;
        outer += yt * yt.transpose();
    }
    return b;
}

void write_static_bundle(std::ostream& out, const StaticBundle& b) {
    using csv::format_double;
    out << "t,w1,w2,w3,return,truth,naive,spherical,fhs,vhs\n";
    for (std::size_t k = 0; k < b.truth.size(); ++k) {
        const std::size_t t = b.start + k;
        const auto tt = static_cast<Eigen::Index>(t);
        out << t << ',' << format_double(b.weights(tt, 0)) << ',' << format_double(b.weights(tt, 1)) << ','
            << format_double(b.weights(tt, 2)) << ',' << format_double(b.returns[t]) << ',' << format_double(b.truth[k]);
        auto opt = [&](const std::vector<double>& v) { return k < v.size() ? format_double(v[k]) : std::string{}; };
        out << ',' << opt(b.naive) << ',' << opt(b.spherical) << ',' << opt(b.fhs) << ',' << opt(b.vhs) << '\n';
    }
}

}  // namespace vhs::experiments
