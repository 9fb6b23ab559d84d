#include "vhs/commands.h"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <ostream>
#include <sstream>

#include "vhs/backtest.h"
#include "vhs/csv.h"
#include "vhs/errors.h"
#include "vhs/estimators.h"
#include "vhs/experiments.h"
#include "vhs/inference.h"
#include "vhs/mgarch.h"
#include "vhs/parallel.h"

namespace vhs::cli {

namespace fs = std::filesystem;
using csv::format_double;

int exit_code(const std::exception& e) {
    if (dynamic_cast<const ValidationError*>(&e)) return kExitValidation;
    if (dynamic_cast<const IoError*>(&e)) return kExitIo;
    if (dynamic_cast<const UnsupportedError*>(&e)) return kExitUnsupported;
    return kExitRuntime;
}

std::string exit_code_help() {
    return "Exit codes:\n"
           "  0  success\n"
           "  1  runtime failure (fit did not converge, degenerate data, numerical failure)\n"
           "  2  invalid configuration or input values (all problems are listed together)\n"
           "  3  I/O failure (missing or unreadable input, unwritable output)\n"
           "  4  unsupported feature (A*-H* designs, multivariate methods with m != 2)\n";
}

namespace {

// Files go under one directory; each write is checked.
class Output {
  public:
    explicit Output(const std::string& dir) : dir_(dir) {
        std::error_code ec;
        fs::create_directories(dir_, ec);
        if (ec) throw IoError("cannot create output directory " + dir_.string() + ": " + ec.message());
    }

    template <class F>
    void write(const std::string& name, F&& body) {
        const fs::path p = dir_ / name;
        std::ostringstream buf;
        body(buf);
        std::ofstream out(p, std::ios::binary);
        out << buf.str();
        out.close();
        if (!out) throw IoError("cannot write " + p.string());
        files_.push_back(p);
    }

    std::vector<fs::path> files() const { return files_; }

  private:
    fs::path dir_;
    std::vector<fs::path> files_;
};

bool parse_real(const std::string& s, double& x) {
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), x);
    return ec == std::errc{} && p == s.data() + s.size();
}

bool parse_count(const std::string& s, std::size_t& x) {
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), x);
    return ec == std::errc{} && p == s.data() + s.size();
}

std::vector<std::string> split_colon(const std::string& s) {
    std::vector<std::string> out;
    std::size_t b = 0;
    for (std::size_t e; (e = s.find(':', b)) != std::string::npos; b = e + 1) out.push_back(s.substr(b, e - b));
    out.push_back(s.substr(b));
    return out;
}

// Empty string when fine; otherwise a description of the problem.
std::string vector_spec_problem(const std::string& s, bool positive_sum) {
    if (s == "equal") return {};
    double sum = 0.0;
    auto items = split(s, ',');
    if (items.empty()) return "empty vector";
    for (const auto& it : items) {
        double x = 0.0;
        if (!parse_real(it, x)) return "'" + it + "' is not a number";
        if (x < 0.0) return "negative entry " + it;
        sum += x;
    }
    if (positive_sum && !(sum > 0.0)) return "entries sum to zero";
    return {};
}

Eigen::VectorXd vector_spec(const std::string& s, std::size_t m) {
    if (s == "equal") return Eigen::VectorXd::Constant(static_cast<Eigen::Index>(m), 1.0 / static_cast<double>(m));
    auto items = split(s, ',');
    if (items.size() != m)
        throw ValidationError("policy vector has " + std::to_string(items.size()) + " entries but the panel has " +
                              std::to_string(m) + " assets");
    Eigen::VectorXd v(static_cast<Eigen::Index>(m));
    for (std::size_t i = 0; i < m; ++i) parse_real(items[i], v[static_cast<Eigen::Index>(i)]);
    return v;
}

std::optional<Window> parse_window(const std::string& s, std::string& problem) {
    if (s == "expanding") return Window::expanding();
    auto parts = split_colon(s);
    std::size_t len = 0;
    if (parts.size() == 2 && parts[0] == "rolling" && parse_count(parts[1], len) && len >= 50) return Window::rolling(len);
    problem = "window: expected 'expanding' or 'rolling:L' with L >= 50, got '" + s + "'";
    return std::nullopt;
}

template <class V>
std::string join_doubles(const V& v) {
    std::string out;
    for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(v.size()); ++i) out += (i ? "," : "") + format_double(v[i]);
    return out;
}

std::size_t resolve_t0(const std::string& spec, const PriceMatrix& prices) {
    const std::size_t n = prices.rows() - 1;
    if (spec == "last") return n;
    if (auto it = std::find(prices.dates.begin(), prices.dates.end(), spec); it != prices.dates.end())
        return static_cast<std::size_t>(it - prices.dates.begin());
    std::size_t k = 0;
    if (parse_count(spec, k) && k <= n) return k;
    throw ValidationError("t0: '" + spec + "' is neither 'last', a date in the panel, nor a return index <= " +
                          std::to_string(n));
}

void check_output_dir(ConfigReader& rd, std::string& dir) {
    dir = rd.required("output");
}

void write_meta(Output& out, const std::string& name, const RunConfig& cfg, const std::vector<std::string>& extra) {
    out.write(name, [&](std::ostream& os) {
        cfg.write_metadata(os);
        for (const auto& line : extra) os << line << '\n';
    });
}

std::vector<Method> parse_methods(ConfigReader& rd, const std::vector<std::string>& fallback) {
    std::vector<Method> out;
    for (const auto& s : rd.list("methods", fallback)) {
        try {
            out.push_back(parse_method(s));
        } catch (const Error&) {
            rd.problem("methods: unknown method '" + s +
                       "' (expected naive-garch, naive-empirical, vhs, spherical, fhs)");
        }
    }
    return out;
}

}  // namespace

std::string check_policy_syntax(const std::string& spec) {
    auto parts = split_colon(spec);
    const std::string& kind = parts[0];
    std::size_t k = 0;
    if ((kind == "static" || kind == "crystallized") && parts.size() == 2) {
        auto p = vector_spec_problem(parts[1], true);
        return p.empty() ? p : "policy: " + p;
    }
    if (kind == "rebalance" && parts.size() == 3) {
        if (!parse_count(parts[1], k) || k == 0) return "policy: rebalance period must be a positive integer";
        auto p = vector_spec_problem(parts[2], true);
        return p.empty() ? p : "policy: " + p;
    }
    if (kind == "minvar" && parts.size() <= 2) {
        if (parts.size() == 2 && (!parse_count(parts[1], k) || k < 20)) return "policy: minvar window must be >= 20";
        return {};
    }
    if (kind == "alternate" && parts.size() == 2) {
        if (!parse_count(parts[1], k) || k == 0) return "policy: alternate period must be a positive integer";
        return {};
    }
    return "policy: unrecognised spec '" + spec +
           "' (static:W, crystallized:U, rebalance:T:W, minvar[:L], alternate:T; W and U are 'equal' or a comma list)";
}

HoldingsPolicy parse_policy(const std::string& spec, const PriceMatrix& prices) {
    if (auto p = check_policy_syntax(spec); !p.empty()) throw ValidationError(p);
    auto parts = split_colon(spec);
    const std::size_t m = prices.cols();
    const std::string& kind = parts[0];
    if (kind == "static") return policy::Static{vector_spec(parts[1], m)};
    if (kind == "crystallized") {
        if (parts[1] == "equal") {
            // equal initial value in each asset
            Eigen::VectorXd u = prices.prices.row(0).transpose().cwiseInverse() / static_cast<double>(m);
            return policy::Crystallized{u};
        }
        return policy::Crystallized{vector_spec(parts[1], m)};
    }
    if (kind == "rebalance") return policy::RebalancedEvery{std::stoul(parts[1]), vector_spec(parts[2], m)};
    if (kind == "minvar") {
        policy::MinVariance mv;
        if (parts.size() == 2) mv.window = std::stoul(parts[1]);
        return mv;
    }
    if (m < 2) throw ValidationError("policy: alternate needs at least two assets");
    std::vector<std::size_t> even, odd;
    for (std::size_t j = 0; j < m; ++j) ((j + 1) % 2 == 0 ? even : odd).push_back(j);
    return alternating_schedule(prices, {even, odd}, std::stoul(parts[1]));
}

CommandResult cmd_var(const RunConfig& cfg) {
    ConfigReader rd(cfg);
    std::string out_dir;
    check_output_dir(rd, out_dir);
    const std::string prices_path = rd.required("prices");
    const std::string method_name = rd.text("method", "vhs");
    const double alpha = rd.real("alpha", 0.05, 0.0, 0.5);
    const double alpha0 = rd.real("alpha0", 0.10, 0.0, 1.0);
    const std::string policy_spec = rd.text("policy", "static:equal");
    const std::string window_spec = rd.text("window", "expanding");
    const std::string t0_spec = rd.text("t0", "last");
    const std::string psi = rd.text("psi", "kernel");
    const bool iid = rd.flag("iid", false);
    const bool demean = rd.flag("demean", false);
    const std::size_t min_window = rd.count("min_window", 250, 50);
    auto hac = rd.optional_text("hac_bandwidth");

    Method method = Method::VHS;
    if (method_name == "naive-garch") method = Method::NaiveGarch;
    else if (method_name != "vhs") rd.problem("method: expected vhs or naive-garch, got '" + method_name + "'");
    if (auto p = check_policy_syntax(policy_spec); !p.empty()) rd.problem(p);
    std::string wp;
    auto window = parse_window(window_spec, wp);
    if (!window) rd.problem(wp);
    if (psi != "kernel" && psi != "indicator") rd.problem("psi: expected kernel or indicator");
    std::size_t hac_b = 0;
    if (hac && (!parse_count(*hac, hac_b) || hac_b == 0)) rd.problem("hac_bandwidth: expected a positive integer");
    rd.finish();

    const auto prices = csv::read_prices(prices_path);
    const auto policy = parse_policy(policy_spec, prices);
    const std::size_t t0 = resolve_t0(t0_spec, prices);

    VarOptions vo;
    vo.alpha = alpha;
    vo.window = *window;
    vo.min_window = min_window;
    vo.fit.demean = demean;
    const auto returns = compute_log_returns(prices);
    const auto comp = evolve_composition(prices, policy);
    VarEstimate est = method == Method::VHS ? vhs_var(returns, comp, t0, vo)
                                            : naive_garch_var(portfolio_returns(returns, comp), t0, vo);
    const garch::GarchFit& fit = *est.fit;

    inference::SigmaOptions so;
    so.psi = psi == "kernel" ? inference::PsiMethod::Kernel : inference::PsiMethod::Indicator;
    so.iid = iid;
    if (hac) so.bandwidth = hac_b;
    const auto sig = inference::estimate_sigma_alpha(fit, alpha, so);
    const auto ci = inference::var_confidence_interval(fit, sig, t0, alpha, alpha0);
    const auto lemma = garch::check_lemma2_conditions(fit.theta_hat, fit.residuals);

    Output out(out_dir);
    std::vector<std::string> warnings = sig.warnings;
    for (const auto& f : lemma.flags()) warnings.push_back("lemma2: " + f);
    if (ci.clamped) warnings.push_back("negative delta' Sigma delta clamped to zero");

    const std::string forecast_from = prices.dates[t0];
    out.write("var_report.txt", [&](std::ostream& os) {
        os << "method=" << to_string(method) << '\n'
           << "t0=" << t0 << '\n'
           << "forecast_from_date=" << forecast_from << '\n'
           << "alpha=" << format_double(alpha) << '\n'
           << "alpha0=" << format_double(alpha0) << '\n'
           << "ci_level=" << format_double(ci.level) << '\n'
           << "var=" << format_double(est.value) << '\n'
           << "ci_lower=" << format_double(ci.lower) << '\n'
           << "ci_upper=" << format_double(ci.upper) << '\n'
           << "sigma_t0=" << format_double(est.sigma_t0) << '\n'
           << "xi=" << format_double(est.xi) << '\n'
           << "omega=" << format_double(fit.theta_hat.omega) << '\n'
           << "garch_alpha=" << format_double(fit.theta_hat.alpha) << '\n'
           << "garch_beta=" << format_double(fit.theta_hat.beta) << '\n'
           << "mean_removed=" << format_double(fit.mean_removed) << '\n'
           << "n_obs=" << fit.residuals.size() << '\n'
           << "converged=" << (fit.converged ? "true" : "false") << '\n'
           << "composition=" << join_doubles(comp.weights.row(static_cast<Eigen::Index>(t0))) << '\n'
           << "delta=" << join_doubles(ci.delta) << '\n'
           << "zeta=" << format_double(sig.zeta) << '\n'
           << "f_bar=" << format_double(sig.f_bar) << '\n'
           << "S22=" << format_double(sig.S22) << '\n'
           << "S12=" << join_doubles(sig.S12) << '\n'
           << "Psi=" << join_doubles(sig.Psi) << '\n'
           << "Lambda=" << join_doubles(sig.Lambda) << '\n'
           << "J=" << join_doubles(sig.J.reshaped()) << '\n'
           << "S11=" << join_doubles(sig.S11.reshaped()) << '\n'
           << "psd_repaired=" << (sig.psd_repaired ? "true" : "false") << '\n'
           << "lemma2_mean_log_term=" << format_double(lemma.mean_log_term) << '\n'
           << "lemma2_strictly_stationary=" << (lemma.strictly_stationary ? "true" : "false") << '\n'
           << "lemma2_u2_variance=" << format_double(lemma.u2_variance) << '\n'
           << "lemma2_box_ok=" << (lemma.box_ok ? "true" : "false") << '\n'
           << "lemma2_abs_moment=" << format_double(lemma.abs_moment) << '\n'
           << "lemma2_all_ok=" << (lemma.all_ok() ? "true" : "false") << '\n'
           << "ci_out_of_sample=" << (ci.out_of_sample ? "true" : "false") << '\n';
        for (const auto& w : warnings) os << "warning=" << w << '\n';
    });
    out.write("sigma_alpha.csv", [&](std::ostream& os) {
        os << "row,omega,alpha,beta,xi\n";
        const char* names[] = {"omega", "alpha", "beta", "xi"};
        for (int i = 0; i < 4; ++i) {
            os << names[i];
            for (int j = 0; j < 4; ++j) os << ',' << format_double(sig.full(i, j));
            os << '\n';
        }
    });
    write_meta(out, "var.meta", cfg, {});

    std::ostringstream s;
    s << to_string(method) << " VaR at alpha=" << alpha << " for the return after " << forecast_from << ": "
      << est.value << "  [" << ci.lower << ", " << ci.upper << "] (" << ci.level * 100 << "% CI)\n"
      << "theta_hat = (" << fit.theta_hat.omega << ", " << fit.theta_hat.alpha << ", " << fit.theta_hat.beta
      << "), xi = " << est.xi << ", n = " << fit.residuals.size() << '\n';
    for (const auto& w : warnings) s << "warning: " << w << '\n';
    return {out.files(), s.str()};
}

CommandResult cmd_backtest(const RunConfig& cfg) {
    ConfigReader rd(cfg);
    std::string out_dir;
    check_output_dir(rd, out_dir);
    const std::string prices_path = rd.required("prices");
    const std::string policy_spec = rd.text("policy", "static:equal");
    const auto methods = parse_methods(rd, {"naive-garch", "vhs"});
    const double alpha = rd.real("alpha", 0.05, 0.0, 0.5);
    const std::string window_spec = rd.text("window", "rolling:500");
    auto start_opt = rd.optional_text("start");
    auto end_opt = rd.optional_text("end");
    auto min_window_opt = rd.optional_text("min_window");
    const std::string ref_spec = rd.text("reference", "auto");
    auto episode_opt = rd.optional_text("episode");

    if (methods.empty() && rd.problems().empty()) rd.problem("methods: empty");
    for (std::size_t i = 0; i < methods.size(); ++i)
        for (std::size_t j = 0; j < i; ++j)
            if (methods[i] == methods[j]) rd.problem("methods: duplicate " + to_string(methods[i]));
    if (auto p = check_policy_syntax(policy_spec); !p.empty()) rd.problem(p);
    std::string wp;
    auto window = parse_window(window_spec, wp);
    if (!window) rd.problem(wp);
    std::size_t start = 0, end = 0, min_window = 0;
    if (start_opt && !parse_count(*start_opt, start)) rd.problem("start: expected a return index");
    if (end_opt && !parse_count(*end_opt, end)) rd.problem("end: expected a return index");
    if (min_window_opt && (!parse_count(*min_window_opt, min_window) || min_window < 50))
        rd.problem("min_window: expected an integer >= 50");
    std::optional<Method> reference;
    if (ref_spec == "auto") {
        if (methods.size() > 1 && std::find(methods.begin(), methods.end(), Method::NaiveGarch) != methods.end())
            reference = Method::NaiveGarch;
    } else if (ref_spec != "none") {
        try {
            reference = parse_method(ref_spec);
            if (std::find(methods.begin(), methods.end(), *reference) == methods.end())
                rd.problem("reference: " + ref_spec + " is not among the methods");
        } catch (const Error&) {
            rd.problem("reference: unknown method '" + ref_spec + "'");
        }
    }
    rd.finish();

    const auto prices = csv::read_prices(prices_path);
    const auto policy = parse_policy(policy_spec, prices);
    const auto returns = compute_log_returns(prices);
    const auto comp = evolve_composition(prices, policy);
    const std::size_t n = returns.rows();

    experiments::RollingSpec rs;
    rs.window = *window;
    rs.min_window = min_window_opt ? min_window : (window->kind == Window::Kind::Rolling ? window->length : 250);
    rs.start = start_opt ? start : rs.min_window;
    rs.end = end_opt ? end : n;
    rs.alpha = alpha;
    rs.methods = methods;
    rs.reference = reference;
    if (rs.end > n || rs.start >= rs.end)
        throw ValidationError("backtest range [" + std::to_string(rs.start) + ", " + std::to_string(rs.end) +
                              ") is empty or past the " + std::to_string(n) + " available returns");
    if (rs.start < rs.min_window)
        throw ValidationError("start must leave at least min_window = " + std::to_string(rs.min_window) + " returns");
    rs.episode = episode_opt ? *episode_opt : returns.dates[rs.start] + ".." + returns.dates[rs.end - 1];

    auto res = experiments::run_rolling_evaluation(returns.returns, comp.weights, rs);

    Output out(out_dir);
    out.write("backtest.csv", [&](std::ostream& os) { backtest::write_reports_csv(os, res.reports); });
    out.write("backtest_traces.csv", [&](std::ostream& os) {
        os << "t,date,return";
        for (const auto& tr : res.traces) os << ',' << to_string(tr.method);
        os << '\n';
        for (std::size_t k = 0; k < res.returns.size(); ++k) {
            os << rs.start + k << ',' << returns.dates[rs.start + k] << ',' << format_double(res.returns[k]);
            for (const auto& tr : res.traces) os << ',' << format_double(tr.var[k]);
            os << '\n';
        }
    });
    std::vector<std::string> notes;
    for (const auto& nt : res.notes) notes.push_back("note=" + nt);
    write_meta(out, "backtest.meta", cfg, notes);

    std::ostringstream s;
    s << "backtest " << rs.episode << " (" << res.returns.size() << " forecasts, alpha=" << alpha << ")\n";
    for (const auto& r : res.reports) {
        s << "  " << r.method << ": viol=" << r.viol_pct << "% LRuc p=" << r.lr.p_uc << " LRcc p=" << r.lr.p_cc
          << " loss=" << r.loss;
        if (r.dm_p) s << " DM p=" << *r.dm_p;
        s << '\n';
    }
    for (const auto& nt : res.notes) s << "note: " << nt << '\n';
    return {out.files(), s.str()};
}

CommandResult cmd_simulate(const RunConfig& cfg) {
    ConfigReader rd(cfg);
    std::string out_dir;
    check_output_dir(rd, out_dir);
    const std::string design = rd.required("design");
    const std::size_t n = rd.count("n", 1000, 1);
    const std::uint64_t seed = rd.seed("seed", 1);
    const std::size_t burn_in = rd.count("burn_in", 500, 500);
    const std::size_t m = rd.count("m", 2, 2);
    const double scale = rd.real("price_scale", 0.01, 0.0, 1.0, true, false);
    const double base = rd.real("base_price", 100.0, 0.0, 1e12);
    const std::string start_date = rd.text("start_date", "2000-01-03");
    if (!csv::is_iso_date(start_date)) rd.problem("start_date: not an ISO-8601 date");
    std::optional<mgarch::CdccParams> params;
    if (design != "factor" && !design.empty()) {
        try {
            params = mgarch::design_params(design);
        } catch (const UnsupportedError&) {
            throw;
        } catch (const Error& e) {
            rd.problem(std::string("design: ") + e.what());
        }
        if (cfg.has("m")) rd.problem("m: only used with design=factor");
    }
    rd.finish();

    Eigen::MatrixXd y;
    std::vector<std::string> meta{"seed=" + std::to_string(seed), "burn_in=" + std::to_string(burn_in),
                                  "n=" + std::to_string(n), "price_scale=" + format_double(scale)};
    if (params) {
        const auto law = mgarch::design_innovation(design);
        y = mgarch::simulate_cdcc(*params, law, n, burn_in, seed, design).returns;
        meta.push_back("model=cdcc");
        meta.push_back("innovation=" + std::string(law == mgarch::Innovation::Gaussian ? "gaussian" : "student-t7"));
        meta.push_back("param_omega=" + join_doubles(params->omega));
        meta.push_back("param_A=" + join_doubles(params->A.reshaped()));
        meta.push_back("param_B=" + join_doubles(params->B.reshaped()));
        meta.push_back("param_S=" + join_doubles(params->S.reshaped()));
        meta.push_back("param_alpha_c=" + format_double(params->alpha_c));
        meta.push_back("param_beta_c=" + format_double(params->beta_c));
    } else {
        mgarch::FactorModelParams fp;
        fp.m = m;
        y = mgarch::simulate_factor_model(fp, n, seed, burn_in);
        meta.push_back("model=factor");
        meta.push_back("m=" + std::to_string(m));
        const auto& g1 = fp.garch1;
        const auto& g2 = fp.garch2;
        meta.push_back("factor1_garch=" + format_double(g1.omega) + "," + format_double(g1.alpha) + "," + format_double(g1.beta));
        meta.push_back("factor2_garch=" + format_double(g2.omega) + "," + format_double(g2.alpha) + "," + format_double(g2.beta));
        meta.push_back("idio_sd=" + format_double(fp.idio_sd));
    }
    const auto prices = prices_from_returns(y, base, scale, start_date);

    Output out(out_dir);
    out.write("panel.csv", [&](std::ostream& os) { csv::write_prices(os, prices); });
    out.write("returns.csv", [&](std::ostream& os) {
        os << "date";
        for (const auto& a : prices.assets) os << ',' << a;
        os << '\n';
        for (Eigen::Index t = 0; t < y.rows(); ++t) {
            os << prices.dates[static_cast<std::size_t>(t) + 1];
            for (Eigen::Index j = 0; j < y.cols(); ++j) os << ',' << format_double(y(t, j));
            os << '\n';
        }
    });
    write_meta(out, "simulate.meta", cfg, meta);

    std::ostringstream s;
    s << "simulated " << y.rows() << " x " << y.cols() << " returns (" << (params ? "design " + design : "factor model")
      << ", seed " << seed << "); prices have " << prices.rows() << " rows including the base date\n";
    return {out.files(), s.str()};
}

CommandResult cmd_experiment(const RunConfig& cfg) {
    ConfigReader rd(cfg);
    std::string out_dir;
    check_output_dir(rd, out_dir);
    const std::string table = rd.required("table");
    const std::string scale = rd.text("scale", "desk");
    auto designs = rd.list("designs", {"A", "B", "C", "D", "E", "F", "G", "H"});
    if (auto one = rd.optional_text("design")) {
        if (cfg.has("designs")) rd.problem("design: give either design or designs");
        designs = {*one};
    }
    const std::uint64_t seed = rd.seed("seed", 1);
    const std::size_t workers = rd.count("workers", default_workers(), 1);
    const auto alphas = rd.reals("alphas", {0.01, 0.05});
    const bool traces = rd.flag("traces", false);
    auto n1_opt = rd.optional_text("n1");
    auto pred_opt = rd.optional_text("predictions");
    auto reps_opt = rd.optional_text("replications");
    const std::size_t m = rd.count("m", 2, 2);
    const std::size_t horizon = rd.count("horizon", scale == "full" ? 1000 : 400, 1);
    const std::size_t window = rd.count("window", 1000, 500);
    const std::size_t switch_period = rd.count("switch_period", 100, 1);
    const std::size_t seeds = rd.count("seeds", 1, 1);
    const double alpha = rd.real("alpha", 0.05, 0.0, 0.5);
    const std::size_t static_n = rd.count("n", 5000, 101);
    const auto methods = parse_methods(rd, {"naive-garch", "vhs", "spherical", "fhs"});

    if (table != "1" && table != "2" && table != "static" && !table.empty())
        rd.problem("table: expected 1, 2 or static, got '" + table + "'");
    if (scale != "desk" && scale != "full") rd.problem("scale: expected desk or full");
    for (double a : alphas)
        if (!(a > 0.0 && a < 0.5)) rd.problem("alphas: " + format_double(a) + " outside (0, 0.5)");
    std::size_t n1 = 0, predictions = 0, reps = 0;
    if (n1_opt && (!parse_count(*n1_opt, n1) || n1 < 500)) rd.problem("n1: expected an integer >= 500");
    if (pred_opt && (!parse_count(*pred_opt, predictions) || predictions == 0))
        rd.problem("predictions: expected a positive integer");
    if (reps_opt && (!parse_count(*reps_opt, reps) || reps == 0)) rd.problem("replications: expected a positive integer");
    if (table == "1")
        for (const auto& d : designs) {
            try {
                mgarch::design_params(d);
            } catch (const UnsupportedError&) {
                throw;
            } catch (const Error& e) {
                rd.problem(std::string("designs: ") + e.what());
            }
        }
    rd.finish();

    Output out(out_dir);
    std::vector<std::string> notes;
    std::ostringstream s;
    if (scale == "full") {
        notes.push_back("warning=full scale requested; expect long run times");
        s << "warning: full scale requested; expect long run times\n";
    }

    if (table == "1") {
        experiments::RETable all;
        for (const auto& d : designs) {
            auto spec = scale == "full" ? experiments::DesignSpec::full(d) : experiments::DesignSpec::desk(d);
            if (n1_opt) {
                const std::size_t pred = spec.n - spec.n1;
                spec.n1 = n1;
                spec.n = n1 + pred;
            }
            if (pred_opt) spec.n = spec.n1 + predictions;
            if (reps_opt) spec.N = reps;
            spec.alphas = alphas;
            spec.seed = seed;
            spec.workers = workers;
            spec.keep_traces = traces;
            auto t = experiments::run_design(spec);
            all.rows.insert(all.rows.end(), t.rows.begin(), t.rows.end());
            for (const auto& nt : t.notes) notes.push_back("note=" + d + ": " + nt);
            if (traces) out.write("traces_" + d + ".csv", [&](std::ostream& os) { experiments::write_traces(os, t.traces); });
        }
        out.write("table1.csv", [&](std::ostream& os) { experiments::write_re_table(os, all); });
        s << "design n1 alpha  MSE_FHS/MSE_S  MSE_VHS/MSE_S\n";
        for (const auto& r : all.rows)
            s << "  " << r.design << "  " << r.n1 << "  " << r.alpha << "  " << r.ratio_fhs << "  " << r.ratio_vhs << '\n';
    } else if (table == "2") {
        std::vector<experiments::FactorBacktestResult> results(seeds);
        parallel_for(seeds, workers, [&](std::size_t i) {
            experiments::FactorBacktestSpec fs;
            fs.m = m;
            fs.window = window;
            fs.horizon = horizon;
            fs.switch_period = switch_period;
            fs.alpha = alpha;
            fs.seed = seed + i;
            fs.methods = methods;
            results[i] = experiments::run_factor_backtest(fs);
        });
        std::vector<backtest::BacktestReport> reports;
        for (const auto& r : results) {
            reports.insert(reports.end(), r.reports.begin(), r.reports.end());
            for (const auto& nt : r.notes) notes.push_back("note=" + nt);
        }
        out.write("table2.csv", [&](std::ostream& os) { backtest::write_reports_csv(os, reports); });
        for (const auto& r : reports) {
            s << "  " << r.episode << " " << r.method << ": viol=" << r.viol_pct << "% loss=" << r.loss;
            if (r.dm_p) s << " DM p=" << *r.dm_p;
            s << '\n';
        }
    } else {
        auto b = experiments::run_static_crystallized(seed, static_n, alpha);
        out.write("static.csv", [&](std::ostream& os) { experiments::write_static_bundle(os, b); });
        const auto last = b.truth.size() - 1;
        s << "static crystallized portfolio, n=" << static_n << ": final weights "
          << join_doubles(b.weights.row(b.weights.rows() - 1)) << "; final true VaR " << b.truth[last] << ", naive "
          << b.naive[last] << ", spherical " << b.spherical[last] << ", VHS " << b.vhs[last] << '\n';
    }
    write_meta(out, "experiment.meta", cfg, notes);
    return {out.files(), s.str()};
}

int run(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
    try {
        CommandResult res;
        const auto& c = cfg.command();
        if (c == "var") res = cmd_var(cfg);
        else if (c == "backtest") res = cmd_backtest(cfg);
        else if (c == "simulate") res = cmd_simulate(cfg);
        else if (c == "experiment") res = cmd_experiment(cfg);
        else throw ValidationError("unknown command '" + c + "' (expected var, backtest, simulate or experiment)");
        out << res.summary;
        for (const auto& f : res.files) out << "wrote " << f.string() << '\n';
        return kExitOk;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return exit_code(e);
    }
}

}  // namespace vhs::cli
