#include "vhs/mgarch.h"

#include <cmath>
#include <limits>
#include <optional>
#include <tuple>
#include <random>
#include <sstream>

#include "vhs/errors.h"
#include "vhs/optimize.h"
#include "vhs/stats.h"

namespace vhs::mgarch {

namespace {

Eigen::MatrixXd correlation_from_q(const Eigen::MatrixXd& Q) {
    const auto m = Q.rows();
    Eigen::MatrixXd R(m, m);
    for (Eigen::Index i = 0; i < m; ++i)
        for (Eigen::Index j = 0; j < m; ++j) R(i, j) = i == j ? 1.0 : Q(i, j) / std::sqrt(Q(i, i) * Q(j, j));
    return R;
}

// Q_t from Q_{t-1} and eta*_{t-1}.
Eigen::MatrixXd q_update(const CdccParams& p, const Eigen::MatrixXd& Qprev, const Eigen::VectorXd& eta_star) {
    Eigen::VectorXd qt = Qprev.diagonal().cwiseSqrt().cwiseProduct(eta_star);
    return (1.0 - p.alpha_c - p.beta_c) * p.S + p.alpha_c * qt * qt.transpose() + p.beta_c * Qprev;
}

std::string design_key(std::string id) {
    for (auto& c : id) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    return id;
}

struct EquationFit {
    double omega = 0.0;
    Eigen::VectorXd a;
    double b = 0.0;
    double h0 = 0.0;
    Eigen::VectorXd eta;
    bool converged = false;
};

// Gaussian QML of one variance equation on columns rescaled to unit mean
// square, x = (omega, a_1..a_m, b). Returns the mean criterion; grad and the
// outer product of the scores are optional.
double equation_criterion(const Eigen::MatrixXd& e2, Eigen::Index i, const Eigen::VectorXd& x, Eigen::VectorXd* grad,
                          Eigen::MatrixXd* outer) {
    const auto n = e2.rows(), m = e2.cols(), d = m + 2;
    double h = 1.0, f = 0.0;
    Eigen::VectorXd dh = Eigen::VectorXd::Zero(d), z(d);
    if (grad) grad->setZero(d);
    if (outer) outer->setZero(d, d);
    for (Eigen::Index t = 0; t < n; ++t) {
        if (t > 0) {
            z[0] = 1.0;
            z.segment(1, m) = e2.row(t - 1).transpose();
            z[d - 1] = h;
            h = x[0] + x.segment(1, m).dot(e2.row(t - 1).transpose()) + x[d - 1] * h;
            dh = z + x[d - 1] * dh;
        }
        if (!(h > 0.0) || !std::isfinite(h)) return std::numeric_limits<double>::infinity();
        f += std::log(h) + e2(t, i) / h;
        if (grad) *grad += (1.0 - e2(t, i) / h) / h * dh;
        if (outer) *outer += dh * dh.transpose() / (h * h);
    }
    const double nn = static_cast<double>(n);
    if (grad) *grad /= nn;
    if (outer) *outer /= nn;
    return f / nn;
}

EquationFit fit_equation(const Eigen::MatrixXd& y, Eigen::Index i, const garch::FitOptions& opts) {
    const auto n = y.rows(), m = y.cols(), d = m + 2;
    Eigen::VectorXd s2 = y.array().square().colwise().mean().transpose();
    for (Eigen::Index j = 0; j < m; ++j)
        if (!(s2[j] > 0.0)) throw DomainError("fit_cdcc_bivariate: a return column is identically zero");
    Eigen::MatrixXd e2 = y.array().square().rowwise() / s2.transpose().array();

    Eigen::VectorXd lo = Eigen::VectorXd::Zero(d), hi = Eigen::VectorXd::Constant(d, 5.0);
    lo[0] = 1e-8;
    hi[0] = 10.0;
    hi[d - 1] = 0.9999;
    opt::Box box{lo, hi};
    auto f = [&](const Eigen::VectorXd& x) { return equation_criterion(e2, i, x, nullptr, nullptr); };
    auto fg = [&](const Eigen::VectorXd& x, Eigen::VectorXd& g) { return equation_criterion(e2, i, x, &g, nullptr); };

    opt::Result best;
    bool have = false;
    for (auto [own, cross, b] : {std::tuple{0.05, 0.01, 0.90}, std::tuple{0.10, 0.05, 0.80}, std::tuple{0.30, 0.10, 0.40}}) {
        Eigen::VectorXd x0 = Eigen::VectorXd::Constant(d, cross);
        x0[1 + i] = own;
        x0[d - 1] = b;
        x0[0] = std::max(1.0 - own - cross * static_cast<double>(m - 1) - b, 0.01);
        auto nm = opt::nelder_mead(f, x0, box);
        Eigen::VectorXd g;
        Eigen::MatrixXd outer;
        equation_criterion(e2, i, nm.x, &g, &outer);
        std::optional<Eigen::MatrixXd> h0;
        Eigen::LDLT<Eigen::MatrixXd> ldlt(outer);
        if (ldlt.info() == Eigen::Success && ldlt.isPositive() && ldlt.rcond() > 1e-12)
            h0 = Eigen::MatrixXd(ldlt.solve(Eigen::MatrixXd::Identity(d, d)));
        opt::QuasiNewtonOptions qo;
        qo.g_tol = opts.g_tol;
        qo.max_iterations = opts.max_iterations;
        auto qn = opt::projected_bfgs(fg, nm.x, box, h0, qo);
        if (!have || qn.f < best.f - 1e-10 * (1.0 + std::abs(best.f))) best = qn;
        have = true;
    }

    EquationFit out;
    const Eigen::VectorXd& x = best.x;
    out.omega = x[0] * s2[i];
    out.a = x.segment(1, m).cwiseProduct(Eigen::VectorXd::Constant(m, s2[i]).cwiseQuotient(s2));
    out.b = x[d - 1];
    out.h0 = s2[i];
    out.converged = best.converged;
    out.eta.resize(n);
    double h = out.h0;
    for (Eigen::Index t = 0; t < n; ++t) {
        if (t > 0) h = out.omega + out.a.dot(y.row(t - 1).array().square().matrix().transpose()) + out.b * h;
        out.eta[t] = y(t, i) / std::sqrt(h);
    }
    return out;
}

}  // namespace

void CdccParams::validate() const {
    const auto m = omega.size();
    if (m < 1 || A.rows() != m || A.cols() != m || B.rows() != m || B.cols() != m || S.rows() != m || S.cols() != m)
        throw ShapeError("cDCC parameter dimensions are inconsistent");
    if ((omega.array() <= 0.0).any()) throw DomainError("cDCC omega must be positive");
    if ((A.array() < 0.0).any()) throw DomainError("cDCC A must be nonnegative");
    for (Eigen::Index i = 0; i < m; ++i)
        for (Eigen::Index j = 0; j < m; ++j)
            if ((i != j && B(i, j) != 0.0) || B(i, j) < 0.0) throw DomainError("cDCC B must be diagonal and nonnegative");
    if ((S - S.transpose()).cwiseAbs().maxCoeff() > 1e-12) throw DomainError("cDCC S must be symmetric");
    if ((S.diagonal().array() - 1.0).abs().maxCoeff() > 1e-12) throw DomainError("cDCC S must have unit diagonal");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S);
    if (es.eigenvalues().minCoeff() < -1e-12) throw DomainError("cDCC S must be positive semidefinite");
    if (alpha_c < 0.0 || beta_c < 0.0 || alpha_c + beta_c >= 1.0)
        throw DomainError("cDCC needs alpha_c, beta_c >= 0 and alpha_c + beta_c < 1");
}

double innovation_var(Innovation law, double alpha) {
    return law == Innovation::Gaussian ? -stats::normal_quantile(alpha) : -stats::std_student_quantile(alpha, kStudentDof);
}

Eigen::MatrixXd SigmaPath::sigma(std::size_t t) const {
    return D.row(static_cast<Eigen::Index>(t)).asDiagonal() * sym_sqrt(R[t]);
}

Eigen::MatrixXd SigmaPath::covariance(std::size_t t) const {
    auto d = D.row(static_cast<Eigen::Index>(t)).asDiagonal();
    return d * R[t] * d;
}

CdccParams design_params(const std::string& raw) {
    const auto id = design_key(raw);
    if (id.size() >= 2 && id[0] >= 'A' && id[0] <= 'H' && (id.substr(1) == "*" || id.substr(1) == "STAR"))
        throw UnsupportedError("design " + raw + " uses AEPD innovations, which are not supported");
    if (id.size() != 1 || id[0] < 'A' || id[0] > 'H')
        throw ValidationError("unknown design '" + raw + "' (expected A..H)");
    CdccParams p;
    p.S = Eigen::Matrix2d::Identity();
    p.B = Eigen::Matrix2d::Zero();
    const bool first_block = id[0] <= 'D';
    if (first_block) {
        p.omega = Eigen::Vector2d(1e-6, 4e-6);
        p.A = (Eigen::Matrix2d() << 0.01, 0.01, 0.01, 0.07).finished();
        p.B(1, 1) = 0.92;
    } else {
        p.omega = Eigen::Vector2d(1e-5, 1e-5);
        p.A = (Eigen::Matrix2d() << 0.07, 0.0, 0.0, 0.07).finished();
        p.B(0, 0) = p.B(1, 1) = 0.92;
    }
    const bool dynamic = id == "A" || id == "B" || id == "E" || id == "F";
    if (dynamic) {
        p.S(0, 1) = p.S(1, 0) = 0.7;
        p.alpha_c = 0.04;
        p.beta_c = 0.95;
    }
    return p;
}

Innovation design_innovation(const std::string& raw) {
    design_params(raw);
    const auto id = design_key(raw);
    return (id == "B" || id == "D" || id == "F" || id == "H") ? Innovation::StudentT7 : Innovation::Gaussian;
}

CdccSample simulate_cdcc(const CdccParams& p, Innovation law, std::size_t n, std::size_t burn_in, std::uint64_t seed,
                         const std::string& label) {
    p.validate();
    if (burn_in < 500) throw DomainError("simulate_cdcc: burn-in must be at least 500");
    const auto m = static_cast<Eigen::Index>(p.dim());
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    std::chi_squared_distribution<double> chi2(kStudentDof);

    const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(m, m);
    Eigen::VectorXd h = (I - p.A - p.B).fullPivLu().solve(p.omega);
    if ((h.array() <= 0.0).any() || !h.allFinite())
        throw DivergenceError("design " + label + ": no positive unconditional variance (explosive recursion)");
    Eigen::MatrixXd Q = p.S;
    Eigen::VectorXd y_prev = Eigen::VectorXd::Zero(m), eta_star_prev = Eigen::VectorXd::Zero(m);

    CdccSample out;
    out.returns.resize(static_cast<Eigen::Index>(n), m);
    out.truth.D.resize(static_cast<Eigen::Index>(n), m);
    out.truth.R.reserve(n);
    out.truth.Q.reserve(n);
    const double t_scale = std::sqrt(kStudentDof - 2.0);
    for (std::size_t t = 0; t < burn_in + n; ++t) {
        if (t > 0) {
            h = p.omega + p.A * y_prev.cwiseProduct(y_prev) + p.B * h;
            Q = q_update(p, Q, eta_star_prev);
        }
        if (!h.allFinite() || h.maxCoeff() > 1e150 || !Q.allFinite()) {
            std::ostringstream os;
            os << "design " << label << ": conditional variance overflow at step " << t;
            throw DivergenceError(os.str());
        }
        Eigen::MatrixXd R = correlation_from_q(Q);
        Eigen::VectorXd eta(m);
        for (Eigen::Index i = 0; i < m; ++i) eta[i] = normal(rng);
        if (law == Innovation::StudentT7) eta *= t_scale / std::sqrt(chi2(rng));
        Eigen::VectorXd d = h.cwiseSqrt();
        eta_star_prev = sym_sqrt(R) * eta;
        y_prev = d.cwiseProduct(eta_star_prev);
        if (t >= burn_in) {
            const auto k = static_cast<Eigen::Index>(t - burn_in);
            out.returns.row(k) = y_prev.transpose();
            out.truth.D.row(k) = d.transpose();
            out.truth.R.push_back(R);
            out.truth.Q.push_back(Q);
        }
    }
    return out;
}

SigmaPath filter_cdcc(const CdccParams& p, const Eigen::MatrixXd& y, const Eigen::VectorXd& h0) {
    const auto m = y.cols(), n = y.rows();
    if (static_cast<std::size_t>(m) != p.dim() || h0.size() != m) throw ShapeError("filter_cdcc: dimension mismatch");
    SigmaPath path;
    path.D.resize(n + 1, m);
    path.R.reserve(static_cast<std::size_t>(n + 1));
    path.Q.reserve(static_cast<std::size_t>(n + 1));
    Eigen::VectorXd h = h0;
    Eigen::MatrixXd Q = p.S;
    for (Eigen::Index t = 0; t <= n; ++t) {
        if (t > 0) {
            Eigen::VectorXd yp = y.row(t - 1).transpose();
            Eigen::VectorXd eta_star = yp.cwiseQuotient(path.D.row(t - 1).transpose());
            h = p.omega + p.A * yp.cwiseProduct(yp) + p.B * h;
            Q = q_update(p, Q, eta_star);
        }
        path.D.row(t) = h.cwiseSqrt().transpose();
        path.R.push_back(correlation_from_q(Q));
        path.Q.push_back(Q);
    }
    return path;
}

CdccFit fit_cdcc_bivariate(const Eigen::MatrixXd& y, const garch::FitOptions& margin_opts, bool require_convergence) {
    if (y.cols() != 2) throw UnsupportedError("cDCC estimation is implemented for m = 2 only");
    const auto n = y.rows();
    if (n < 500) throw DomainError("fit_cdcc_bivariate needs at least 500 observations");
    CdccFit fit;
    fit.params.omega.resize(2);
    fit.params.A = Eigen::Matrix2d::Zero();
    fit.params.B = Eigen::Matrix2d::Zero();
    fit.h0.resize(2);
    Eigen::MatrixXd eta_star(n, 2);
    for (Eigen::Index i = 0; i < 2; ++i) {
        auto eq = fit_equation(y, i, margin_opts);
        if (!eq.converged && require_convergence)
            throw ConvergenceError("cDCC margin " + std::to_string(i + 1) + ": variance equation fit did not converge");
        fit.params.omega[i] = eq.omega;
        fit.params.A.row(i) = eq.a.transpose();
        fit.params.B(i, i) = eq.b;
        fit.h0[i] = eq.h0;
        eta_star.col(i) = eq.eta;
        fit.margin_converged.push_back(eq.converged);
    }

    Eigen::Matrix2d C = (eta_star.transpose() * eta_star) / static_cast<double>(n);
    double rho = C(0, 1) / std::sqrt(C(0, 0) * C(1, 1));
    if (std::abs(rho) > 0.9999) {
        rho = std::copysign(0.9999, rho);
        fit.s_clipped = true;
    }
    fit.params.S = (Eigen::Matrix2d() << 1.0, rho, rho, 1.0).finished();

    auto objective = [&](const Eigen::VectorXd& x) {
        const double a = x[0], b = x[1];
        if (a + b >= 0.9999) return std::numeric_limits<double>::infinity();
        const double c = 1.0 - a - b;
        double q11 = 1.0, q22 = 1.0, q12 = rho, f = 0.0;
        for (Eigen::Index t = 0; t < n; ++t) {
            const double e1 = eta_star(t, 0), e2 = eta_star(t, 1);
            const double r = q12 / std::sqrt(q11 * q22);
            const double one = 1.0 - r * r;
            f += std::log(one) + (e1 * e1 + e2 * e2 - 2.0 * r * e1 * e2) / one;
            const double x1 = std::sqrt(q11) * e1, x2 = std::sqrt(q22) * e2;
            q11 = c + a * x1 * x1 + b * q11;
            q22 = c + a * x2 * x2 + b * q22;
            q12 = c * rho + a * x1 * x2 + b * q12;
        }
        return f / static_cast<double>(n);
    };
    opt::Box box{Eigen::Vector2d(0.0, 0.0), Eigen::Vector2d(0.5, 0.9989)};
    opt::SimplexOptions so;
    so.max_evaluations = 300;
    so.f_tol = 1e-12;
    opt::Result best;
    bool have = false;
    for (auto [a, b] : {std::pair{0.05, 0.90}, std::pair{0.02, 0.97}, std::pair{0.10, 0.50}}) {
        auto r = opt::nelder_mead(objective, Eigen::Vector2d(a, b), box, so);
        if (!have || r.f < best.f) {
            best = r;
            have = true;
        }
    }
    fit.params.alpha_c = best.x[0];
    fit.params.beta_c = best.x[1];
    fit.correlation_objective = best.f;
    fit.converged = best.converged && fit.margin_converged[0] && fit.margin_converged[1];

    fit.path = filter_cdcc(fit.params, y, fit.h0);
    fit.residuals.resize(n, 2);
    for (Eigen::Index t = 0; t < n; ++t) {
        Eigen::Matrix2d Rs = sym_sqrt(fit.path.R[static_cast<std::size_t>(t)]);
        Eigen::Vector2d z = y.row(t).transpose().cwiseQuotient(fit.path.D.row(t).transpose());
        fit.residuals.row(t) = (Rs.inverse() * z).transpose();
    }
    return fit;
}

Eigen::MatrixXd sym_sqrt(const Eigen::MatrixXd& M) {
    if (M.rows() == 2 && M.cols() == 2) {
        const double det = std::max(M(0, 0) * M(1, 1) - M(0, 1) * M(1, 0), 0.0);
        const double s = std::sqrt(det);
        const double t = std::sqrt(M(0, 0) + M(1, 1) + 2.0 * s);
        if (!(t > 0.0)) return Eigen::MatrixXd::Zero(2, 2);
        Eigen::MatrixXd r = M;
        r(0, 0) += s;
        r(1, 1) += s;
        return r / t;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M);
    Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

namespace {

void check_rank(const Eigen::MatrixXd& sigma) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(sigma);
    const auto& sv = svd.singularValues();
    if (sv.size() == 0 || !(sv[sv.size() - 1] > 1e-14 * sv[0])) throw RankDeficiencyError("Sigma_t is rank deficient");
}

}  // namespace

VarEstimate spherical_var(const Eigen::MatrixXd& sigma_t, const Eigen::VectorXd& a, const Eigen::MatrixXd& pool,
                          double alpha) {
    if (!(alpha > 0.0 && alpha < 0.5)) throw DomainError("spherical_var: alpha must lie in (0, 0.5)");
    if (sigma_t.rows() != a.size() || sigma_t.cols() != pool.cols()) throw ShapeError("spherical_var: dimension mismatch");
    check_rank(sigma_t);
    std::vector<double> comps;
    comps.reserve(static_cast<std::size_t>(pool.size()));
    for (Eigen::Index i = 0; i < pool.rows(); ++i)
        for (Eigen::Index j = 0; j < pool.cols(); ++j) comps.push_back(std::abs(pool(i, j)));
    VarEstimate v;
    v.method = Method::Spherical;
    v.alpha = alpha;
    v.xi = stats::order_statistic(comps, stats::order_rank(comps.size(), 1.0 - 2.0 * alpha));
    v.sigma_t0 = (sigma_t.transpose() * a).norm();
    v.value = v.sigma_t0 * v.xi;
    return v;
}

VarEstimate fhs_var(const Eigen::MatrixXd& sigma_t, const Eigen::VectorXd& mean, const Eigen::VectorXd& a,
                    const Eigen::MatrixXd& pool, double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("fhs_var: alpha must lie in (0,1)");
    if (sigma_t.rows() != a.size() || sigma_t.cols() != pool.cols() || mean.size() != a.size())
        throw ShapeError("fhs_var: dimension mismatch");
    if (static_cast<double>(pool.rows()) * alpha < 1.0 - 1e-9) throw DomainError("fhs_var: pool smaller than 1/alpha");
    Eigen::VectorXd w = sigma_t.transpose() * a;
    Eigen::VectorXd scen = (pool * w).array() + a.dot(mean);
    VarEstimate v;
    v.method = Method::FHS;
    v.alpha = alpha;
    v.sigma_t0 = w.norm();
    v.xi = stats::order_statistic(std::span<const double>(scen.data(), static_cast<std::size_t>(scen.size())),
                                  stats::order_rank(static_cast<std::size_t>(scen.size()), alpha));
    v.value = -v.xi;
    return v;
}

Eigen::VectorXd min_variance_composition(const Eigen::MatrixXd& sigma_t) {
    return min_variance_weights(sigma_t * sigma_t.transpose());
}

Eigen::MatrixXd simulate_factor_model(const FactorModelParams& p, std::size_t n, std::uint64_t seed, std::size_t burn_in) {
    if (p.m < 2) throw DomainError("factor model needs m >= 2");
    if (!(p.idio_sd > 0.0)) throw DomainError("factor model idiosyncratic sd must be positive");
    p.garch1.validate();
    p.garch2.validate();
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    auto uncond = [](const garch::GarchParams& g) {
        const double c = 1.0 - g.alpha - g.beta;
        return c > 0.0 ? g.omega / c : g.omega;
    };
    double s1 = uncond(p.garch1), s2 = uncond(p.garch2), f1 = 0.0, f2 = 0.0;
    const auto m = static_cast<Eigen::Index>(p.m);
    Eigen::MatrixXd y(static_cast<Eigen::Index>(n), m);
    for (std::size_t t = 0; t < burn_in + n; ++t) {
        if (t > 0) {
            s1 = p.garch1.omega + p.garch1.alpha * f1 * f1 + p.garch1.beta * s1;
            s2 = p.garch2.omega + p.garch2.alpha * f2 * f2 + p.garch2.beta * s2;
        }
        f1 = std::sqrt(s1) * normal(rng);
        f2 = std::sqrt(s2) * normal(rng);
        for (Eigen::Index j = 0; j < m; ++j) {
            const double e = p.idio_sd * normal(rng);
            if (t >= burn_in) y(static_cast<Eigen::Index>(t - burn_in), j) = (j % 2 == 0 ? f1 : f2) + e;
        }
    }
    return y;
}

}  // namespace vhs::mgarch
