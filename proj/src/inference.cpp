#include "vhs/inference.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "vhs/errors.h"
#include "vhs/stats.h"

namespace vhs::inference {

namespace {

void check_shapes(const Eigen::MatrixXd& d, std::span<const double> u) {
    if (d.cols() != 3 || static_cast<std::size_t>(d.rows()) != u.size())
        throw ShapeError("d_paths must be n x 3 with n equal to the residual count");
    if (u.empty()) throw DomainError("empty residual series");
}

// The condition number is taken on the unit-diagonal rescaling of J, so it
// does not depend on the units of omega.
Eigen::Matrix3d checked_inverse(const Eigen::Matrix3d& J) {
    const Eigen::Vector3d d = J.diagonal();
    if (!(d.minCoeff() > 0.0))
        throw RankDeficiencyError("J is singular: the GARCH parameters are not identified from this sample");
    const Eigen::Vector3d s = d.cwiseSqrt().cwiseInverse();
    const Eigen::Matrix3d C = s.asDiagonal() * J * s.asDiagonal();
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(C);
    const double lo = es.eigenvalues().minCoeff(), hi = es.eigenvalues().maxCoeff();
    if (!(lo > 0.0) || hi / lo > 1e12)
        throw RankDeficiencyError("J is singular or ill-conditioned (condition number > 1e12): "
                                  "the GARCH parameters are not identified from this sample");
    return s.asDiagonal() * C.inverse() * s.asDiagonal();
}

void symmetrize(Eigen::Matrix4d& m) {
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < i; ++j) m(i, j) = m(j, i);
}

void repair(SigmaAlpha& s) {
    symmetrize(s.full);
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> es(s.full);
    const double scale = std::max(es.eigenvalues().cwiseAbs().maxCoeff(), 1e-300);
    if (es.eigenvalues().minCoeff() < -1e-12 * scale) {
        Eigen::Vector4d ev = es.eigenvalues().cwiseMax(0.0);
        s.full = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
        symmetrize(s.full);
        s.psd_repaired = true;
        s.warnings.emplace_back("assembled covariance was not positive semidefinite; negative eigenvalues clipped to 0");
    }
    if (!(s.zeta > 0.0)) s.warnings.emplace_back("zeta is not positive");
}

double gauss(double z) { return std::exp(-0.5 * z * z); }

}  // namespace

JS11 estimate_J_S11(const Eigen::MatrixXd& d, std::span<const double> u) {
    check_shapes(d, u);
    JS11 r;
    r.J.setZero();
    r.S11.setZero();
    for (Eigen::Index t = 0; t < d.rows(); ++t) {
        Eigen::Vector3d dt = d.row(t).transpose();
        Eigen::Matrix3d o = dt * dt.transpose();
        const double w = u[static_cast<std::size_t>(t)] * u[static_cast<std::size_t>(t)] - 1.0;
        r.J += o;
        r.S11 += (w * w) * o;
    }
    const double n = static_cast<double>(d.rows());
    r.J /= n;
    r.S11 /= n;
    checked_inverse(r.J);
    return r;
}

std::size_t default_bandwidth(std::size_t n) {
    auto b = static_cast<std::size_t>(std::floor(1.1447 * std::cbrt(static_cast<double>(n))));
    return std::min(b, n / 4);
}

double hac_variance(std::span<const double> x, std::size_t b) {
    const std::size_t n = x.size();
    if (n == 0) throw DomainError("hac_variance: empty series");
    if (b >= n) throw DomainError("HAC bandwidth must be smaller than the sample size");
    const double dn = static_cast<double>(n);
    double v = 0.0;
    for (std::size_t t = 0; t < n; ++t) v += x[t] * x[t];
    v /= dn;
    for (std::size_t h = 1; h <= b; ++h) {
        double g = 0.0;
        for (std::size_t t = h; t < n; ++t) g += x[t] * x[t - h];
        v += 2.0 * (1.0 - static_cast<double>(h) / static_cast<double>(b + 1)) * g / dn;
    }
    return v;
}

LongRun hac_long_run(std::span<const double> ind, const Eigen::MatrixXd& cross, std::optional<std::size_t> bandwidth) {
    const std::size_t n = ind.size();
    if (cross.cols() != 3 || static_cast<std::size_t>(cross.rows()) != n)
        throw ShapeError("cross series must be n x 3 with n equal to the indicator count");
    LongRun r;
    r.bandwidth = bandwidth ? *bandwidth : default_bandwidth(n);
    r.S22 = hac_variance(ind, r.bandwidth);
    const double dn = static_cast<double>(n);
    for (std::size_t h = 0; h <= r.bandwidth; ++h) {
        Eigen::Vector3d g = Eigen::Vector3d::Zero();
        for (std::size_t t = 0; t + h < n; ++t) g += cross.row(static_cast<Eigen::Index>(t)).transpose() * ind[t + h];
        r.S12 += (1.0 - static_cast<double>(h) / static_cast<double>(r.bandwidth + 1)) * g / dn;
    }
    return r;
}

double default_psi_bandwidth(std::span<const double> u) {
    const double s = std::sqrt(stats::variance(u));
    return 1.06 * s * std::pow(static_cast<double>(u.size()), -0.2);
}

PsiEstimate psi_indicator(std::span<const double> u, const Eigen::MatrixXd& d, double xi, double h) {
    check_shapes(d, u);
    if (!(h > 0.0)) throw DomainError("psi_indicator: bandwidth must be positive");
    PsiEstimate r;
    r.h1 = r.h2 = h;
    for (std::size_t t = 0; t < u.size(); ++t)
        if (u[t] >= xi && u[t] < xi + h) {
            r.psi += d.row(static_cast<Eigen::Index>(t)).transpose();
            ++r.used;
        }
    const double nh = static_cast<double>(u.size()) * h;
    r.psi /= nh;
    r.f_bar = static_cast<double>(r.used) / nh;
    r.empty_window = r.used == 0;
    return r;
}

PsiEstimate psi_kernel(std::span<const double> u, const Eigen::MatrixXd& d, double xi, double h1, double h2,
                       KdeMode mode) {
    check_shapes(d, u);
    if (!(h1 > 0.0) || !(h2 > 0.0)) throw DomainError("psi_kernel: bandwidths must be positive");
    const std::size_t n = u.size();
    if (n < 3) throw DomainError("psi_kernel needs at least three residuals");
    PsiEstimate r;
    r.h1 = h1;
    r.h2 = h2;

    // pairs s = 1..n-1: position u_{s-1}, weight K_{h1}(xi - u_s)
    const std::size_t m = n - 1;
    std::vector<double> z(m), w(m);
    for (std::size_t s = 1; s < n; ++s) {
        z[s - 1] = u[s - 1];
        w[s - 1] = gauss((xi - u[s]) / h1) / (h1 * std::sqrt(2.0 * M_PI));
    }
    std::vector<double> num(m, 0.0), den(m, 0.0);
    if (mode == KdeMode::Auto) mode = n > 4000 ? KdeMode::Binned : KdeMode::Exact;

    if (mode == KdeMode::Exact) {
        std::vector<std::size_t> order(m);
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(), [&](auto a, auto b) { return z[a] < z[b]; });
        std::vector<double> zs(m), ws(m);
        for (std::size_t i = 0; i < m; ++i) {
            zs[i] = z[order[i]];
            ws[i] = w[order[i]];
        }
        const double reach = 8.0 * h2;  // exp(-32) is below double resolution relative to the centre
        for (std::size_t t = 0; t < m; ++t) {
            auto lo = std::lower_bound(zs.begin(), zs.end(), z[t] - reach) - zs.begin();
            auto hi = std::upper_bound(zs.begin(), zs.end(), z[t] + reach) - zs.begin();
            double a = 0.0, b = 0.0;
            for (auto s = lo; s < hi; ++s) {
                const double k = gauss((z[t] - zs[static_cast<std::size_t>(s)]) / h2);
                a += k * ws[static_cast<std::size_t>(s)];
                b += k;
            }
            num[t] = a;
            den[t] = b;
        }
    } else {
        const double zmin = *std::min_element(z.begin(), z.end());
        const double zmax = *std::max_element(z.begin(), z.end());
        double delta = h2 / 20.0;
        if ((zmax - zmin) / delta > 4e6) delta = (zmax - zmin) / 4e6;
        const auto g = static_cast<std::size_t>((zmax - zmin) / delta) + 2;
        std::vector<double> c0(g, 0.0), c1(g, 0.0);
        for (std::size_t s = 0; s < m; ++s) {
            const double pos = (z[s] - zmin) / delta;
            const auto i = std::min(static_cast<std::size_t>(pos), g - 2);
            const double fr = pos - static_cast<double>(i);
            c0[i] += 1.0 - fr;
            c0[i + 1] += fr;
            c1[i] += (1.0 - fr) * w[s];
            c1[i + 1] += fr * w[s];
        }
        const auto L = static_cast<std::ptrdiff_t>(std::ceil(8.0 * h2 / delta));
        std::vector<double> kern(static_cast<std::size_t>(L) + 1);
        for (std::ptrdiff_t k = 0; k <= L; ++k) kern[static_cast<std::size_t>(k)] = gauss(static_cast<double>(k) * delta / h2);
        std::vector<double> s0(g, 0.0), s1(g, 0.0);
        const auto G = static_cast<std::ptrdiff_t>(g);
        for (std::ptrdiff_t j = 0; j < G; ++j) {
            double a = 0.0, b = 0.0;
            for (std::ptrdiff_t k = std::max<std::ptrdiff_t>(-L, -j); k <= std::min<std::ptrdiff_t>(L, G - 1 - j); ++k) {
                const double kk = kern[static_cast<std::size_t>(std::abs(k))];
                a += kk * c1[static_cast<std::size_t>(j + k)];
                b += kk * c0[static_cast<std::size_t>(j + k)];
            }
            s1[static_cast<std::size_t>(j)] = a;
            s0[static_cast<std::size_t>(j)] = b;
        }
        for (std::size_t t = 0; t < m; ++t) {
            const double pos = (z[t] - zmin) / delta;
            const auto i = std::min(static_cast<std::size_t>(pos), g - 2);
            const double fr = pos - static_cast<double>(i);
            num[t] = (1.0 - fr) * s1[i] + fr * s1[i + 1];
            den[t] = (1.0 - fr) * s0[i] + fr * s0[i + 1];
        }
    }

    double fsum = 0.0;
    for (std::size_t t = 0; t < m; ++t) {
        if (!(den[t] > 1e-300)) {
            ++r.skipped;
            continue;
        }
        const double f = num[t] / den[t];
        fsum += f;
        r.psi += f * d.row(static_cast<Eigen::Index>(t + 1)).transpose();
        ++r.used;
    }
    if (r.used > 0) {
        r.psi /= static_cast<double>(r.used);
        r.f_bar = fsum / static_cast<double>(r.used);
    }
    return r;
}

SigmaAlpha assemble_sigma_alpha(const Eigen::Matrix3d& J, const Eigen::Matrix3d& S11, const Eigen::Vector3d& S12,
                                double S22, const Eigen::Vector3d& Psi, double f_bar, double xi) {
    if (!(f_bar > 0.0)) throw DomainError("assemble_sigma_alpha: f_bar must be positive");
    const Eigen::Matrix3d Ji = checked_inverse(J);
    SigmaAlpha s;
    s.J = J;
    s.S11 = S11;
    s.S12 = S12;
    s.S22 = S22;
    s.Psi = Psi;
    s.f_bar = f_bar;
    s.xi_alpha = xi;
    const Eigen::Matrix3d M = Ji * S11 * Ji;
    s.Lambda = (xi / (4.0 * f_bar)) * M * Psi + (1.0 / (2.0 * f_bar)) * Ji * S12;
    s.zeta = (0.25 * xi * xi * Psi.dot(M * Psi) + xi * Psi.dot(Ji * S12) + S22) / (f_bar * f_bar);
    s.full.topLeftCorner<3, 3>() = 0.25 * M;
    s.full.topRightCorner<3, 1>() = s.Lambda;
    s.full.bottomLeftCorner<1, 3>() = s.Lambda.transpose();
    s.full(3, 3) = s.zeta;
    repair(s);
    return s;
}

SigmaAlpha sigma_alpha_iid(const Eigen::Matrix3d& J, const Eigen::Vector3d& Omega, double kappa4, double f_xi,
                           double p_alpha, double alpha, double xi) {
    if (!(f_xi > 0.0)) throw DomainError("sigma_alpha_iid: f(xi) must be positive");
    const Eigen::Matrix3d Ji = checked_inverse(J);
    SigmaAlpha s;
    s.J = J;
    s.S11 = (kappa4 - 1.0) * J;
    s.S12 = p_alpha * Omega;
    s.S22 = alpha * (1.0 - alpha);
    s.Psi = f_xi * Omega;
    s.f_bar = f_xi;
    s.xi_alpha = xi;
    s.Lambda = (xi * (kappa4 - 1.0) / 4.0 + p_alpha / (2.0 * f_xi)) * Ji * Omega;
    s.zeta = (kappa4 - 1.0) * xi * xi / 4.0 + xi * p_alpha / f_xi + alpha * (1.0 - alpha) / (f_xi * f_xi);
    s.full.topLeftCorner<3, 3>() = 0.25 * (kappa4 - 1.0) * Ji;
    s.full.topRightCorner<3, 1>() = s.Lambda;
    s.full.bottomLeftCorner<1, 3>() = s.Lambda.transpose();
    s.full(3, 3) = s.zeta;
    repair(s);
    return s;
}

SigmaAlpha estimate_sigma_alpha(const garch::GarchFit& fit, double alpha, const SigmaOptions& opts) {
    const auto& u = fit.residuals;
    const auto& D = fit.d_paths;
    const std::size_t n = u.size();
    const double xi = garch::residual_quantile(u, alpha).xi;
    auto js = estimate_J_S11(D, u);

    if (opts.iid) {
        Eigen::Vector3d omega = D.colwise().mean().transpose();
        double k4 = 0.0, p = 0.0, ind = 0.0;
        for (double v : u) {
            k4 += v * v * v * v;
            if (v < xi) {
                p += v * v;
                ind += 1.0;
            }
        }
        const double dn = static_cast<double>(n);
        k4 /= dn;
        p = (p - ind) / dn;
        const double h = default_psi_bandwidth(u);
        double f = 0.0;
        for (double v : u) f += gauss((xi - v) / h);
        f /= dn * h * std::sqrt(2.0 * M_PI);
        return sigma_alpha_iid(js.J, omega, k4, f, p, alpha, xi);
    }

    std::vector<double> ind(n);
    Eigen::MatrixXd cross(static_cast<Eigen::Index>(n), 3);
    for (std::size_t t = 0; t < n; ++t) {
        ind[t] = u[t] < xi ? 1.0 : 0.0;
        cross.row(static_cast<Eigen::Index>(t)) = (u[t] * u[t] - 1.0) * D.row(static_cast<Eigen::Index>(t));
    }
    const double ibar = stats::mean(ind);
    for (double& v : ind) v -= ibar;
    cross.rowwise() -= cross.colwise().mean();
    auto lr = hac_long_run(ind, cross, opts.bandwidth);

    const double h = default_psi_bandwidth(u);
    auto psi = opts.psi == PsiMethod::Kernel ? psi_kernel(u, D, xi, h, h, opts.kde) : psi_indicator(u, D, xi, h);
    auto s = assemble_sigma_alpha(js.J, js.S11, lr.S12, lr.S22, psi.psi, psi.f_bar, xi);
    if (psi.empty_window) s.warnings.emplace_back("indicator window around xi is empty; Psi set to zero");
    if (psi.skipped > 0)
        s.warnings.emplace_back("kernel denominator underflow at " + std::to_string(psi.skipped) + " dates (skipped)");
    return s;
}

VarCI var_confidence_interval(const garch::GarchFit& fit, const SigmaAlpha& sigma, std::size_t t0, double alpha,
                              double alpha0) {
    if (!(alpha0 > 0.0 && alpha0 < 1.0)) throw DomainError("alpha0 must lie in (0,1)");
    auto fc = garch::one_step_ahead(fit);
    const double s = fc.sigma();
    const double xi = sigma.xi_alpha;
    VarCI ci;
    ci.point.method = Method::VHS;
    ci.point.t0 = t0;
    ci.point.alpha = alpha;
    ci.point.sigma_t0 = s;
    ci.point.xi = xi;
    ci.point.value = -(s * xi + fit.mean_removed);
    ci.point.converged = fit.converged;
    ci.level = 1.0 - alpha0;
    ci.delta.head<3>() = xi * fc.dsigma();
    ci.delta[3] = -s;
    double q = ci.delta.dot(sigma.full * ci.delta);
    if (q < 0.0) {
        q = 0.0;
        ci.clamped = true;
    }
    const double half = stats::normal_quantile(1.0 - alpha0 / 2.0) * std::sqrt(q / static_cast<double>(fit.residuals.size()));
    ci.lower = ci.point.value - half;
    ci.upper = ci.point.value + half;
    return ci;
}

}  // namespace vhs::inference
