#include "vhs/optimize.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

namespace vhs::opt {

namespace {

bool at_lower(double x, double lo) { return x <= lo + 1e-14 * (1.0 + std::abs(lo)); }
bool at_upper(double x, double hi) { return x >= hi - 1e-14 * (1.0 + std::abs(hi)); }

double safe(double v) { return std::isfinite(v) ? v : std::numeric_limits<double>::infinity(); }

}  // namespace

double projected_gradient_norm(const Eigen::VectorXd& x, const Eigen::VectorXd& g, const Box& box) {
    double norm = 0.0;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        double gi = g[i];
        if (at_lower(x[i], box.lower[i]) && gi > 0) gi = 0;
        if (at_upper(x[i], box.upper[i]) && gi < 0) gi = 0;
        norm = std::max(norm, std::abs(gi));
    }
    return norm;
}

Result nelder_mead(const Objective& f, const Eigen::VectorXd& x0, const Box& box,
                   const SimplexOptions& opts) {
    const auto d = x0.size();
    std::vector<Eigen::VectorXd> pts;
    std::vector<double> vals;
    int evals = 0;
    auto eval = [&](const Eigen::VectorXd& x) {
        ++evals;
        return safe(f(x));
    };

    pts.push_back(box.project(x0));
    for (Eigen::Index i = 0; i < d; ++i) {
        Eigen::VectorXd p = pts[0];
        double step = opts.step_fraction * std::max(std::abs(p[i]), 1e-4);
        // step inward if the forward move would hit the upper bound
        if (p[i] + step > box.upper[i]) step = -step;
        p[i] += step;
        pts.push_back(box.project(p));
    }
    for (const auto& p : pts) vals.push_back(eval(p));

    std::vector<std::size_t> idx(pts.size());
    int iter = 0;
    bool converged = false;
    while (evals < opts.max_evaluations) {
        std::iota(idx.begin(), idx.end(), 0);
        std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return vals[a] < vals[b]; });
        const auto best = idx.front(), worst = idx.back(), second = idx[idx.size() - 2];
        if (std::abs(vals[worst] - vals[best]) <= opts.f_tol * (1.0 + std::abs(vals[best]))) {
            converged = true;
            break;
        }
        ++iter;
        Eigen::VectorXd centroid = Eigen::VectorXd::Zero(d);
        for (std::size_t k = 0; k + 1 < idx.size(); ++k) centroid += pts[idx[k]];
        centroid /= static_cast<double>(d);

        Eigen::VectorXd xr = box.project(centroid + (centroid - pts[worst]));
        double fr = eval(xr);
        if (fr < vals[best]) {
            Eigen::VectorXd xe = box.project(centroid + 2.0 * (centroid - pts[worst]));
            double fe = eval(xe);
            if (fe < fr) {
                pts[worst] = xe;
                vals[worst] = fe;
            } else {
                pts[worst] = xr;
                vals[worst] = fr;
            }
        } else if (fr < vals[second]) {
            pts[worst] = xr;
            vals[worst] = fr;
        } else {
            const bool outside = fr < vals[worst];
            Eigen::VectorXd xc = outside ? Eigen::VectorXd(box.project(centroid + 0.5 * (xr - centroid)))
                                         : Eigen::VectorXd(box.project(centroid + 0.5 * (pts[worst] - centroid)));
            double fc = eval(xc);
            if (fc < std::min(fr, vals[worst])) {
                pts[worst] = xc;
                vals[worst] = fc;
            } else {
                for (std::size_t k = 1; k < idx.size(); ++k) {
                    auto j = idx[k];
                    pts[j] = box.project(pts[best] + 0.5 * (pts[j] - pts[best]));
                    vals[j] = eval(pts[j]);
                }
            }
        }
    }
    auto best = std::min_element(vals.begin(), vals.end()) - vals.begin();
    Result r;
    r.x = pts[best];
    r.f = vals[best];
    r.iterations = iter;
    r.evaluations = evals;
    r.converged = converged;
    r.pg_norm = std::numeric_limits<double>::quiet_NaN();
    return r;
}

Result projected_bfgs(const ObjectiveGrad& fg, const Eigen::VectorXd& x0, const Box& box,
                      const std::optional<Eigen::MatrixXd>& h0, const QuasiNewtonOptions& opts) {
    const auto d = x0.size();
    const Eigen::MatrixXd H_init = h0 ? *h0 : Eigen::MatrixXd::Identity(d, d);
    Eigen::MatrixXd H = H_init;

    Result r;
    r.x = box.project(x0);
    Eigen::VectorXd g(d);
    r.f = safe(fg(r.x, g));
    r.evaluations = 1;
    bool fresh = true;  // H was just reset
    bool stalled = false;

    for (r.iterations = 0; r.iterations < opts.max_iterations; ++r.iterations) {
        r.pg_norm = projected_gradient_norm(r.x, g, box);
        if (r.pg_norm <= opts.g_tol) {
            r.converged = true;
            return r;
        }
        // free set: not pinned to a bound by the gradient
        std::vector<Eigen::Index> free;
        for (Eigen::Index i = 0; i < d; ++i) {
            bool pinned = (at_lower(r.x[i], box.lower[i]) && g[i] > 0) ||
                          (at_upper(r.x[i], box.upper[i]) && g[i] < 0);
            if (!pinned) free.push_back(i);
        }
        Eigen::VectorXd dir = Eigen::VectorXd::Zero(d);
        for (auto i : free)
            for (auto j : free) dir[i] -= H(i, j) * g[j];
        if (g.dot(dir) >= 0) {
            for (auto i : free) dir[i] = -g[i];
            H = H_init;
            fresh = true;
        }

        double t = 1.0;
        Eigen::VectorXd x_new, g_new(d);
        double f_new = 0.0;
        bool accepted = false;
        for (int ls = 0; ls < 60; ++ls) {
            x_new = box.project(r.x + t * dir);
            f_new = safe(fg(x_new, g_new));
            ++r.evaluations;
            double decrease = g.dot(x_new - r.x);
            if (std::isfinite(f_new) && f_new <= r.f + 1e-4 * decrease) {
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if (!accepted) {
            // no decrease even along the projected steepest descent: a
            // minimum to working precision
            if (fresh) {
                stalled = true;
                break;
            }
            H = H_init;
            fresh = true;
            continue;
        }
        Eigen::VectorXd s = Eigen::VectorXd::Zero(d), y = Eigen::VectorXd::Zero(d);
        for (auto i : free) {
            s[i] = x_new[i] - r.x[i];
            y[i] = g_new[i] - g[i];
        }
        const double step = (x_new - r.x).lpNorm<Eigen::Infinity>();
        const double sy = s.dot(y);
        const double f_old = r.f;
        r.x = x_new;
        r.f = f_new;
        g = g_new;
        if (sy > 1e-12 * s.norm() * y.norm()) {
            const double rho = 1.0 / sy;
            Eigen::MatrixXd I = Eigen::MatrixXd::Identity(d, d);
            H = (I - rho * s * y.transpose()) * H * (I - rho * y * s.transpose()) + rho * s * s.transpose();
            fresh = false;
        }
        if (step <= 1e-15 * (1.0 + r.x.lpNorm<Eigen::Infinity>()) &&
            std::abs(f_old - r.f) <= 1e-16 * (1.0 + std::abs(r.f))) {
            stalled = true;
            break;
        }
    }
    r.pg_norm = projected_gradient_norm(r.x, g, box);
    r.converged = stalled || r.pg_norm <= opts.g_tol;
    return r;
}

}  // namespace vhs::opt
