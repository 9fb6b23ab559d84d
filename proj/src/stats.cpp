#include "vhs/stats.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

#include "vhs/errors.h"

namespace vhs::stats {

namespace {
const boost::math::normal_distribution<double> kStdNormal{0.0, 1.0};
}

double normal_cdf(double x) {
    if (std::isinf(x)) return x > 0 ? 1.0 : 0.0;
    return boost::math::cdf(kStdNormal, x);
}

double normal_pdf(double x) { return boost::math::pdf(kStdNormal, x); }

double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) throw DomainError("normal_quantile: p must lie in (0,1)");
    return boost::math::quantile(kStdNormal, p);
}

double chi2_upper_tail(double x, double dof) {
    if (x <= 0.0) return 1.0;
    if (std::isinf(x)) return 0.0;
    boost::math::chi_squared_distribution<double> chi2(dof);
    return boost::math::cdf(boost::math::complement(chi2, x));
}

double std_student_quantile(double p, double dof) {
    if (!(dof > 2.0)) throw DomainError("std_student_quantile: dof must exceed 2");
    boost::math::students_t_distribution<double> t(dof);
    return boost::math::quantile(t, p) * std::sqrt((dof - 2.0) / dof);
}

std::size_t order_rank(std::size_t n, double alpha) {
    const double na = static_cast<double>(n) * alpha;
    auto k = static_cast<std::size_t>(std::ceil(na * (1.0 - 1e-9)));
    return std::clamp<std::size_t>(k, 1, n);
}

double order_statistic(std::span<const double> x, std::size_t rank) {
    if (x.empty() || rank < 1 || rank > x.size())
        throw DomainError("order_statistic: rank outside [1, n]");
    std::vector<double> buf(x.begin(), x.end());
    auto it = buf.begin() + static_cast<std::ptrdiff_t>(rank - 1);
    std::nth_element(buf.begin(), it, buf.end());
    return *it;
}

double mean(std::span<const double> x) {
    if (x.empty()) return 0.0;
    return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

double variance(std::span<const double> x) {
    if (x.empty()) return 0.0;
    const double m = mean(x);
    double s = 0.0;
    for (double v : x) s += (v - m) * (v - m);
    return s / static_cast<double>(x.size());
}

}  // namespace vhs::stats
