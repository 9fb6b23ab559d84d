#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace vhs::stats {

double normal_cdf(double x);
double normal_pdf(double x);
double normal_quantile(double p);
double chi2_upper_tail(double x, double dof);

// Quantile of a Student-t with `dof` degrees of freedom rescaled to unit variance.
double std_student_quantile(double p, double dof);

// Rank ⌈nα⌉ (1-based, ascending), clamped into [1, n]. A relative slack of
// 1e-9 keeps products like 100*0.07 from rounding up a whole rank.
std::size_t order_rank(std::size_t n, double alpha);

// Ascending order statistic of the given 1-based rank. Copies the input.
double order_statistic(std::span<const double> x, std::size_t rank);

double mean(std::span<const double> x);
double variance(std::span<const double> x);  // population (divides by n)

}  // namespace vhs::stats
