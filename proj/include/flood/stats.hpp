#pragma once

#include <span>

namespace flood {

double mean(std::span<const double> xs);
double sample_variance(std::span<const double> xs);  // n-1 denominator
double sample_stddev(std::span<const double> xs);

double normal_cdf(double z);

// Regularized incomplete beta I_x(a, b), continued-fraction evaluation.
double incomplete_beta(double a, double b, double x);

// Two-sided p-value for a Student-t statistic with `dof` degrees of freedom.
double student_t_two_sided_pvalue(double t, double dof);

struct WelchResult {
  double t_statistic;
  double dof;
  double p_value;
  bool significant;
};

// Welch's unequal-variance two-sided test with Welch-Satterthwaite degrees
// of freedom. Two degenerate zero-variance samples with equal means are
// defined as not significant.
WelchResult welch_t_test(std::span<const double> a, std::span<const double> b,
                         double alpha);

}  // namespace flood
