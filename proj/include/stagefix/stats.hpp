#pragma once

#include <span>
#include <stdexcept>

namespace stagefix {

/// Regularized incomplete beta I_x(a, b), continued-fraction evaluation.
double incomplete_beta(double a, double b, double x);

/// Two-sided p-value of Student's t with `dof` degrees of freedom.
double student_t_two_sided_p(double t, double dof);

struct TTestResult {
    double t_statistic = 0.0;
    double p_value = 1.0;
    /// All differences equal. t is NaN (all zero) or +-inf, p is 1 or 0.
    bool degenerate = false;
};

/// Paired t-test on per-instance outcomes; n >= 2 and equal lengths.
TTestResult paired_t_test(std::span<const double> a, std::span<const double> b);

}  // namespace stagefix
