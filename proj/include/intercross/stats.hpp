#pragma once

#include <vector>

namespace intercross {

// Regularized upper incomplete gamma Q(a, x); series + continued fraction.
double gamma_q(double a, double x);

// Survival probability of a chi-square statistic with `dof` degrees of freedom.
double chi_square_pvalue(double statistic, int dof);

// Chi-square statistic for observed counts vs expected probabilities.
double chi_square_statistic(const std::vector<long long>& observed,
                            const std::vector<double>& expected_probs,
                            long long total_draws);

// Returns NaN when either series has zero variance.
double pearson(const std::vector<double>& x, const std::vector<double>& y);

// Spearman rank correlation (average ranks on ties).
double spearman(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace intercross
