#pragma once

namespace commitgate {

// Regularized lower/upper incomplete gamma P(a, x), Q(a, x); series for
// x < a + 1, Lentz continued fraction otherwise.
double regularized_gamma_p(double a, double x);
double regularized_gamma_q(double a, double x);

// Upper tail of the chi-square distribution with `df` degrees of freedom.
double chisq_upper_tail(double x, double df);

}  // namespace commitgate
