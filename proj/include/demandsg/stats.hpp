#pragma once

namespace demandsg {

// Regularized incomplete beta I_x(a, b), evaluated by a continued fraction.
double incomplete_beta(double a, double b, double x);

// F distribution with (d1, d2) degrees of freedom.
double f_cdf(double x, double d1, double d2);
double f_sf(double x, double d1, double d2);  // 1 - cdf without cancellation

// Student t distribution with `df` degrees of freedom.
double t_cdf(double t, double df);
double t_two_sided_p(double t, double df);

}  // namespace demandsg
